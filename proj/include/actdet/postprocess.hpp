#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "actdet/data_model.hpp"
#include "actdet/refinement.hpp"

namespace actdet {

enum class SoftNmsMethod { gaussian, linear };

struct SoftNmsConfig {
    SoftNmsMethod method = SoftNmsMethod::gaussian;
    double sigma = 0.5;
    double linear_threshold = 0.3;
    /// Candidates whose score falls below the floor are dropped.
    double score_floor = 0.001;
};

void validate(const SoftNmsConfig& cfg);

/// An output instance together with the tubelet it was cut from (-1 if unknown).
struct Candidate {
    ActivityInstance instance;
    std::int64_t tubelet_id = -1;
};

/// Two candidates can suppress each other when they share a tubelet or their
/// boxes overlap on some common frame.
bool same_neighborhood(const Candidate& a, const Candidate& b);

/// Score multiplier applied to a neighbor at temporal IoU `tiou` with the selected candidate.
double decay_factor(double tiou, const SoftNmsConfig& cfg);

/// Soft-NMS over candidates of one video and one activity. Output follows
/// canonical instance order.
std::vector<Candidate> soft_nms(std::vector<Candidate> candidates, const SoftNmsConfig& cfg);

struct FusionWeights {
    double vehicle = 1.0;
    double person = 1.0;
};

struct FuseConfig {
    FusionWeights weights;
    double score_threshold = 0.0;
    SoftNmsConfig nms;
};

void validate(const FuseConfig& cfg);

/// One instance per (proposal, activity) whose score reaches `threshold`.
std::vector<ActivityInstance> proposals_to_instances(std::span<const Proposal> proposals, double threshold);

/// Thresholded, weight-scaled candidates of both models, before suppression.
/// Throws InvariantViolation when the two lists score overlapping activity sets.
std::vector<Candidate> collect_candidates(std::span<const Proposal> vehicle, std::span<const Proposal> person,
                                          const FuseConfig& cfg);

/// Late fusion: collect_candidates followed by per-(video, activity) soft-NMS.
std::vector<ActivityInstance> fuse(std::span<const Proposal> vehicle, std::span<const Proposal> person,
                                   const FuseConfig& cfg);

/// Descending confidence, then video, start, activity, end.
bool canonical_less(const ActivityInstance& a, const ActivityInstance& b);
void sort_canonical(std::vector<ActivityInstance>& instances);

}  // namespace actdet
