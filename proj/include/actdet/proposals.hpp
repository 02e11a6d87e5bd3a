#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "actdet/data_model.hpp"
#include "actdet/refinement.hpp"

namespace actdet {

struct LabelPolicy {
    double spatial_pos = 0.35;
    double temporal_pos = 0.5;
    double temporal_neg = 0.2;
};

void validate(const LabelPolicy& policy);

enum class LabelKind { positive, negative, ignore };

std::string_view to_string(LabelKind k);

struct ProposalLabel {
    LabelKind kind = LabelKind::ignore;
    std::optional<Activity> activity;
    /// Index into the ground-truth list handed to label_proposal.
    std::optional<std::size_t> matched_instance;

    friend bool operator==(const ProposalLabel&, const ProposalLabel&) = default;
};

enum class ModelGroup { vehicle_related, person_related };

std::string_view to_string(ModelGroup g);
std::optional<ModelGroup> parse_model_group(std::string_view s);

/// The nine activities each decomposed model is responsible for.
const std::array<Activity, 9>& group_activities(ModelGroup g);
ModelGroup group_of(Activity a);

/// car and truck go to the vehicle model; person and bicycle to the person model.
ModelGroup route(ObjectClass c);
ModelGroup route(const Proposal& p);

/// Mean per-frame IoU over the frames both tracks cover; 0 with no common frame.
double tubelet_spatial_iou(const BoxTrack& a, const BoxTrack& b);

/// Only instances from the proposal's video are considered.
ProposalLabel label_proposal(const Proposal& proposal, std::span<const ActivityInstance> ground_truth,
                             const LabelPolicy& policy);

class Scorer {
public:
    virtual ~Scorer() = default;
    /// Scores for the nine activities of `group` plus the non-action score, all in [0, 1].
    virtual ScoreMap score(const Proposal& proposal, ModelGroup group) const = 0;
    virtual std::string name() const = 0;
    /// False when score() must not be called from several threads at once.
    virtual bool thread_safe() const { return true; }
};

/// Scores proposals from their ground-truth label. Positives get 1 - epsilon on
/// the matched class; with probability label_noise the class is swapped for
/// another activity of the same group. Noise draws hash the proposal identity
/// with `seed`, so results do not depend on call order.
class OracleScorer final : public Scorer {
public:
    OracleScorer(std::vector<ActivityInstance> ground_truth, LabelPolicy policy, double epsilon = 0.0,
                 double label_noise = 0.0, std::uint64_t seed = 0);

    ScoreMap score(const Proposal& proposal, ModelGroup group) const override;
    std::string name() const override { return "oracle"; }

private:
    std::vector<ActivityInstance> ground_truth_;
    LabelPolicy policy_;
    double epsilon_;
    double label_noise_;
    std::uint64_t seed_;
};

/// Motion-only scorer for smoke tests: every activity scores
/// 1 - exp(-displacement / scale) and non-action takes the complement.
class HeuristicScorer final : public Scorer {
public:
    explicit HeuristicScorer(double scale = 2.0);

    ScoreMap score(const Proposal& proposal, ModelGroup group) const override;
    std::string name() const override { return "heuristic"; }

private:
    double scale_;
};

/// Scores the proposals routed to `group` (all proposals when unset). Scorer
/// failures and out-of-range scores raise ScoringError carrying the proposal id.
std::vector<Proposal> score_proposals(std::span<const Proposal> proposals, const Scorer& scorer,
                                      std::optional<ModelGroup> group, std::size_t workers = 1);

struct LabeledProposal {
    std::int64_t proposal_id = 0;
    ProposalLabel label;
};

std::vector<LabeledProposal> label_proposals(std::span<const Proposal> proposals,
                                             std::span<const ActivityInstance> ground_truth,
                                             const LabelPolicy& policy);

void write_labels(const std::vector<LabeledProposal>& labels, const std::filesystem::path& path);
std::vector<LabeledProposal> read_labels(const std::filesystem::path& path);

}  // namespace actdet
