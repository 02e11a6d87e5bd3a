#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "actdet/data_model.hpp"
#include "actdet/linking.hpp"

namespace actdet {

struct RecallCurve {
    std::vector<double> thresholds;
    std::vector<double> recall;
};

/// For each threshold, the fraction of ground-truth instances with at least one
/// tubelet whose mean spatial IoU and temporal IoU both exceed it.
/// Throws UndefinedRecall on empty ground truth.
RecallCurve tubelet_recall(std::span<const Tubelet> tubelets, std::span<const ActivityInstance> ground_truth,
                           std::span<const double> thresholds);

/// Per ground-truth instance, the largest value c such that some tubelet has both
/// IoUs >= c. An instance counts as recalled at tau iff its coverage exceeds tau.
std::vector<double> best_coverage(std::span<const Tubelet> tubelets, std::span<const ActivityInstance> ground_truth);

struct AlignmentPolicy {
    double temporal_iou_min = 0.2;
};

void validate(const AlignmentPolicy& policy);

struct Match {
    std::size_t system = 0;
    std::size_t reference = 0;
    double temporal_iou = 0.0;
};

struct Alignment {
    std::vector<Match> matches;
    std::vector<std::size_t> misses;
    std::vector<std::size_t> false_alarms;
};

/// One-to-one alignment within each (video, activity): the matching with the
/// most pairs, then the largest total temporal IoU, over pairs whose temporal
/// IoU reaches temporal_iou_min. Indices refer to the input spans.
Alignment align_instances(std::span<const ActivityInstance> system, std::span<const ActivityInstance> reference,
                          const AlignmentPolicy& policy);

struct DetPoint {
    /// Confidence threshold; +inf for the empty-output point.
    double threshold = 0.0;
    /// False alarms per minute of corpus video.
    double rfa = 0.0;
    double p_miss = 1.0;
};

struct DetCurve {
    Activity activity = Activity::Closing;
    std::vector<DetPoint> points;
};

/// One curve per activity present in `reference`, swept over the distinct
/// system confidences in descending order.
std::vector<DetCurve> det_curve(std::span<const ActivityInstance> system, std::span<const ActivityInstance> reference,
                                std::span<const VideoMeta> metas, const AlignmentPolicy& policy);

double p_miss_at_rfa(const DetCurve& curve, double target_rfa = 0.15);

/// Weighted mean; classes without a weight get weight 1.
double mean_p_miss(const std::map<Activity, double>& per_class,
                   const std::map<Activity, double>& weights = {});

struct DetSummary {
    double target_rfa = 0.15;
    std::map<Activity, double> per_class;
    double mean = 1.0;
};

DetSummary summarize(std::span<const DetCurve> curves, double target_rfa,
                     const std::map<Activity, double>& weights = {});

void write_recall_csv(const RecallCurve& curve, const std::filesystem::path& path);
void write_det_csv(std::span<const DetCurve> curves, const std::filesystem::path& path);
void write_summary_json(const DetSummary& summary, const std::filesystem::path& path);

}  // namespace actdet
