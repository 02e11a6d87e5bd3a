#include "actdet/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "actdet/errors.hpp"
#include "actdet/proposals.hpp"
#include "assignment.hpp"

namespace actdet {

namespace {

std::string fixed(double v) {
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    return out;
}

using BucketKey = std::pair<std::string, Activity>;

std::map<BucketKey, std::vector<std::size_t>> bucket(std::span<const ActivityInstance> xs) {
    std::map<BucketKey, std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        out[{xs[i].video_id, xs[i].activity}].push_back(i);
    }
    return out;
}

// Optimal matching between index subsets; returns (system index, reference index, tiou).
std::vector<Match> match_bucket(std::span<const ActivityInstance> system, const std::vector<std::size_t>& sys_idx,
                                std::span<const ActivityInstance> reference, const std::vector<std::size_t>& ref_idx,
                                const AlignmentPolicy& policy) {
    std::vector<Match> out;
    if (sys_idx.empty() || ref_idx.empty()) {
        return out;
    }
    // Any extra pair outweighs every possible difference in summed IoU.
    const double pair_bonus = static_cast<double>(std::min(sys_idx.size(), ref_idx.size())) + 1.0;
    std::vector<std::vector<double>> w(sys_idx.size(), std::vector<double>(ref_idx.size(), 0.0));
    std::vector<std::vector<double>> tiou(sys_idx.size(), std::vector<double>(ref_idx.size(), 0.0));
    for (std::size_t i = 0; i < sys_idx.size(); ++i) {
        for (std::size_t j = 0; j < ref_idx.size(); ++j) {
            const double t = temporal_iou(system[sys_idx[i]].extent, reference[ref_idx[j]].extent);
            tiou[i][j] = t;
            if (t >= policy.temporal_iou_min && t > 0.0) {
                w[i][j] = pair_bonus + t;
            }
        }
    }
    const auto assignment = detail::max_weight_matching(w);
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] >= 0) {
            const auto j = static_cast<std::size_t>(assignment[i]);
            out.push_back(Match{sys_idx[i], ref_idx[j], tiou[i][j]});
        }
    }
    return out;
}

}  // namespace

std::vector<double> best_coverage(std::span<const Tubelet> tubelets, std::span<const ActivityInstance> ground_truth) {
    std::map<std::string, std::vector<const Tubelet*>> by_video;
    for (const auto& t : tubelets) {
        by_video[t.video_id].push_back(&t);
    }
    std::vector<double> out;
    out.reserve(ground_truth.size());
    for (const auto& gt : ground_truth) {
        double best = 0.0;
        if (auto it = by_video.find(gt.video_id); it != by_video.end()) {
            for (const Tubelet* t : it->second) {
                if (overlap_length(t->extent, gt.extent) == 0) {
                    continue;
                }
                const double tiou = temporal_iou(t->extent, gt.extent);
                if (tiou <= best) {
                    continue;
                }
                const double siou = tubelet_spatial_iou(t->track(), gt.track());
                best = std::max(best, std::min(tiou, siou));
            }
        }
        out.push_back(best);
    }
    return out;
}

RecallCurve tubelet_recall(std::span<const Tubelet> tubelets, std::span<const ActivityInstance> ground_truth,
                           std::span<const double> thresholds) {
    if (ground_truth.empty()) {
        throw UndefinedRecall("recall is undefined without ground-truth instances");
    }
    if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
        throw InvalidInput("recall thresholds must be ascending");
    }
    const auto coverage = best_coverage(tubelets, ground_truth);
    RecallCurve curve;
    for (const double tau : thresholds) {
        const auto hit = std::count_if(coverage.begin(), coverage.end(), [tau](double c) { return c > tau; });
        curve.thresholds.push_back(tau);
        curve.recall.push_back(static_cast<double>(hit) / static_cast<double>(coverage.size()));
    }
    return curve;
}

void validate(const AlignmentPolicy& policy) {
    if (!(policy.temporal_iou_min > 0.0 && policy.temporal_iou_min <= 1.0)) {
        throw ConfigError("temporal_iou_min must lie in (0, 1]");
    }
}

Alignment align_instances(std::span<const ActivityInstance> system, std::span<const ActivityInstance> reference,
                          const AlignmentPolicy& policy) {
    validate(policy);
    const auto sys_buckets = bucket(system);
    const auto ref_buckets = bucket(reference);
    Alignment out;
    std::vector<bool> sys_matched(system.size(), false), ref_matched(reference.size(), false);
    for (const auto& [key, sys_idx] : sys_buckets) {
        auto rit = ref_buckets.find(key);
        if (rit == ref_buckets.end()) {
            continue;
        }
        for (const auto& m : match_bucket(system, sys_idx, reference, rit->second, policy)) {
            sys_matched[m.system] = true;
            ref_matched[m.reference] = true;
            out.matches.push_back(m);
        }
    }
    std::sort(out.matches.begin(), out.matches.end(),
              [](const Match& a, const Match& b) { return a.system < b.system; });
    for (std::size_t j = 0; j < reference.size(); ++j) {
        if (!ref_matched[j]) out.misses.push_back(j);
    }
    for (std::size_t i = 0; i < system.size(); ++i) {
        if (!sys_matched[i]) out.false_alarms.push_back(i);
    }
    return out;
}

std::vector<DetCurve> det_curve(std::span<const ActivityInstance> system, std::span<const ActivityInstance> reference,
                                std::span<const VideoMeta> metas, const AlignmentPolicy& policy) {
    validate(policy);
    double minutes = 0.0;
    for (const auto& m : metas) {
        minutes += m.minutes();
    }
    if (!(minutes > 0.0)) {
        throw InvalidInput("total video duration is zero");
    }
    std::set<Activity> classes;
    for (const auto& r : reference) {
        classes.insert(r.activity);
    }
    const auto sys_buckets = bucket(system);
    const auto ref_buckets = bucket(reference);

    std::vector<DetCurve> curves;
    for (const Activity act : classes) {
        std::size_t ref_total = 0;
        // Per video: descending distinct thresholds and the optimal match count at each.
        std::vector<std::vector<std::pair<double, std::size_t>>> steps;
        std::vector<double> all_conf;
        for (const auto& [key, ref_idx] : ref_buckets) {
            if (key.second == act) ref_total += ref_idx.size();
        }
        for (const auto& [key, sys_idx_raw] : sys_buckets) {
            if (key.second != act) {
                continue;
            }
            std::vector<std::size_t> sys_idx = sys_idx_raw;
            std::stable_sort(sys_idx.begin(), sys_idx.end(), [&](std::size_t a, std::size_t b) {
                return system[a].confidence > system[b].confidence;
            });
            for (const auto i : sys_idx) all_conf.push_back(system[i].confidence);
            auto rit = ref_buckets.find(key);
            std::vector<std::pair<double, std::size_t>> video_steps;
            std::size_t k = 0;
            while (k < sys_idx.size()) {
                const double thr = system[sys_idx[k]].confidence;
                while (k < sys_idx.size() && system[sys_idx[k]].confidence == thr) ++k;
                std::size_t matched = 0;
                if (rit != ref_buckets.end()) {
                    const std::vector<std::size_t> prefix(sys_idx.begin(), sys_idx.begin() + static_cast<long>(k));
                    matched = match_bucket(system, prefix, reference, rit->second, policy).size();
                }
                video_steps.emplace_back(thr, matched);
            }
            steps.push_back(std::move(video_steps));
        }
        std::sort(all_conf.begin(), all_conf.end(), std::greater<>());
        all_conf.erase(std::unique(all_conf.begin(), all_conf.end()), all_conf.end());

        DetCurve curve;
        curve.activity = act;
        if (all_conf.empty()) {
            curve.points.push_back(DetPoint{std::numeric_limits<double>::infinity(), 0.0, 1.0});
        }
        for (const double thr : all_conf) {
            std::size_t included = 0;
            for (const auto& [key, sys_idx] : sys_buckets) {
                if (key.second != act) continue;
                included += static_cast<std::size_t>(std::count_if(
                    sys_idx.begin(), sys_idx.end(), [&](std::size_t i) { return system[i].confidence >= thr; }));
            }
            std::size_t matched = 0;
            for (const auto& vs : steps) {
                // Last step whose threshold is still >= thr.
                std::size_t m = 0;
                for (const auto& [t, c] : vs) {
                    if (t >= thr) m = c;
                    else break;
                }
                matched += m;
            }
            const double p_miss = ref_total == 0 ? 0.0 : 1.0 - static_cast<double>(matched) / ref_total;
            const double rfa = static_cast<double>(included - matched) / minutes;
            curve.points.push_back(DetPoint{thr, rfa, p_miss});
        }
        curves.push_back(std::move(curve));
    }
    return curves;
}

double p_miss_at_rfa(const DetCurve& curve, double target_rfa) {
    const DetPoint* below = nullptr;
    const DetPoint* above = nullptr;
    for (const auto& p : curve.points) {
        if (p.rfa <= target_rfa) {
            below = &p;
        } else if (above == nullptr) {
            above = &p;
        }
    }
    if (below == nullptr) {
        return 1.0;
    }
    if (above == nullptr || above->rfa <= below->rfa) {
        return below->p_miss;
    }
    const double t = (target_rfa - below->rfa) / (above->rfa - below->rfa);
    return below->p_miss + (above->p_miss - below->p_miss) * t;
}

double mean_p_miss(const std::map<Activity, double>& per_class, const std::map<Activity, double>& weights) {
    if (per_class.empty()) {
        throw InvalidInput("mean p_miss over zero classes");
    }
    double total = 0.0;
    double wsum = 0.0;
    for (const auto& [act, v] : per_class) {
        auto it = weights.find(act);
        const double w = it == weights.end() ? 1.0 : it->second;
        total += w * v;
        wsum += w;
    }
    if (!(wsum > 0.0)) {
        throw InvalidInput("class weights sum to zero");
    }
    return total / wsum;
}

DetSummary summarize(std::span<const DetCurve> curves, double target_rfa, const std::map<Activity, double>& weights) {
    DetSummary s;
    s.target_rfa = target_rfa;
    for (const auto& c : curves) {
        s.per_class[c.activity] = p_miss_at_rfa(c, target_rfa);
    }
    s.mean = s.per_class.empty() ? 1.0 : mean_p_miss(s.per_class, weights);
    return s;
}

void write_recall_csv(const RecallCurve& curve, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "threshold,recall\n";
    for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
        out << fixed(curve.thresholds[i]) << ',' << fixed(curve.recall[i]) << '\n';
    }
}

void write_det_csv(std::span<const DetCurve> curves, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "activity,threshold,rfa,p_miss\n";
    for (const auto& c : curves) {
        for (const auto& p : c.points) {
            out << to_string(c.activity) << ',' << fixed(p.threshold) << ',' << fixed(p.rfa) << ','
                << fixed(p.p_miss) << '\n';
        }
    }
}

void write_summary_json(const DetSummary& summary, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["target_rfa"] = summary.target_rfa;
    nlohmann::ordered_json per = nlohmann::ordered_json::object();
    for (const auto& [act, v] : summary.per_class) {
        per[std::string(to_string(act))] = v;
    }
    j["per_class_p_miss"] = std::move(per);
    j["mean_p_miss"] = summary.mean;
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

}  // namespace actdet
