#include "actdet/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

#include "actdet/errors.hpp"
#include "actdet/proposals.hpp"

namespace actdet {

void validate(const SoftNmsConfig& cfg) {
    if (!(cfg.sigma > 0.0)) {
        throw ConfigError("soft-NMS sigma must be positive");
    }
    if (!(cfg.linear_threshold >= 0.0 && cfg.linear_threshold <= 1.0)) {
        throw ConfigError("soft-NMS linear_threshold must lie in [0, 1]");
    }
    if (!(cfg.score_floor >= 0.0)) {
        throw ConfigError("soft-NMS score_floor must be >= 0");
    }
}

void validate(const FuseConfig& cfg) {
    validate(cfg.nms);
    auto ok = [](double w) { return w > 0.0 && w <= 1.0; };
    if (!ok(cfg.weights.vehicle) || !ok(cfg.weights.person)) {
        throw ConfigError("fusion weights must lie in (0, 1]");
    }
    if (!(cfg.score_threshold >= 0.0 && cfg.score_threshold <= 1.0)) {
        throw ConfigError("score_threshold must lie in [0, 1]");
    }
}

bool canonical_less(const ActivityInstance& a, const ActivityInstance& b) {
    if (a.confidence != b.confidence) {
        return a.confidence > b.confidence;
    }
    return std::tie(a.video_id, a.extent.start, a.activity, a.extent.end) <
           std::tie(b.video_id, b.extent.start, b.activity, b.extent.end);
}

void sort_canonical(std::vector<ActivityInstance>& instances) {
    std::stable_sort(instances.begin(), instances.end(), canonical_less);
}

bool same_neighborhood(const Candidate& a, const Candidate& b) {
    if (a.tubelet_id >= 0 && a.tubelet_id == b.tubelet_id) {
        return true;
    }
    return tubelet_spatial_iou(a.instance.track(), b.instance.track()) > 0.0;
}

double decay_factor(double tiou, const SoftNmsConfig& cfg) {
    if (cfg.method == SoftNmsMethod::gaussian) {
        return std::exp(-(tiou * tiou) / cfg.sigma);
    }
    return tiou > cfg.linear_threshold ? 1.0 - tiou : 1.0;
}

std::vector<Candidate> soft_nms(std::vector<Candidate> candidates, const SoftNmsConfig& cfg) {
    validate(cfg);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        if (candidates[i].instance.video_id != candidates[0].instance.video_id ||
            candidates[i].instance.activity != candidates[0].instance.activity) {
            throw InvalidInput("soft_nms expects candidates of one video and one activity");
        }
    }
    std::vector<std::size_t> remaining;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (candidates[i].instance.confidence >= cfg.score_floor) {
            remaining.push_back(i);
        }
    }
    std::vector<std::size_t> kept;
    while (!remaining.empty()) {
        auto best_it = std::max_element(remaining.begin(), remaining.end(), [&](std::size_t a, std::size_t b) {
            // Strict comparison keeps the earliest index among equal scores.
            return candidates[a].instance.confidence < candidates[b].instance.confidence;
        });
        const std::size_t best = *best_it;
        remaining.erase(best_it);
        kept.push_back(best);
        const Candidate& sel = candidates[best];
        std::vector<std::size_t> next;
        next.reserve(remaining.size());
        for (const std::size_t r : remaining) {
            Candidate& c = candidates[r];
            if (overlap_length(sel.instance.extent, c.instance.extent) > 0 && same_neighborhood(sel, c)) {
                c.instance.confidence *= decay_factor(temporal_iou(sel.instance.extent, c.instance.extent), cfg);
            }
            if (c.instance.confidence >= cfg.score_floor) {
                next.push_back(r);
            }
        }
        remaining = std::move(next);
    }
    std::vector<Candidate> out;
    out.reserve(kept.size());
    for (const std::size_t k : kept) {
        out.push_back(std::move(candidates[k]));
    }
    std::stable_sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
        if (canonical_less(a.instance, b.instance)) return true;
        if (canonical_less(b.instance, a.instance)) return false;
        return a.tubelet_id < b.tubelet_id;
    });
    return out;
}

namespace {

std::vector<Candidate> to_candidates(std::span<const Proposal> proposals, double threshold, double weight) {
    std::vector<Candidate> out;
    for (const auto& p : proposals) {
        if (!p.scores) {
            continue;
        }
        for (const auto& [act, score] : p.scores->activities) {
            if (score < threshold) {
                continue;
            }
            Candidate c;
            c.instance.video_id = p.video_id;
            c.instance.activity = act;
            c.instance.extent = p.window;
            c.instance.boxes = p.boxes;
            c.instance.confidence = score * weight;
            c.tubelet_id = p.tubelet_id;
            out.push_back(std::move(c));
        }
    }
    return out;
}

std::set<Activity> scored_activities(std::span<const Proposal> proposals) {
    std::set<Activity> out;
    for (const auto& p : proposals) {
        if (p.scores) {
            for (const auto& [act, v] : p.scores->activities) {
                out.insert(act);
            }
        }
    }
    return out;
}

}  // namespace

std::vector<ActivityInstance> proposals_to_instances(std::span<const Proposal> proposals, double threshold) {
    std::vector<ActivityInstance> out;
    for (auto& c : to_candidates(proposals, threshold, 1.0)) {
        out.push_back(std::move(c.instance));
    }
    return out;
}

std::vector<Candidate> collect_candidates(std::span<const Proposal> vehicle, std::span<const Proposal> person,
                                          const FuseConfig& cfg) {
    validate(cfg);
    const auto va = scored_activities(vehicle);
    const auto pa = scored_activities(person);
    std::vector<Activity> shared;
    std::set_intersection(va.begin(), va.end(), pa.begin(), pa.end(), std::back_inserter(shared));
    if (!shared.empty()) {
        throw InvariantViolation("vehicle and person outputs both score '" + std::string(to_string(shared.front())) +
                                 "'");
    }
    auto out = to_candidates(vehicle, cfg.score_threshold, cfg.weights.vehicle);
    auto more = to_candidates(person, cfg.score_threshold, cfg.weights.person);
    out.insert(out.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
    return out;
}

std::vector<ActivityInstance> fuse(std::span<const Proposal> vehicle, std::span<const Proposal> person,
                                   const FuseConfig& cfg) {
    std::map<std::pair<std::string, Activity>, std::vector<Candidate>> buckets;
    for (auto& c : collect_candidates(vehicle, person, cfg)) {
        auto key = std::make_pair(c.instance.video_id, c.instance.activity);
        buckets[key].push_back(std::move(c));
    }
    std::vector<ActivityInstance> out;
    for (auto& [key, bucket] : buckets) {
        for (auto& c : soft_nms(std::move(bucket), cfg.nms)) {
            out.push_back(std::move(c.instance));
        }
    }
    sort_canonical(out);
    return out;
}

}  // namespace actdet
