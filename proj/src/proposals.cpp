#include "actdet/proposals.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "actdet/errors.hpp"
#include "actdet/parallel.hpp"

namespace actdet {

namespace {

constexpr std::string_view kLabelsFormat = "actdet.labels";

constexpr std::array<Activity, 9> kVehicleActivities{
    Activity::Closing,
    Activity::Opening,
    Activity::Closing_Trunk,
    Activity::Open_Trunk,
    Activity::vehicle_turning_left,
    Activity::vehicle_turning_right,
    Activity::vehicle_u_turn,
    Activity::Entering,
    Activity::Exiting,
};

constexpr std::array<Activity, 9> kPersonActivities{
    Activity::specialized_talking_phone,
    Activity::specialized_texting_phone,
    Activity::Transport_HeavyCarry,
    Activity::activity_carrying,
    Activity::Pull,
    Activity::Riding,
    Activity::Talking,
    Activity::Loading,
    Activity::Unloading,
};

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t hash_string(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

void validate(const LabelPolicy& policy) {
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(policy.spatial_pos) || !unit(policy.temporal_pos) || !unit(policy.temporal_neg) ||
        policy.temporal_neg > policy.temporal_pos) {
        throw ConfigError("label policy needs 0 <= temporal_neg <= temporal_pos <= 1 and spatial_pos in [0, 1]");
    }
}

std::string_view to_string(LabelKind k) {
    switch (k) {
        case LabelKind::positive:
            return "positive";
        case LabelKind::negative:
            return "negative";
        case LabelKind::ignore:
            return "ignore";
    }
    return "ignore";
}

std::string_view to_string(ModelGroup g) {
    return g == ModelGroup::vehicle_related ? "vehicle_related" : "person_related";
}

std::optional<ModelGroup> parse_model_group(std::string_view s) {
    if (s == "vehicle_related" || s == "vehicle") {
        return ModelGroup::vehicle_related;
    }
    if (s == "person_related" || s == "person") {
        return ModelGroup::person_related;
    }
    return std::nullopt;
}

const std::array<Activity, 9>& group_activities(ModelGroup g) {
    return g == ModelGroup::vehicle_related ? kVehicleActivities : kPersonActivities;
}

ModelGroup group_of(Activity a) {
    const bool vehicle = std::find(kVehicleActivities.begin(), kVehicleActivities.end(), a) != kVehicleActivities.end();
    return vehicle ? ModelGroup::vehicle_related : ModelGroup::person_related;
}

ModelGroup route(ObjectClass c) {
    switch (c) {
        case ObjectClass::car:
        case ObjectClass::truck:
            return ModelGroup::vehicle_related;
        case ObjectClass::person:
        case ObjectClass::bicycle:
            return ModelGroup::person_related;
    }
    throw InvalidInput("unknown object class");
}

ModelGroup route(const Proposal& p) { return route(p.object_class); }

double tubelet_spatial_iou(const BoxTrack& a, const BoxTrack& b) {
    const std::int64_t lo = std::max(a.extent.start, b.extent.start);
    const std::int64_t hi = std::min(a.extent.end, b.extent.end);
    if (lo >= hi) {
        return 0.0;
    }
    double total = 0.0;
    for (std::int64_t f = lo; f < hi; ++f) {
        total += spatial_iou(a.boxes[static_cast<std::size_t>(f - a.extent.start)],
                             b.boxes[static_cast<std::size_t>(f - b.extent.start)]);
    }
    return total / static_cast<double>(hi - lo);
}

ProposalLabel label_proposal(const Proposal& proposal, std::span<const ActivityInstance> ground_truth,
                             const LabelPolicy& policy) {
    struct Best {
        double tiou;
        double siou;
        const ActivityInstance* inst;
        std::size_t index;
    };
    std::optional<Best> best;
    double max_tiou = 0.0;
    const BoxTrack pt = proposal.track();
    for (std::size_t i = 0; i < ground_truth.size(); ++i) {
        const auto& inst = ground_truth[i];
        if (inst.video_id != proposal.video_id) {
            continue;
        }
        const double tiou = temporal_iou(proposal.window, inst.extent);
        max_tiou = std::max(max_tiou, tiou);
        if (tiou < policy.temporal_pos) {
            continue;
        }
        const double siou = tubelet_spatial_iou(pt, inst.track());
        if (siou < policy.spatial_pos) {
            continue;
        }
        // Content-based ordering so the outcome ignores list order.
        auto key = [](const Best& b) {
            return std::make_tuple(b.tiou, b.siou, -static_cast<int>(b.inst->activity), -b.inst->extent.start,
                                   -b.inst->extent.end);
        };
        Best cand{tiou, siou, &inst, i};
        if (!best || key(cand) > key(*best)) {
            best = cand;
        }
    }
    if (best) {
        return ProposalLabel{LabelKind::positive, best->inst->activity, best->index};
    }
    if (max_tiou < policy.temporal_neg) {
        return ProposalLabel{LabelKind::negative, std::nullopt, std::nullopt};
    }
    return ProposalLabel{LabelKind::ignore, std::nullopt, std::nullopt};
}

OracleScorer::OracleScorer(std::vector<ActivityInstance> ground_truth, LabelPolicy policy, double epsilon,
                           double label_noise, std::uint64_t seed)
    : ground_truth_(std::move(ground_truth)),
      policy_(policy),
      epsilon_(epsilon),
      label_noise_(label_noise),
      seed_(seed) {
    validate(policy_);
    if (!(epsilon_ >= 0.0 && epsilon_ <= 1.0) || !(label_noise_ >= 0.0 && label_noise_ <= 1.0)) {
        throw ConfigError("oracle epsilon and label_noise must lie in [0, 1]");
    }
}

ScoreMap OracleScorer::score(const Proposal& proposal, ModelGroup group) const {
    const auto& acts = group_activities(group);
    // Mass left over after the top entry is spread over the other nine entries.
    const double rest = epsilon_ / static_cast<double>(acts.size());
    ScoreMap out;
    for (const auto a : acts) {
        out.activities[a] = rest;
    }
    out.non_action = 1.0 - epsilon_;

    const ProposalLabel label = label_proposal(proposal, ground_truth_, policy_);
    if (label.kind != LabelKind::positive || group_of(*label.activity) != group) {
        return out;
    }
    Activity cls = *label.activity;
    if (label_noise_ > 0.0) {
        std::uint64_t h = splitmix64(seed_ ^ hash_string(proposal.video_id));
        h = splitmix64(h ^ static_cast<std::uint64_t>(proposal.window.start));
        h = splitmix64(h ^ static_cast<std::uint64_t>(proposal.window.end));
        h = splitmix64(h ^ static_cast<std::uint64_t>(proposal.tubelet_id));
        const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
        if (u < label_noise_) {
            const auto pos = static_cast<std::size_t>(std::find(acts.begin(), acts.end(), cls) - acts.begin());
            const auto shift = 1 + splitmix64(h) % (acts.size() - 1);
            cls = acts[(pos + shift) % acts.size()];
        }
    }
    out.activities[cls] = 1.0 - epsilon_;
    out.non_action = rest;
    return out;
}

HeuristicScorer::HeuristicScorer(double scale) : scale_(scale) {
    if (!(scale_ > 0.0)) {
        throw ConfigError("heuristic scale must be positive");
    }
}

ScoreMap HeuristicScorer::score(const Proposal& proposal, ModelGroup group) const {
    double displacement = 0.0;
    if (proposal.boxes.size() >= 2) {
        for (std::size_t i = 1; i < proposal.boxes.size(); ++i) {
            displacement += std::hypot(proposal.boxes[i].center_x() - proposal.boxes[i - 1].center_x(),
                                       proposal.boxes[i].center_y() - proposal.boxes[i - 1].center_y());
        }
        displacement /= static_cast<double>(proposal.boxes.size() - 1);
    }
    const double active = 1.0 - std::exp(-displacement / scale_);
    ScoreMap out;
    for (const auto a : group_activities(group)) {
        out.activities[a] = active;
    }
    out.non_action = 1.0 - active;
    return out;
}

std::vector<Proposal> score_proposals(std::span<const Proposal> proposals, const Scorer& scorer,
                                      std::optional<ModelGroup> group, std::size_t workers) {
    std::vector<const Proposal*> selected;
    for (const auto& p : proposals) {
        if (!group || route(p) == *group) {
            selected.push_back(&p);
        }
    }
    std::vector<Proposal> out(selected.size());
    const std::size_t threads = scorer.thread_safe() ? workers : 1;
    parallel_for(selected.size(), threads, [&](std::size_t i) {
        const Proposal& p = *selected[i];
        ScoreMap scores;
        try {
            scores = scorer.score(p, route(p));
        } catch (const ScoringError&) {
            throw;
        } catch (const std::exception& e) {
            throw ScoringError(p.id, std::string(scorer.name()) + " scorer failed: " + e.what());
        }
        auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
        bool ok = in_unit(scores.non_action);
        for (const auto& [a, v] : scores.activities) {
            ok = ok && in_unit(v);
        }
        if (!ok) {
            throw ScoringError(p.id, std::string(scorer.name()) + " scorer produced a score outside [0, 1]");
        }
        out[i] = p;
        out[i].scores = std::move(scores);
    });
    return out;
}

std::vector<LabeledProposal> label_proposals(std::span<const Proposal> proposals,
                                             std::span<const ActivityInstance> ground_truth,
                                             const LabelPolicy& policy) {
    validate(policy);
    std::vector<LabeledProposal> out;
    out.reserve(proposals.size());
    for (const auto& p : proposals) {
        out.push_back(LabeledProposal{p.id, label_proposal(p, ground_truth, policy)});
    }
    return out;
}

void write_labels(const std::vector<LabeledProposal>& labels, const std::filesystem::path& path) {
    std::vector<jsonl::Json> records;
    records.reserve(labels.size());
    for (const auto& l : labels) {
        jsonl::Json j;
        j["proposal_id"] = l.proposal_id;
        j["label"] = std::string(to_string(l.label.kind));
        j["activity"] = l.label.activity ? jsonl::Json(std::string(to_string(*l.label.activity))) : jsonl::Json();
        j["matched_instance"] =
            l.label.matched_instance ? jsonl::Json(*l.label.matched_instance) : jsonl::Json();
        records.push_back(std::move(j));
    }
    jsonl::write(path, kLabelsFormat, records);
}

std::vector<LabeledProposal> read_labels(const std::filesystem::path& path) {
    std::vector<LabeledProposal> out;
    jsonl::read(path, kLabelsFormat, [&](std::size_t line, const nlohmann::json& j) {
        LabeledProposal l;
        l.proposal_id = jsonl::integer(j, "proposal_id", line);
        const std::string kind = jsonl::string(j, "label", line);
        if (kind == "positive") {
            l.label.kind = LabelKind::positive;
        } else if (kind == "negative") {
            l.label.kind = LabelKind::negative;
        } else if (kind == "ignore") {
            l.label.kind = LabelKind::ignore;
        } else {
            throw ParseError(line, "unknown label kind '" + kind + "'");
        }
        if (j.contains("activity") && !j["activity"].is_null()) {
            const auto act = parse_activity(jsonl::string(j, "activity", line));
            if (!act) {
                throw SchemaError("line " + std::to_string(line) + ": unknown activity");
            }
            l.label.activity = *act;
        }
        if (j.contains("matched_instance") && !j["matched_instance"].is_null()) {
            l.label.matched_instance = static_cast<std::size_t>(jsonl::integer(j, "matched_instance", line));
        }
        out.push_back(l);
    });
    return out;
}

}  // namespace actdet
