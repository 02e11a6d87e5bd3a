#include "actdet/linking.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <tuple>

#include "actdet/errors.hpp"

namespace actdet {

namespace {

constexpr std::string_view kTubeletsFormat = "actdet.tubelets";

constexpr std::array<std::string_view, 3> kProvenanceNames{"detected", "interpolated", "tracked"};

std::optional<Provenance> parse_provenance(std::string_view s) {
    for (std::size_t i = 0; i < kProvenanceNames.size(); ++i) {
        if (kProvenanceNames[i] == s) {
            return static_cast<Provenance>(i);
        }
    }
    return std::nullopt;
}

// Frame-major view of one video's detections.
struct FrameDetections {
    std::int64_t frame;
    std::vector<const Detection*> items;
};

std::vector<FrameDetections> by_frame(std::span<const Detection> detections) {
    std::map<std::int64_t, std::vector<const Detection*>> grouped;
    const std::string* video = detections.empty() ? nullptr : &detections.front().video_id;
    for (const auto& d : detections) {
        if (d.video_id != *video) {
            throw InvalidInput("linking expects detections of a single video");
        }
        validate(d.box);
        grouped[d.frame].push_back(&d);
    }
    std::vector<FrameDetections> out;
    out.reserve(grouped.size());
    for (auto& [f, items] : grouped) {
        out.push_back(FrameDetections{f, std::move(items)});
    }
    return out;
}

}  // namespace

std::string_view to_string(Provenance p) { return kProvenanceNames[static_cast<std::size_t>(p)]; }

void validate(const Tubelet& t) {
    validate(t.extent);
    const auto n = static_cast<std::size_t>(t.extent.length());
    if (t.boxes.size() != n || t.scores.size() != n || t.provenance.size() != n) {
        throw InvariantViolation("tubelet " + std::to_string(t.id) + " is not dense over its extent");
    }
    for (const auto& b : t.boxes) {
        validate(b);
    }
}

void validate(const LinkConfig& cfg) {
    if (!(cfg.iou_link_threshold > 0.0 && cfg.iou_link_threshold <= 1.0)) {
        throw ConfigError("iou_link_threshold must lie in (0, 1]");
    }
    if (cfg.patience < 1) {
        throw ConfigError("patience must be >= 1");
    }
    if (cfg.max_interp_gap < 0) {
        throw ConfigError("max_interp_gap must be >= 0");
    }
}

InterpolationResult interpolate_gaps(std::span<const Observation> observations, std::int64_t max_interp_gap) {
    InterpolationResult result;
    if (observations.empty()) {
        return result;
    }
    auto start_run = [&](const Observation& o) {
        DenseRun run;
        run.extent = Interval{o.frame, o.frame + 1};
        run.boxes.push_back(o.box);
        run.scores.push_back(o.score);
        run.provenance.push_back(Provenance::detected);
        result.runs.push_back(std::move(run));
    };
    start_run(observations.front());
    for (std::size_t i = 1; i < observations.size(); ++i) {
        const Observation& prev = observations[i - 1];
        const Observation& next = observations[i];
        if (next.frame <= prev.frame) {
            throw InvalidInput("observations must have strictly increasing frames");
        }
        const std::int64_t hole = next.frame - prev.frame - 1;
        if (hole > max_interp_gap) {
            ++result.splits;
            start_run(next);
            continue;
        }
        DenseRun& run = result.runs.back();
        // Weighted form keeps exact values for tracks on a dyadic grid.
        const auto span = static_cast<double>(next.frame - prev.frame);
        for (std::int64_t f = prev.frame + 1; f < next.frame; ++f) {
            const auto wa = static_cast<double>(next.frame - f);
            const auto wb = static_cast<double>(f - prev.frame);
            auto lerp = [&](double a, double b) { return (a * wa + b * wb) / span; };
            run.boxes.push_back(Box{lerp(prev.box.x1, next.box.x1), lerp(prev.box.y1, next.box.y1),
                                    lerp(prev.box.x2, next.box.x2), lerp(prev.box.y2, next.box.y2)});
            run.scores.push_back(lerp(prev.score, next.score));
            run.provenance.push_back(Provenance::interpolated);
            ++result.interpolated_frames;
        }
        run.boxes.push_back(next.box);
        run.scores.push_back(next.score);
        run.provenance.push_back(Provenance::detected);
        run.extent.end = next.frame + 1;
    }
    return result;
}

Box predict_next(std::span<const Box> history) {
    if (history.empty()) {
        throw InvalidInput("predict_next needs a non-empty history");
    }
    const Box& last = history.back();
    if (history.size() == 1) {
        return last;
    }
    const Box& prev = history[history.size() - 2];
    const double dx = last.center_x() - prev.center_x();
    const double dy = last.center_y() - prev.center_y();
    return Box{last.x1 + dx, last.y1 + dy, last.x2 + dx, last.y2 + dy};
}

LinkResult greedy_link(std::span<const Detection> detections, const LinkConfig& cfg) {
    validate(cfg);
    struct Chain {
        ObjectClass cls;
        std::vector<Observation> obs;
        bool open = true;
    };
    std::vector<Chain> chains;
    const std::string video_id = detections.empty() ? std::string() : detections.front().video_id;

    for (const auto& fd : by_frame(detections)) {
        const std::int64_t t = fd.frame;
        struct Candidate {
            std::int64_t gap;
            double iou;
            std::size_t chain;
            std::size_t det;
        };
        std::vector<Candidate> candidates;
        for (std::size_t c = 0; c < chains.size(); ++c) {
            Chain& chain = chains[c];
            if (!chain.open) {
                continue;
            }
            const std::int64_t gap = t - chain.obs.back().frame - 1;
            if (gap > cfg.max_interp_gap) {
                chain.open = false;
                continue;
            }
            for (std::size_t j = 0; j < fd.items.size(); ++j) {
                const Detection& d = *fd.items[j];
                if (d.object_class != chain.cls) {
                    continue;
                }
                const double iou = spatial_iou(chain.obs.back().box, d.box);
                if (iou > cfg.iou_link_threshold) {
                    candidates.push_back(Candidate{gap, iou, c, j});
                }
            }
        }
        // Adjacent-frame links first, then descending IoU; chain and detection
        // order break the remaining ties.
        std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
            if (a.gap != b.gap) return a.gap < b.gap;
            if (a.iou != b.iou) return a.iou > b.iou;
            if (a.chain != b.chain) return a.chain < b.chain;
            return a.det < b.det;
        });
        std::vector<bool> chain_used(chains.size(), false);
        std::vector<bool> det_used(fd.items.size(), false);
        for (const auto& cand : candidates) {
            if (chain_used[cand.chain] || det_used[cand.det]) {
                continue;
            }
            chain_used[cand.chain] = true;
            det_used[cand.det] = true;
            const Detection& d = *fd.items[cand.det];
            chains[cand.chain].obs.push_back(Observation{t, d.box, d.score});
        }
        for (std::size_t j = 0; j < fd.items.size(); ++j) {
            if (!det_used[j]) {
                const Detection& d = *fd.items[j];
                chains.push_back(Chain{d.object_class, {Observation{t, d.box, d.score}}, true});
            }
        }
    }

    LinkResult result;
    for (const auto& chain : chains) {
        auto interp = interpolate_gaps(chain.obs, cfg.max_interp_gap);
        result.stats.interpolated_frames += interp.interpolated_frames;
        for (auto& run : interp.runs) {
            Tubelet tb;
            tb.video_id = video_id;
            tb.object_class = chain.cls;
            tb.extent = run.extent;
            tb.boxes = std::move(run.boxes);
            tb.scores = std::move(run.scores);
            tb.provenance = std::move(run.provenance);
            result.tubelets.push_back(std::move(tb));
        }
    }
    std::stable_sort(result.tubelets.begin(), result.tubelets.end(),
                     [](const Tubelet& a, const Tubelet& b) { return a.extent.start < b.extent.start; });
    for (std::size_t i = 0; i < result.tubelets.size(); ++i) {
        result.tubelets[i].id = static_cast<std::int64_t>(i);
    }
    return result;
}

LinkResult track_link(std::span<const Detection> detections, const Tracker& tracker, const LinkConfig& cfg) {
    validate(cfg);
    struct Track {
        ObjectClass cls;
        std::int64_t start;
        std::vector<Box> boxes;
        std::vector<double> scores;
        std::vector<Provenance> provenance;
        std::int64_t misses = 0;
        double last_score = 0.0;
    };
    const std::string video_id = detections.empty() ? std::string() : detections.front().video_id;
    const auto frames = by_frame(detections);

    LinkResult result;
    std::vector<Track> live;
    std::vector<Track> finished;

    auto finish = [&](Track& tr) {
        // Drop the unmatched tail so patience does not inflate the extent.
        const auto keep = tr.boxes.size() - static_cast<std::size_t>(tr.misses);
        tr.boxes.resize(keep);
        tr.scores.resize(keep);
        tr.provenance.resize(keep);
        tr.misses = 0;
        finished.push_back(std::move(tr));
    };

    std::size_t next_frame_idx = 0;
    const std::int64_t first = frames.empty() ? 0 : frames.front().frame;
    const std::int64_t last = frames.empty() ? -1 : frames.back().frame;
    for (std::int64_t t = first; t <= last; ++t) {
        static const std::vector<const Detection*> kNone;
        const std::vector<const Detection*>* dets = &kNone;
        if (next_frame_idx < frames.size() && frames[next_frame_idx].frame == t) {
            dets = &frames[next_frame_idx].items;
            ++next_frame_idx;
        }

        std::vector<Box> predicted;
        predicted.reserve(live.size());
        for (const auto& tr : live) {
            predicted.push_back(tracker.predict_next(tr.boxes));
        }
        struct Candidate {
            double iou;
            std::size_t track;
            std::size_t det;
        };
        std::vector<Candidate> candidates;
        for (std::size_t i = 0; i < live.size(); ++i) {
            for (std::size_t j = 0; j < dets->size(); ++j) {
                const Detection& d = *(*dets)[j];
                if (d.object_class != live[i].cls) {
                    continue;
                }
                const double iou = spatial_iou(predicted[i], d.box);
                if (iou >= cfg.iou_link_threshold) {
                    candidates.push_back(Candidate{iou, i, j});
                }
            }
        }
        std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
            if (a.iou != b.iou) return a.iou > b.iou;
            if (a.track != b.track) return a.track < b.track;
            return a.det < b.det;
        });
        std::vector<bool> track_used(live.size(), false);
        std::vector<bool> det_used(dets->size(), false);
        for (const auto& cand : candidates) {
            if (track_used[cand.track] || det_used[cand.det]) {
                continue;
            }
            track_used[cand.track] = true;
            det_used[cand.det] = true;
            const Detection& d = *(*dets)[cand.det];
            Track& tr = live[cand.track];
            tr.boxes.push_back(d.box);
            tr.scores.push_back(d.score);
            tr.provenance.push_back(Provenance::detected);
            tr.misses = 0;
            tr.last_score = d.score;
        }
        std::vector<Track> still_live;
        still_live.reserve(live.size());
        for (std::size_t i = 0; i < live.size(); ++i) {
            Track& tr = live[i];
            if (!track_used[i]) {
                tr.boxes.push_back(predicted[i]);
                tr.scores.push_back(tr.last_score);
                tr.provenance.push_back(Provenance::tracked);
                ++tr.misses;
                if (tr.misses >= cfg.patience) {
                    finish(tr);
                    continue;
                }
            }
            still_live.push_back(std::move(tr));
        }
        live = std::move(still_live);
        for (std::size_t j = 0; j < dets->size(); ++j) {
            if (!det_used[j]) {
                const Detection& d = *(*dets)[j];
                live.push_back(Track{d.object_class, t, {d.box}, {d.score}, {Provenance::detected}, 0, d.score});
            }
        }
    }
    for (auto& tr : live) {
        finish(tr);
    }

    for (auto& tr : finished) {
        Tubelet tb;
        tb.video_id = video_id;
        tb.object_class = tr.cls;
        tb.extent = Interval{tr.start, tr.start + static_cast<std::int64_t>(tr.boxes.size())};
        result.stats.tracked_frames += static_cast<std::size_t>(
            std::count(tr.provenance.begin(), tr.provenance.end(), Provenance::tracked));
        tb.boxes = std::move(tr.boxes);
        tb.scores = std::move(tr.scores);
        tb.provenance = std::move(tr.provenance);
        result.tubelets.push_back(std::move(tb));
    }
    // Finished order depends on termination time; canonicalize by start then first box.
    std::stable_sort(result.tubelets.begin(), result.tubelets.end(), [](const Tubelet& a, const Tubelet& b) {
        return std::tie(a.extent.start, a.boxes.front().x1, a.boxes.front().y1) <
               std::tie(b.extent.start, b.boxes.front().x1, b.boxes.front().y1);
    });
    for (std::size_t i = 0; i < result.tubelets.size(); ++i) {
        result.tubelets[i].id = static_cast<std::int64_t>(i);
    }
    return result;
}

std::vector<Tubelet> read_tubelets(const std::filesystem::path& path) {
    std::vector<Tubelet> out;
    jsonl::read(path, kTubeletsFormat, [&](std::size_t line, const nlohmann::json& j) {
        Tubelet t;
        t.id = jsonl::integer(j, "id", line);
        t.video_id = jsonl::string(j, "video_id", line);
        const auto cls = parse_object_class(jsonl::string(j, "class", line));
        if (!cls) {
            throw SchemaError("line " + std::to_string(line) + ": unknown object class");
        }
        t.object_class = *cls;
        t.extent = Interval{jsonl::integer(j, "start", line), jsonl::integer(j, "end", line)};
        if (t.extent.start >= t.extent.end) {
            throw ParseError(line, "empty extent");
        }
        std::int64_t expect = t.extent.start;
        for (const auto& jb : jsonl::array(j, "boxes", line)) {
            if (jsonl::integer(jb, "frame", line) != expect) {
                throw InvariantViolation("line " + std::to_string(line) + ": tubelet boxes not dense at frame " +
                                         std::to_string(expect));
            }
            ++expect;
            t.boxes.push_back(jsonl::box(jb, line));
            t.scores.push_back(jsonl::number(jb, "score", line));
            const auto prov = parse_provenance(jsonl::string(jb, "provenance", line));
            if (!prov) {
                throw ParseError(line, "unknown provenance");
            }
            t.provenance.push_back(*prov);
        }
        if (expect != t.extent.end) {
            throw InvariantViolation("line " + std::to_string(line) + ": tubelet boxes do not cover the extent");
        }
        out.push_back(std::move(t));
    });
    return out;
}

void write_tubelets(const std::vector<Tubelet>& tubelets, const std::filesystem::path& path) {
    std::vector<jsonl::Json> records;
    records.reserve(tubelets.size());
    for (const auto& t : tubelets) {
        validate(t);
        jsonl::Json j;
        j["id"] = t.id;
        j["video_id"] = t.video_id;
        j["class"] = std::string(to_string(t.object_class));
        j["start"] = t.extent.start;
        j["end"] = t.extent.end;
        auto boxes = jsonl::Json::array();
        for (std::size_t i = 0; i < t.boxes.size(); ++i) {
            jsonl::Json jb;
            jb["frame"] = t.extent.start + static_cast<std::int64_t>(i);
            jb["x1"] = t.boxes[i].x1;
            jb["y1"] = t.boxes[i].y1;
            jb["x2"] = t.boxes[i].x2;
            jb["y2"] = t.boxes[i].y2;
            jb["score"] = t.scores[i];
            jb["provenance"] = std::string(to_string(t.provenance[i]));
            boxes.push_back(std::move(jb));
        }
        j["boxes"] = std::move(boxes);
        records.push_back(std::move(j));
    }
    jsonl::write(path, kTubeletsFormat, records);
}

}  // namespace actdet
