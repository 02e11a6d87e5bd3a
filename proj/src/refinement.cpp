#include "actdet/refinement.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "actdet/errors.hpp"

namespace actdet {

namespace {

constexpr std::string_view kProposalsFormat = "actdet.proposals";
constexpr std::string_view kFlowFormat = "actdet.motion";

}  // namespace

void FrameMotionTable::set(const std::string& video_id, std::int64_t frame, double magnitude) {
    table_[{video_id, frame}] = magnitude;
}

double FrameMotionTable::magnitude(const std::string& video_id, std::int64_t frame, const Box&) const {
    auto it = table_.find({video_id, frame});
    return it == table_.end() ? 0.0 : it->second;
}

FrameMotionTable FrameMotionTable::read(const std::filesystem::path& path) {
    FrameMotionTable t;
    jsonl::read(path, kFlowFormat, [&](std::size_t line, const nlohmann::json& j) {
        const double m = jsonl::number(j, "magnitude", line);
        if (m < 0.0) {
            throw ParseError(line, "negative motion magnitude");
        }
        t.set(jsonl::string(j, "video_id", line), jsonl::integer(j, "frame", line), m);
    });
    return t;
}

void validate(const RefineConfig& cfg) {
    if (cfg.window_sizes.empty()) {
        throw ConfigError("window_sizes must not be empty");
    }
    if (!std::is_sorted(cfg.window_sizes.begin(), cfg.window_sizes.end()) || cfg.window_sizes.front() < 1) {
        throw ConfigError("window_sizes must be positive and ascending");
    }
    if (cfg.window_stride < 1) {
        throw ConfigError("window_stride must be >= 1");
    }
    if (cfg.sample_count < 1) {
        throw ConfigError("sample_count must be >= 1");
    }
    if (!(cfg.enlarge_factor >= 1.0)) {
        throw ConfigError("enlarge_factor must be >= 1");
    }
}

MotionStats motion_stats(const Tubelet& tubelet, const MotionSource* source) {
    MotionStats s;
    const auto n = tubelet.boxes.size();
    if (n >= 2) {
        double total = 0.0;
        for (std::size_t i = 1; i < n; ++i) {
            total += std::hypot(tubelet.boxes[i].center_x() - tubelet.boxes[i - 1].center_x(),
                                tubelet.boxes[i].center_y() - tubelet.boxes[i - 1].center_y());
        }
        s.coord_displacement = total / static_cast<double>(n - 1);
    }
    if (source != nullptr && n > 0) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double m = source->magnitude(tubelet.video_id, tubelet.extent.start + static_cast<std::int64_t>(i),
                                               tubelet.boxes[i]);
            s.flow_max = std::max(s.flow_max, m);
            total += m;
        }
        s.flow_mean = total / static_cast<double>(n);
    }
    return s;
}

bool has_motion(const MotionStats& stats, const RefineConfig& cfg, bool flow_available) {
    if (stats.coord_displacement >= cfg.displacement_threshold) {
        return true;
    }
    return flow_available && stats.flow_mean >= cfg.flow_threshold;
}

FilterResult filter_static(std::span<const Tubelet> tubelets, const RefineConfig& cfg, const MotionSource* source) {
    FilterResult out;
    for (const auto& t : tubelets) {
        if (has_motion(motion_stats(t, source), cfg, source != nullptr)) {
            out.kept.push_back(t);
        } else {
            ++out.removed;
        }
    }
    return out;
}

Tubelet normalize_boxes(const Tubelet& tubelet, const Box& frame_bounds, double enlarge_factor) {
    validate(tubelet);
    if (!(enlarge_factor >= 1.0)) {
        throw InvalidInput("enlarge factor must be >= 1");
    }
    double max_w = 0.0;
    double max_h = 0.0;
    for (const auto& b : tubelet.boxes) {
        max_w = std::max(max_w, b.width());
        max_h = std::max(max_h, b.height());
    }
    Tubelet out = tubelet;
    for (auto& b : out.boxes) {
        b = resize_within(b, max_w * enlarge_factor, max_h * enlarge_factor, frame_bounds);
    }
    return out;
}

std::vector<Interval> jitter_windows(std::int64_t length, const RefineConfig& cfg) {
    if (length < 1) {
        throw InvalidInput("cannot jitter an empty tubelet");
    }
    std::vector<Interval> out;
    std::set<Interval> seen;
    auto emit = [&](Interval iv) {
        if (seen.insert(iv).second) {
            out.push_back(iv);
        }
    };
    for (const std::int64_t w : cfg.window_sizes) {
        if (w >= length) {
            emit(Interval{0, length});
            continue;
        }
        std::int64_t s = 0;
        for (; s + w <= length; s += cfg.window_stride) {
            emit(Interval{s, s + w});
        }
        // Tail window so the union of windows reaches the tubelet end.
        emit(Interval{length - w, length});
    }
    return out;
}

std::vector<Interval> jitter(const Tubelet& tubelet, const RefineConfig& cfg) {
    auto windows = jitter_windows(tubelet.extent.length(), cfg);
    for (auto& w : windows) {
        w.start += tubelet.extent.start;
        w.end += tubelet.extent.start;
    }
    return windows;
}

std::vector<std::int64_t> sample_frames(std::int64_t length, std::int64_t count) {
    if (length < 1 || count < 1) {
        throw InvalidInput("sample_frames needs length >= 1 and count >= 1");
    }
    std::vector<std::int64_t> out;
    out.reserve(static_cast<std::size_t>(count));
    for (std::int64_t k = 0; k < count; ++k) {
        out.push_back(k * length / count);
    }
    return out;
}

std::vector<Proposal> make_proposals(const Tubelet& normalized, const RefineConfig& cfg) {
    std::vector<Proposal> out;
    for (const auto& w : jitter(normalized, cfg)) {
        Proposal p;
        p.tubelet_id = normalized.id;
        p.video_id = normalized.video_id;
        p.object_class = normalized.object_class;
        p.window = w;
        const auto offset = static_cast<std::size_t>(w.start - normalized.extent.start);
        p.boxes.assign(normalized.boxes.begin() + static_cast<std::ptrdiff_t>(offset),
                       normalized.boxes.begin() + static_cast<std::ptrdiff_t>(offset + w.length()));
        for (const auto k : sample_frames(w.length(), cfg.sample_count)) {
            p.sampled_frames.push_back(w.start + k);
        }
        out.push_back(std::move(p));
    }
    return out;
}

RefineResult refine_video(std::span<const Tubelet> tubelets, const VideoMeta& meta, const RefineConfig& cfg,
                          const MotionSource* source) {
    validate(cfg);
    RefineResult out;
    auto filtered = filter_static(tubelets, cfg, source);
    out.removed_static = filtered.removed;
    for (const auto& t : filtered.kept) {
        auto props = make_proposals(normalize_boxes(t, meta.frame_bounds, cfg.enlarge_factor), cfg);
        out.proposals.insert(out.proposals.end(), std::make_move_iterator(props.begin()),
                             std::make_move_iterator(props.end()));
    }
    return out;
}

std::vector<Proposal> read_proposals(const std::filesystem::path& path) {
    std::vector<Proposal> out;
    jsonl::read(path, kProposalsFormat, [&](std::size_t line, const nlohmann::json& j) {
        Proposal p;
        p.id = jsonl::integer(j, "id", line);
        p.tubelet_id = jsonl::integer(j, "tubelet_id", line);
        p.video_id = jsonl::string(j, "video_id", line);
        const auto cls = parse_object_class(jsonl::string(j, "class", line));
        if (!cls) {
            throw SchemaError("line " + std::to_string(line) + ": unknown object class");
        }
        p.object_class = *cls;
        p.window = Interval{jsonl::integer(j, "start", line), jsonl::integer(j, "end", line)};
        if (p.window.start >= p.window.end) {
            throw ParseError(line, "empty window");
        }
        for (const auto& f : jsonl::array(j, "sampled_frames", line)) {
            if (!f.is_number_integer() || !p.window.contains(f.get<std::int64_t>())) {
                throw ParseError(line, "sampled frame outside the window");
            }
            p.sampled_frames.push_back(f.get<std::int64_t>());
        }
        std::int64_t expect = p.window.start;
        for (const auto& jb : jsonl::array(j, "boxes", line)) {
            if (jsonl::integer(jb, "frame", line) != expect++) {
                throw InvariantViolation("line " + std::to_string(line) + ": proposal boxes not dense");
            }
            p.boxes.push_back(jsonl::box(jb, line));
        }
        if (expect != p.window.end) {
            throw InvariantViolation("line " + std::to_string(line) + ": proposal boxes do not cover the window");
        }
        if (auto it = j.find("scores"); it != j.end() && !it->is_null()) {
            if (!it->is_object()) {
                throw ParseError(line, "scores must be an object");
            }
            ScoreMap sm;
            for (const auto& [key, value] : it->items()) {
                if (!value.is_number()) {
                    throw ParseError(line, "non-numeric score for '" + key + "'");
                }
                const double v = value.get<double>();
                if (!(v >= 0.0 && v <= 1.0)) {
                    throw ParseError(line, "score for '" + key + "' outside [0, 1]");
                }
                if (key == "non_action") {
                    sm.non_action = v;
                } else if (const auto act = parse_activity(key)) {
                    sm.activities[*act] = v;
                } else {
                    throw SchemaError("line " + std::to_string(line) + ": unknown activity '" + key + "'");
                }
            }
            p.scores = std::move(sm);
        }
        out.push_back(std::move(p));
    });
    return out;
}

void write_proposals(const std::vector<Proposal>& proposals, const std::filesystem::path& path) {
    std::vector<jsonl::Json> records;
    records.reserve(proposals.size());
    for (const auto& p : proposals) {
        jsonl::Json j;
        j["id"] = p.id;
        j["tubelet_id"] = p.tubelet_id;
        j["video_id"] = p.video_id;
        j["class"] = std::string(to_string(p.object_class));
        j["start"] = p.window.start;
        j["end"] = p.window.end;
        j["sampled_frames"] = p.sampled_frames;
        auto boxes = jsonl::Json::array();
        for (std::size_t i = 0; i < p.boxes.size(); ++i) {
            jsonl::Json jb;
            jb["frame"] = p.window.start + static_cast<std::int64_t>(i);
            jb["x1"] = p.boxes[i].x1;
            jb["y1"] = p.boxes[i].y1;
            jb["x2"] = p.boxes[i].x2;
            jb["y2"] = p.boxes[i].y2;
            boxes.push_back(std::move(jb));
        }
        j["boxes"] = std::move(boxes);
        if (p.scores) {
            jsonl::Json s;
            for (const auto& [act, v] : p.scores->activities) {
                s[std::string(to_string(act))] = v;
            }
            s["non_action"] = p.scores->non_action;
            j["scores"] = std::move(s);
        }
        records.push_back(std::move(j));
    }
    jsonl::write(path, kProposalsFormat, records);
}

}  // namespace actdet
