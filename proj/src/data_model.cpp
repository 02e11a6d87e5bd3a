#include "actdet/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "actdet/errors.hpp"

namespace actdet {

namespace {

constexpr std::array<std::string_view, kActivityCount> kActivityNames{
    "Closing",
    "Opening",
    "Closing_Trunk",
    "Open_Trunk",
    "vehicle_turning_left",
    "vehicle_turning_right",
    "vehicle_u_turn",
    "Entering",
    "Exiting",
    "specialized_talking_phone",
    "specialized_texting_phone",
    "Transport_HeavyCarry",
    "activity_carrying",
    "Pull",
    "Riding",
    "Talking",
    "Loading",
    "Unloading",
};

constexpr std::array<std::string_view, 4> kClassNames{"person", "car", "truck", "bicycle"};

constexpr std::string_view kDetectionsFormat = "actdet.detections";
constexpr std::string_view kInstancesFormat = "actdet.instances";
constexpr std::string_view kMetaFormat = "actdet.video_meta";

}  // namespace

const std::array<Activity, kActivityCount>& all_activities() {
    static const std::array<Activity, kActivityCount> all = [] {
        std::array<Activity, kActivityCount> a{};
        for (std::size_t i = 0; i < kActivityCount; ++i) {
            a[i] = static_cast<Activity>(i);
        }
        return a;
    }();
    return all;
}

std::string_view to_string(ObjectClass c) { return kClassNames[static_cast<std::size_t>(c)]; }

std::string_view to_string(Activity a) { return kActivityNames[static_cast<std::size_t>(a)]; }

std::optional<ObjectClass> parse_object_class(std::string_view s) {
    for (std::size_t i = 0; i < kClassNames.size(); ++i) {
        if (kClassNames[i] == s) {
            return static_cast<ObjectClass>(i);
        }
    }
    return std::nullopt;
}

std::optional<Activity> parse_activity(std::string_view s) {
    for (std::size_t i = 0; i < kActivityNames.size(); ++i) {
        if (kActivityNames[i] == s) {
            return static_cast<Activity>(i);
        }
    }
    return std::nullopt;
}

void validate(const ActivityInstance& inst) {
    validate(inst.extent);
    if (static_cast<std::int64_t>(inst.boxes.size()) != inst.extent.length()) {
        throw InvariantViolation("instance in video '" + inst.video_id + "' has " +
                                 std::to_string(inst.boxes.size()) + " boxes for an extent of " +
                                 std::to_string(inst.extent.length()) + " frames");
    }
    if (!(inst.confidence >= 0.0 && inst.confidence <= 1.0)) {
        throw InvariantViolation("instance confidence outside [0, 1]");
    }
    for (const auto& b : inst.boxes) {
        validate(b);
    }
}

namespace jsonl {

Json header(std::string_view format) {
    Json h;
    h["format"] = std::string(format);
    h["version"] = 1;
    return h;
}

void read(const std::filesystem::path& path, std::string_view format,
          const std::function<void(std::size_t, const nlohmann::json&)>& fn) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "' for reading");
    }
    std::string line;
    std::size_t line_no = 0;
    bool first_record = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
        }
        if (!j.is_object()) {
            throw ParseError(line_no, "record is not an object");
        }
        if (first_record) {
            first_record = false;
            if (j.contains("format")) {
                if (!j["format"].is_string() || j["format"].get<std::string>() != format) {
                    throw ParseError(line_no, "expected a '" + std::string(format) + "' file");
                }
                continue;
            }
        }
        fn(line_no, j);
    }
}

void write(const std::filesystem::path& path, std::string_view format, const std::vector<Json>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out << header(format).dump() << '\n';
    for (const auto& r : records) {
        out << r.dump() << '\n';
    }
    if (!out) {
        throw IoError("write to '" + path.string() + "' failed");
    }
}

double number(const nlohmann::json& j, const char* key, std::size_t line) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_number()) {
        throw ParseError(line, std::string("missing or non-numeric field '") + key + "'");
    }
    const double v = it->get<double>();
    if (!std::isfinite(v)) {
        throw ParseError(line, std::string("non-finite field '") + key + "'");
    }
    return v;
}

std::int64_t integer(const nlohmann::json& j, const char* key, std::size_t line) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_number_integer()) {
        throw ParseError(line, std::string("missing or non-integer field '") + key + "'");
    }
    return it->get<std::int64_t>();
}

std::string string(const nlohmann::json& j, const char* key, std::size_t line) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
        throw ParseError(line, std::string("missing or non-string field '") + key + "'");
    }
    return it->get<std::string>();
}

const nlohmann::json& array(const nlohmann::json& j, const char* key, std::size_t line) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_array()) {
        throw ParseError(line, std::string("missing or non-array field '") + key + "'");
    }
    return *it;
}

Box box(const nlohmann::json& j, std::size_t line) {
    Box b{number(j, "x1", line), number(j, "y1", line), number(j, "x2", line), number(j, "y2", line)};
    if (b.x1 > b.x2 || b.y1 > b.y2) {
        throw ParseError(line, "box corners out of order");
    }
    return b;
}

}  // namespace jsonl

DetectionSet read_detections(const std::filesystem::path& path) {
    DetectionSet out;
    jsonl::read(path, kDetectionsFormat, [&](std::size_t line, const nlohmann::json& j) {
        Detection d;
        d.video_id = jsonl::string(j, "video_id", line);
        d.frame = jsonl::integer(j, "frame", line);
        if (d.frame < 0) {
            throw ParseError(line, "negative frame index");
        }
        d.box = jsonl::box(j, line);
        d.score = jsonl::number(j, "score", line);
        if (d.score < 0.0 || d.score > 1.0) {
            throw ParseError(line, "score outside [0, 1]");
        }
        const auto cls = parse_object_class(jsonl::string(j, "class", line));
        if (!cls) {
            ++out.dropped;
            return;
        }
        d.object_class = *cls;
        out.detections.push_back(std::move(d));
    });
    std::stable_sort(out.detections.begin(), out.detections.end(), [](const Detection& a, const Detection& b) {
        return std::tie(a.video_id, a.frame) < std::tie(b.video_id, b.frame);
    });
    return out;
}

std::vector<ActivityInstance> read_ground_truth(const std::filesystem::path& path) {
    std::vector<ActivityInstance> out;
    jsonl::read(path, kInstancesFormat, [&](std::size_t line, const nlohmann::json& j) {
        ActivityInstance inst;
        inst.video_id = jsonl::string(j, "video_id", line);
        const std::string label = jsonl::string(j, "activity", line);
        const auto act = parse_activity(label);
        if (!act) {
            throw SchemaError("line " + std::to_string(line) + ": unknown activity '" + label + "'");
        }
        inst.activity = *act;
        inst.extent = Interval{jsonl::integer(j, "start", line), jsonl::integer(j, "end", line)};
        if (inst.extent.start >= inst.extent.end) {
            throw ParseError(line, "empty extent");
        }
        inst.confidence = jsonl::number(j, "confidence", line);
        std::map<std::int64_t, Box> by_frame;
        for (const auto& jb : jsonl::array(j, "boxes", line)) {
            const std::int64_t f = jsonl::integer(jb, "frame", line);
            if (!inst.extent.contains(f)) {
                throw InvariantViolation("line " + std::to_string(line) + ": box at frame " + std::to_string(f) +
                                         " outside the instance extent");
            }
            if (!by_frame.emplace(f, jsonl::box(jb, line)).second) {
                throw InvariantViolation("line " + std::to_string(line) + ": duplicate box for frame " +
                                         std::to_string(f));
            }
        }
        for (std::int64_t f = inst.extent.start; f < inst.extent.end; ++f) {
            auto it = by_frame.find(f);
            if (it == by_frame.end()) {
                throw InvariantViolation("line " + std::to_string(line) + ": no box for frame " +
                                         std::to_string(f) + " inside the instance extent");
            }
            inst.boxes.push_back(it->second);
        }
        try {
            validate(inst);
        } catch (const InvariantViolation& e) {
            throw InvariantViolation("line " + std::to_string(line) + ": " + e.what());
        }
        out.push_back(std::move(inst));
    });
    return out;
}

std::vector<VideoMeta> read_video_meta(const std::filesystem::path& path) {
    std::vector<VideoMeta> out;
    std::set<std::string> seen;
    jsonl::read(path, kMetaFormat, [&](std::size_t line, const nlohmann::json& j) {
        VideoMeta m;
        m.video_id = jsonl::string(j, "video_id", line);
        m.frame_count = jsonl::integer(j, "frame_count", line);
        m.frame_rate = jsonl::number(j, "frame_rate", line);
        const double w = jsonl::number(j, "width", line);
        const double h = jsonl::number(j, "height", line);
        if (m.frame_count <= 0 || m.frame_rate <= 0.0 || w <= 0.0 || h <= 0.0) {
            throw ParseError(line, "frame_count, frame_rate, width and height must be positive");
        }
        if (!seen.insert(m.video_id).second) {
            throw ParseError(line, "duplicate video_id '" + m.video_id + "'");
        }
        m.frame_bounds = Box{0.0, 0.0, w, h};
        out.push_back(std::move(m));
    });
    return out;
}

namespace {

jsonl::Json box_fields(jsonl::Json j, const Box& b) {
    j["x1"] = b.x1;
    j["y1"] = b.y1;
    j["x2"] = b.x2;
    j["y2"] = b.y2;
    return j;
}

}  // namespace

void write_detections(const std::vector<Detection>& detections, const std::filesystem::path& path) {
    std::vector<jsonl::Json> records;
    records.reserve(detections.size());
    for (const auto& d : detections) {
        jsonl::Json j;
        j["video_id"] = d.video_id;
        j["frame"] = d.frame;
        j = box_fields(std::move(j), d.box);
        j["class"] = std::string(to_string(d.object_class));
        j["score"] = d.score;
        records.push_back(std::move(j));
    }
    jsonl::write(path, kDetectionsFormat, records);
}

void write_instances(const std::vector<ActivityInstance>& instances, const std::filesystem::path& path) {
    std::vector<jsonl::Json> records;
    records.reserve(instances.size());
    for (const auto& inst : instances) {
        validate(inst);
        jsonl::Json j;
        j["video_id"] = inst.video_id;
        j["activity"] = std::string(to_string(inst.activity));
        j["start"] = inst.extent.start;
        j["end"] = inst.extent.end;
        j["confidence"] = inst.confidence;
        auto boxes = jsonl::Json::array();
        for (std::size_t i = 0; i < inst.boxes.size(); ++i) {
            jsonl::Json jb;
            jb["frame"] = inst.extent.start + static_cast<std::int64_t>(i);
            boxes.push_back(box_fields(std::move(jb), inst.boxes[i]));
        }
        j["boxes"] = std::move(boxes);
        records.push_back(std::move(j));
    }
    jsonl::write(path, kInstancesFormat, records);
}

void write_video_meta(const std::vector<VideoMeta>& metas, const std::filesystem::path& path) {
    std::vector<jsonl::Json> records;
    for (const auto& m : metas) {
        jsonl::Json j;
        j["video_id"] = m.video_id;
        j["frame_count"] = m.frame_count;
        j["frame_rate"] = m.frame_rate;
        j["width"] = m.frame_bounds.width();
        j["height"] = m.frame_bounds.height();
        records.push_back(std::move(j));
    }
    jsonl::write(path, kMetaFormat, records);
}

const VideoMeta& find_meta(const std::vector<VideoMeta>& metas, const std::string& video_id) {
    for (const auto& m : metas) {
        if (m.video_id == video_id) {
            return m;
        }
    }
    throw ConsistencyError("unknown video_id '" + video_id + "'");
}

void check_consistency(const std::vector<Detection>& detections, const std::vector<VideoMeta>& metas) {
    for (const auto& d : detections) {
        const auto& m = find_meta(metas, d.video_id);
        if (d.frame >= m.frame_count) {
            throw ConsistencyError("detection at frame " + std::to_string(d.frame) + " beyond the " +
                                   std::to_string(m.frame_count) + " frames of '" + d.video_id + "'");
        }
    }
}

void check_consistency(const std::vector<ActivityInstance>& instances, const std::vector<VideoMeta>& metas) {
    for (const auto& inst : instances) {
        const auto& m = find_meta(metas, inst.video_id);
        if (inst.extent.end > m.frame_count) {
            throw ConsistencyError("instance extent ends past the " + std::to_string(m.frame_count) +
                                   " frames of '" + inst.video_id + "'");
        }
    }
}

std::map<std::string, std::vector<Detection>> group_by_video(const std::vector<Detection>& detections) {
    std::map<std::string, std::vector<Detection>> out;
    for (const auto& d : detections) {
        out[d.video_id].push_back(d);
    }
    for (auto& [vid, dets] : out) {
        std::stable_sort(dets.begin(), dets.end(),
                         [](const Detection& a, const Detection& b) { return a.frame < b.frame; });
    }
    return out;
}

}  // namespace actdet
