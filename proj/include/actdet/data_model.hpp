#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "actdet/geometry.hpp"

namespace actdet {

enum class ObjectClass { person, car, truck, bicycle };

/// The 18 activity categories, vehicle-related first.
enum class Activity {
    Closing,
    Opening,
    Closing_Trunk,
    Open_Trunk,
    vehicle_turning_left,
    vehicle_turning_right,
    vehicle_u_turn,
    Entering,
    Exiting,
    specialized_talking_phone,
    specialized_texting_phone,
    Transport_HeavyCarry,
    activity_carrying,
    Pull,
    Riding,
    Talking,
    Loading,
    Unloading,
};

inline constexpr std::size_t kActivityCount = 18;
inline constexpr std::array<ObjectClass, 4> kObjectClasses{ObjectClass::person, ObjectClass::car, ObjectClass::truck,
                                                            ObjectClass::bicycle};

const std::array<Activity, kActivityCount>& all_activities();

std::string_view to_string(ObjectClass c);
std::string_view to_string(Activity a);
std::optional<ObjectClass> parse_object_class(std::string_view s);
std::optional<Activity> parse_activity(std::string_view s);

struct Detection {
    std::string video_id;
    std::int64_t frame = 0;
    Box box;
    ObjectClass object_class = ObjectClass::person;
    double score = 0.0;

    friend bool operator==(const Detection&, const Detection&) = default;
};

/// Ground truth or system output. boxes[i] is the box at frame extent.start + i.
struct ActivityInstance {
    std::string video_id;
    Activity activity = Activity::Closing;
    Interval extent;
    std::vector<Box> boxes;
    double confidence = 1.0;

    BoxTrack track() const { return BoxTrack{extent, boxes}; }

    friend bool operator==(const ActivityInstance&, const ActivityInstance&) = default;
};

struct VideoMeta {
    std::string video_id;
    std::int64_t frame_count = 1;
    double frame_rate = 30.0;
    Box frame_bounds;

    double minutes() const { return static_cast<double>(frame_count) / frame_rate / 60.0; }

    friend bool operator==(const VideoMeta&, const VideoMeta&) = default;
};

struct DetectionSet {
    /// Sorted by (video_id, frame), file order within a frame.
    std::vector<Detection> detections;
    /// Records whose class is outside {person, car, truck, bicycle}.
    std::size_t dropped = 0;
};

/// Throws InvariantViolation when boxes are not dense over the extent or the
/// confidence leaves [0, 1].
void validate(const ActivityInstance& inst);

DetectionSet read_detections(const std::filesystem::path& path);
std::vector<ActivityInstance> read_ground_truth(const std::filesystem::path& path);
/// System-output files share the ground-truth schema.
inline std::vector<ActivityInstance> read_instances(const std::filesystem::path& path) {
    return read_ground_truth(path);
}
std::vector<VideoMeta> read_video_meta(const std::filesystem::path& path);

void write_detections(const std::vector<Detection>& detections, const std::filesystem::path& path);
void write_instances(const std::vector<ActivityInstance>& instances, const std::filesystem::path& path);
void write_video_meta(const std::vector<VideoMeta>& metas, const std::filesystem::path& path);

/// Throws ConsistencyError when a record names a video absent from `metas`
/// or a frame outside that video.
void check_consistency(const std::vector<Detection>& detections, const std::vector<VideoMeta>& metas);
void check_consistency(const std::vector<ActivityInstance>& instances, const std::vector<VideoMeta>& metas);

std::map<std::string, std::vector<Detection>> group_by_video(const std::vector<Detection>& detections);
const VideoMeta& find_meta(const std::vector<VideoMeta>& metas, const std::string& video_id);

namespace jsonl {

using Json = nlohmann::ordered_json;

/// Header record written as the first line of every file.
Json header(std::string_view format);

/// Calls `fn(line_number, record)` for every non-blank line after the optional
/// header. Throws ParseError on malformed JSON or a header naming another format.
void read(const std::filesystem::path& path, std::string_view format,
          const std::function<void(std::size_t, const nlohmann::json&)>& fn);

/// Writes the header followed by one compact record per line.
void write(const std::filesystem::path& path, std::string_view format, const std::vector<Json>& records);

/// Typed field access; failures become ParseError on `line`.
double number(const nlohmann::json& j, const char* key, std::size_t line);
std::int64_t integer(const nlohmann::json& j, const char* key, std::size_t line);
std::string string(const nlohmann::json& j, const char* key, std::size_t line);
const nlohmann::json& array(const nlohmann::json& j, const char* key, std::size_t line);
Box box(const nlohmann::json& j, std::size_t line);

}  // namespace jsonl

}  // namespace actdet
