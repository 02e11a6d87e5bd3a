#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "actdet/data_model.hpp"
#include "actdet/linking.hpp"

namespace actdet {

struct MotionStats {
    double flow_max = 0.0;
    double flow_mean = 0.0;
    /// Mean per-frame displacement of the box center, in pixels.
    double coord_displacement = 0.0;
};

/// Precomputed per-frame motion magnitude (for example optical-flow norm inside a box).
class MotionSource {
public:
    virtual ~MotionSource() = default;
    virtual double magnitude(const std::string& video_id, std::int64_t frame, const Box& box) const = 0;
};

/// Motion magnitudes keyed by (video, frame); missing entries read as 0.
class FrameMotionTable final : public MotionSource {
public:
    void set(const std::string& video_id, std::int64_t frame, double magnitude);
    double magnitude(const std::string& video_id, std::int64_t frame, const Box& box) const override;

    /// Records {video_id, frame, magnitude}, one per line.
    static FrameMotionTable read(const std::filesystem::path& path);

private:
    std::map<std::pair<std::string, std::int64_t>, double> table_;
};

struct RefineConfig {
    double displacement_threshold = 0.5;
    /// Only consulted when a motion source is supplied.
    double flow_threshold = 0.5;
    double enlarge_factor = 1.2;
    std::vector<std::int64_t> window_sizes{32, 64, 128, 256};
    std::int64_t window_stride = 16;
    std::int64_t sample_count = 64;
};

void validate(const RefineConfig& cfg);

struct ScoreMap {
    std::map<Activity, double> activities;
    double non_action = 0.0;

    friend bool operator==(const ScoreMap&, const ScoreMap&) = default;
};

/// Temporal window cut from a normalized tubelet.
struct Proposal {
    std::int64_t id = 0;
    std::int64_t tubelet_id = 0;
    std::string video_id;
    ObjectClass object_class = ObjectClass::person;
    Interval window;
    /// boxes[i] belongs to frame window.start + i.
    std::vector<Box> boxes;
    /// Absolute frame indices, all inside window.
    std::vector<std::int64_t> sampled_frames;
    std::optional<ScoreMap> scores;

    BoxTrack track() const { return BoxTrack{window, boxes}; }

    friend bool operator==(const Proposal&, const Proposal&) = default;
};

MotionStats motion_stats(const Tubelet& tubelet, const MotionSource* source = nullptr);

/// Keeps a tubelet when its center displacement reaches the threshold, or, with a
/// motion source, when its mean flow magnitude does.
bool has_motion(const MotionStats& stats, const RefineConfig& cfg, bool flow_available);

struct FilterResult {
    std::vector<Tubelet> kept;
    std::size_t removed = 0;
};

FilterResult filter_static(std::span<const Tubelet> tubelets, const RefineConfig& cfg,
                           const MotionSource* source = nullptr);

/// Resizes every box about its center to the tubelet's largest width and height
/// times `enlarge_factor`. Boxes that would leave the frame are shifted back
/// inside, so all boxes keep one size (capped at the frame size).
Tubelet normalize_boxes(const Tubelet& tubelet, const Box& frame_bounds, double enlarge_factor);

/// Windows relative to a tubelet of `length` frames, in order of window size
/// then start, without duplicates.
std::vector<Interval> jitter_windows(std::int64_t length, const RefineConfig& cfg);
/// Absolute windows for a tubelet.
std::vector<Interval> jitter(const Tubelet& tubelet, const RefineConfig& cfg);

/// Index k maps to floor(k * length / count).
std::vector<std::int64_t> sample_frames(std::int64_t length, std::int64_t count);

/// Cuts jittered, sampled proposals out of an already normalized tubelet.
std::vector<Proposal> make_proposals(const Tubelet& normalized, const RefineConfig& cfg);

struct RefineResult {
    std::vector<Proposal> proposals;
    std::size_t removed_static = 0;
};

/// filter_static, normalize_boxes and jitter over the tubelets of one video.
/// Proposal ids are left at zero for the caller to assign.
RefineResult refine_video(std::span<const Tubelet> tubelets, const VideoMeta& meta, const RefineConfig& cfg,
                          const MotionSource* source = nullptr);

std::vector<Proposal> read_proposals(const std::filesystem::path& path);
void write_proposals(const std::vector<Proposal>& proposals, const std::filesystem::path& path);

}  // namespace actdet
