#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "actdet/data_model.hpp"
#include "actdet/geometry.hpp"

namespace actdet {

enum class Provenance { detected, interpolated, tracked };

std::string_view to_string(Provenance p);

/// Linked object track. boxes, scores and provenance are dense over extent.
struct Tubelet {
    std::int64_t id = 0;
    std::string video_id;
    ObjectClass object_class = ObjectClass::person;
    Interval extent;
    std::vector<Box> boxes;
    std::vector<double> scores;
    std::vector<Provenance> provenance;

    BoxTrack track() const { return BoxTrack{extent, boxes}; }
    const Box& box_at(std::int64_t frame) const { return boxes[static_cast<std::size_t>(frame - extent.start)]; }

    friend bool operator==(const Tubelet&, const Tubelet&) = default;
};

void validate(const Tubelet& t);

struct LinkConfig {
    double iou_link_threshold = 0.5;
    /// Consecutive unmatched frames after which a track terminates.
    std::int64_t patience = 50;
    /// Longest run of missing frames the greedy linker bridges by interpolation.
    std::int64_t max_interp_gap = 8;
};

void validate(const LinkConfig& cfg);

struct Observation {
    std::int64_t frame = 0;
    Box box;
    double score = 0.0;
};

/// A dense piece of an interpolated sequence.
struct DenseRun {
    Interval extent;
    std::vector<Box> boxes;
    std::vector<double> scores;
    std::vector<Provenance> provenance;
};

struct InterpolationResult {
    std::vector<DenseRun> runs;
    /// Holes longer than max_interp_gap; each one starts a new run.
    std::size_t splits = 0;
    std::size_t interpolated_frames = 0;
};

/// Fills holes in a frame-sorted observation sequence by linear interpolation of
/// box coordinates and scores. Observations must have strictly increasing frames.
InterpolationResult interpolate_gaps(std::span<const Observation> observations, std::int64_t max_interp_gap);

/// Single-object motion model used by track_link.
class Tracker {
public:
    virtual ~Tracker() = default;
    /// Box expected in the frame after the last entry of `history`.
    virtual Box predict_next(std::span<const Box> history) const = 0;
};

/// Constant-velocity extrapolation of the box center from the last two boxes;
/// width and height of the last box are carried forward.
Box predict_next(std::span<const Box> history);

class ConstantVelocityTracker final : public Tracker {
public:
    Box predict_next(std::span<const Box> history) const override { return actdet::predict_next(history); }
};

struct LinkStats {
    std::size_t interpolated_frames = 0;
    std::size_t tracked_frames = 0;
};

struct LinkResult {
    std::vector<Tubelet> tubelets;
    LinkStats stats;
};

/// Greedy frame-to-frame association over the detections of one video.
/// Tubelet ids are local to the call and follow (start frame, creation order).
LinkResult greedy_link(std::span<const Detection> detections, const LinkConfig& cfg);

/// Tracking-based association over the detections of one video.
LinkResult track_link(std::span<const Detection> detections, const Tracker& tracker, const LinkConfig& cfg);

std::vector<Tubelet> read_tubelets(const std::filesystem::path& path);
void write_tubelets(const std::vector<Tubelet>& tubelets, const std::filesystem::path& path);

}  // namespace actdet
