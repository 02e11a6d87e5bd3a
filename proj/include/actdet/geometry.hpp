#pragma once

#include <cstdint>
#include <span>

namespace actdet {

/// Axis-aligned box in pixel coordinates, x1 <= x2 and y1 <= y2.
struct Box {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    double width() const noexcept { return x2 - x1; }
    double height() const noexcept { return y2 - y1; }
    double area() const noexcept { return width() * height(); }
    double center_x() const noexcept { return 0.5 * (x1 + x2); }
    double center_y() const noexcept { return 0.5 * (y1 + y2); }

    friend bool operator==(const Box&, const Box&) = default;
};

/// Half-open frame interval [start, end) with start < end.
struct Interval {
    std::int64_t start = 0;
    std::int64_t end = 1;

    std::int64_t length() const noexcept { return end - start; }
    bool contains(std::int64_t frame) const noexcept { return frame >= start && frame < end; }

    friend bool operator==(const Interval&, const Interval&) = default;
    friend auto operator<=>(const Interval&, const Interval&) = default;
};

/// Throws InvalidInput unless the box has finite, ordered coordinates.
void validate(const Box& b);
/// Throws InvalidInput unless start < end.
void validate(const Interval& iv);

Box make_box(double x1, double y1, double x2, double y2);
Interval make_interval(std::int64_t start, std::int64_t end);

/// Intersection over union; 0 when both boxes are degenerate.
double spatial_iou(const Box& a, const Box& b);
double temporal_iou(const Interval& a, const Interval& b);
/// Length of the overlap of two intervals, 0 when disjoint.
std::int64_t overlap_length(const Interval& a, const Interval& b);

/// Scales width and height by `factor` about the center, then clips to `frame_bounds`.
Box enlarge(const Box& b, double factor, const Box& frame_bounds);

/// Box of the given size centered on `center_of`, translated (not clipped) to lie
/// inside `frame_bounds`. Sizes larger than the frame are capped to the frame.
Box resize_within(const Box& center_of, double width, double height, const Box& frame_bounds);

Box clip(const Box& b, const Box& frame_bounds);

/// A dense run of boxes: boxes[i] belongs to frame extent.start + i.
struct BoxTrack {
    Interval extent;
    std::span<const Box> boxes;
};

}  // namespace actdet
