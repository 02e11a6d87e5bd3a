#include "actdet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "actdet/errors.hpp"

namespace actdet {

void validate(const Box& b) {
    if (!std::isfinite(b.x1) || !std::isfinite(b.y1) || !std::isfinite(b.x2) || !std::isfinite(b.y2)) {
        throw InvalidInput("box has non-finite coordinates");
    }
    if (b.x1 > b.x2 || b.y1 > b.y2) {
        throw InvalidInput("box corners out of order");
    }
}

void validate(const Interval& iv) {
    if (iv.start >= iv.end) {
        throw InvalidInput("interval [" + std::to_string(iv.start) + ", " + std::to_string(iv.end) +
                           ") is empty");
    }
}

Box make_box(double x1, double y1, double x2, double y2) {
    Box b{x1, y1, x2, y2};
    validate(b);
    return b;
}

Interval make_interval(std::int64_t start, std::int64_t end) {
    Interval iv{start, end};
    validate(iv);
    return iv;
}

double spatial_iou(const Box& a, const Box& b) {
    validate(a);
    validate(b);
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    const double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) {
        return 0.0;
    }
    return std::clamp(inter / uni, 0.0, 1.0);
}

std::int64_t overlap_length(const Interval& a, const Interval& b) {
    return std::max<std::int64_t>(0, std::min(a.end, b.end) - std::max(a.start, b.start));
}

double temporal_iou(const Interval& a, const Interval& b) {
    validate(a);
    validate(b);
    const std::int64_t inter = overlap_length(a, b);
    const std::int64_t uni = a.length() + b.length() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

Box clip(const Box& b, const Box& frame_bounds) {
    Box out{std::clamp(b.x1, frame_bounds.x1, frame_bounds.x2), std::clamp(b.y1, frame_bounds.y1, frame_bounds.y2),
            std::clamp(b.x2, frame_bounds.x1, frame_bounds.x2), std::clamp(b.y2, frame_bounds.y1, frame_bounds.y2)};
    return out;
}

Box enlarge(const Box& b, double factor, const Box& frame_bounds) {
    validate(b);
    validate(frame_bounds);
    if (!std::isfinite(factor) || factor < 1.0) {
        throw InvalidInput("enlarge factor must be >= 1");
    }
    const double hw = 0.5 * b.width() * factor;
    const double hh = 0.5 * b.height() * factor;
    const double cx = b.center_x();
    const double cy = b.center_y();
    return clip(Box{cx - hw, cy - hh, cx + hw, cy + hh}, frame_bounds);
}

namespace {

// Places [lo, lo + size) inside [min, max) by translation.
double fit_start(double lo, double size, double min, double max) {
    if (lo < min) {
        return min;
    }
    if (lo + size > max) {
        return max - size;
    }
    return lo;
}

}  // namespace

Box resize_within(const Box& center_of, double width, double height, const Box& frame_bounds) {
    validate(center_of);
    validate(frame_bounds);
    width = std::min(width, frame_bounds.width());
    height = std::min(height, frame_bounds.height());
    const double x1 = fit_start(center_of.center_x() - 0.5 * width, width, frame_bounds.x1, frame_bounds.x2);
    const double y1 = fit_start(center_of.center_y() - 0.5 * height, height, frame_bounds.y1, frame_bounds.y2);
    return Box{x1, y1, x1 + width, y1 + height};
}

}  // namespace actdet
