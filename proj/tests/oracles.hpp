#pragma once

// Brute-force reference implementations shared by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "actdet/data_model.hpp"
#include "actdet/geometry.hpp"
#include "actdet/postprocess.hpp"
#include "actdet/synthgen.hpp"

namespace oracle {

using actdet::ActivityInstance;
using actdet::Box;
using actdet::Candidate;
using actdet::Interval;

// Area of the union and intersection by summing the elementary cells of the
// grid spanned by every box edge.
inline double raster_iou(const Box& a, const Box& b) {
    std::vector<double> xs{a.x1, a.x2, b.x1, b.x2};
    std::vector<double> ys{a.y1, a.y2, b.y1, b.y2};
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    double inter = 0.0;
    double uni = 0.0;
    auto inside = [](const Box& r, double x, double y) { return x > r.x1 && x < r.x2 && y > r.y1 && y < r.y2; };
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
            const double cx = 0.5 * (xs[i] + xs[i + 1]);
            const double cy = 0.5 * (ys[j] + ys[j + 1]);
            const double cell = (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]);
            const bool ia = inside(a, cx, cy);
            const bool ib = inside(b, cx, cy);
            if (ia && ib) inter += cell;
            if (ia || ib) uni += cell;
        }
    }
    return uni > 0.0 ? inter / uni : 0.0;
}

// Frame counting over the half-open intervals.
inline double frame_iou(const Interval& a, const Interval& b) {
    std::int64_t both = 0;
    std::int64_t either = 0;
    for (std::int64_t f = std::min(a.start, b.start); f < std::max(a.end, b.end); ++f) {
        const bool ia = a.contains(f);
        const bool ib = b.contains(f);
        both += ia && ib;
        either += ia || ib;
    }
    return either > 0 ? static_cast<double>(both) / static_cast<double>(either) : 0.0;
}

struct MatchScore {
    std::size_t count = 0;
    double total_iou = 0.0;
};

// Exhaustive search over all one-to-one matchings with the same video and
// activity and temporal IoU >= tmin. Maximizes count, then total IoU.
inline MatchScore best_matching(const std::vector<ActivityInstance>& sys, const std::vector<ActivityInstance>& ref,
                                double tmin) {
    MatchScore best;
    std::vector<bool> used(ref.size(), false);
    std::function<void(std::size_t, std::size_t, double)> rec = [&](std::size_t i, std::size_t n, double t) {
        if (i == sys.size()) {
            if (n > best.count || (n == best.count && t > best.total_iou + 1e-12)) best = {n, t};
            return;
        }
        rec(i + 1, n, t);
        for (std::size_t j = 0; j < ref.size(); ++j) {
            if (used[j] || sys[i].video_id != ref[j].video_id || sys[i].activity != ref[j].activity) continue;
            const double iou = frame_iou(sys[i].extent, ref[j].extent);
            if (iou < tmin || iou <= 0.0) continue;
            used[j] = true;
            rec(i + 1, n + 1, t + iou);
            used[j] = false;
        }
    };
    rec(0, 0, 0.0);
    return best;
}

inline double mean_frame_iou(const ActivityInstance& a, const ActivityInstance& b) {
    double sum = 0.0;
    std::int64_t n = 0;
    for (std::int64_t f = a.extent.start; f < a.extent.end; ++f) {
        if (!b.extent.contains(f)) continue;
        sum += raster_iou(a.boxes[static_cast<std::size_t>(f - a.extent.start)],
                          b.boxes[static_cast<std::size_t>(f - b.extent.start)]);
        ++n;
    }
    return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

inline bool neighbors(const Candidate& a, const Candidate& b) {
    if (a.tubelet_id >= 0 && a.tubelet_id == b.tubelet_id) return true;
    return mean_frame_iou(a.instance, b.instance) > 0.0;
}

// Soft-NMS straight from the definition: repeatedly keep the top score and
// multiply every overlapping neighbor by exp(-t^2 / sigma) or (1 - t) above the
// linear threshold. Returns the kept candidates in selection order.
inline std::vector<Candidate> soft_nms(std::vector<Candidate> cs, bool gaussian, double sigma, double lin_thr,
                                       double floor) {
    std::vector<Candidate> kept;
    std::erase_if(cs, [&](const Candidate& c) { return c.instance.confidence < floor; });
    while (!cs.empty()) {
        std::size_t top = 0;
        for (std::size_t i = 1; i < cs.size(); ++i) {
            if (cs[i].instance.confidence > cs[top].instance.confidence) top = i;
        }
        const Candidate sel = cs[top];
        cs.erase(cs.begin() + static_cast<long>(top));
        kept.push_back(sel);
        for (auto& c : cs) {
            const double t = frame_iou(sel.instance.extent, c.instance.extent);
            if (t <= 0.0 || !neighbors(sel, c)) continue;
            if (gaussian) {
                c.instance.confidence *= std::exp(-t * t / sigma);
            } else if (t > lin_thr) {
                c.instance.confidence *= 1.0 - t;
            }
        }
        std::erase_if(cs, [&](const Candidate& c) { return c.instance.confidence < floor; });
    }
    return kept;
}

// Classic NMS: keep the top score, delete every overlapping neighbor.
inline std::vector<Candidate> hard_nms(std::vector<Candidate> cs, double floor) {
    std::vector<Candidate> kept;
    std::erase_if(cs, [&](const Candidate& c) { return c.instance.confidence < floor; });
    while (!cs.empty()) {
        std::size_t top = 0;
        for (std::size_t i = 1; i < cs.size(); ++i) {
            if (cs[i].instance.confidence > cs[top].instance.confidence) top = i;
        }
        const Candidate sel = cs[top];
        cs.erase(cs.begin() + static_cast<long>(top));
        kept.push_back(sel);
        std::erase_if(cs, [&](const Candidate& c) {
            return frame_iou(sel.instance.extent, c.instance.extent) > 0.0 && neighbors(sel, c);
        });
    }
    return kept;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Seeded random helpers for property tests.
struct Gen {
    actdet::Rng rng;
    explicit Gen(std::uint64_t seed) : rng(seed, 99) {}

    double real(double lo, double hi) { return rng.uniform(lo, hi); }
    std::int64_t integer(std::int64_t lo, std::int64_t hi) { return rng.uniform_int(lo, hi); }
    Box box(double extent = 100.0) {
        const double x1 = real(0, extent), x2 = real(0, extent), y1 = real(0, extent), y2 = real(0, extent);
        return Box{std::min(x1, x2), std::min(y1, y2), std::max(x1, x2), std::max(y1, y2)};
    }
    Interval interval(std::int64_t span) {
        const auto a = integer(0, span - 1);
        const auto b = integer(0, span - 1);
        return Interval{std::min(a, b), std::max(a, b) + 1};
    }
};

}  // namespace oracle
