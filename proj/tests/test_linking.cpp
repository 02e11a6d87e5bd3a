#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "actdet/errors.hpp"
#include "actdet/linking.hpp"
#include "actdet/synthgen.hpp"
#include "oracles.hpp"
#include "scratch.hpp"

using namespace actdet;

namespace {

Detection det(std::int64_t frame, Box b, double score = 0.9, ObjectClass c = ObjectClass::person) {
    return Detection{"v", frame, b, c, score};
}

// Best total IoU over all one-to-one assignments of previous boxes to current
// ones, counting only pairs above the threshold.
double brute_force_assignment(const std::vector<Box>& prev, const std::vector<Box>& cur, double thr) {
    std::vector<std::size_t> perm(cur.size());
    std::iota(perm.begin(), perm.end(), 0);
    double best = 0.0;
    do {
        double total = 0.0;
        for (std::size_t i = 0; i < prev.size() && i < perm.size(); ++i) {
            const double iou = spatial_iou(prev[i], cur[perm[i]]);
            if (iou > thr) total += iou;
        }
        best = std::max(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

}  // namespace

TEST(Interpolate, MidpointOfSingleHole) {
    const std::vector<Observation> obs{{4, {0, 0, 10, 10}, 0.9}, {6, {10, 0, 20, 10}, 0.7}};
    const auto r = interpolate_gaps(obs, 8);
    ASSERT_EQ(r.runs.size(), 1u);
    const auto& run = r.runs[0];
    EXPECT_EQ(run.extent, (Interval{4, 7}));
    EXPECT_EQ(run.boxes[1], (Box{5, 0, 15, 10}));
    EXPECT_NEAR(run.scores[1], 0.8, 1e-12);
    EXPECT_EQ(run.provenance[1], Provenance::interpolated);
    EXPECT_EQ(r.interpolated_frames, 1u);
}

TEST(Interpolate, NoHolesIsIdentity) {
    const std::vector<Observation> obs{{0, {0, 0, 1, 1}, 0.1}, {1, {1, 1, 2, 2}, 0.2}, {2, {2, 2, 3, 3}, 0.3}};
    const auto r = interpolate_gaps(obs, 8);
    ASSERT_EQ(r.runs.size(), 1u);
    for (std::size_t i = 0; i < obs.size(); ++i) {
        EXPECT_EQ(r.runs[0].boxes[i], obs[i].box);
        EXPECT_EQ(r.runs[0].scores[i], obs[i].score);
        EXPECT_EQ(r.runs[0].provenance[i], Provenance::detected);
    }
    EXPECT_EQ(r.interpolated_frames, 0u);
}

TEST(Interpolate, ThreeFrameHole) {
    const std::vector<Observation> obs{{0, {0, 0, 10, 10}, 1.0}, {4, {40, 0, 50, 10}, 1.0}};
    const auto r = interpolate_gaps(obs, 8);
    ASSERT_EQ(r.runs.size(), 1u);
    EXPECT_EQ(r.runs[0].boxes[1].x1, 10.0);
    EXPECT_EQ(r.runs[0].boxes[2].x1, 20.0);
    EXPECT_EQ(r.runs[0].boxes[3].x1, 30.0);
}

TEST(Interpolate, LongHoleSplits) {
    const std::vector<Observation> obs{{0, {0, 0, 1, 1}, 1.0}, {10, {0, 0, 1, 1}, 1.0}};
    const auto r = interpolate_gaps(obs, 8);
    EXPECT_EQ(r.runs.size(), 2u);
    EXPECT_EQ(r.splits, 1u);
}

TEST(Interpolate, NonIncreasingFramesRejected) {
    const std::vector<Observation> obs{{3, {0, 0, 1, 1}, 1.0}, {3, {0, 0, 1, 1}, 1.0}};
    EXPECT_THROW(interpolate_gaps(obs, 8), InvalidInput);
}

TEST(Interpolate, ArbitraryRealTracksWithinRounding) {
    oracle::Gen g(8);
    for (int trial = 0; trial < 200; ++trial) {
        const double x0 = g.real(0, 500), vx = g.real(-5, 5);
        std::vector<Observation> obs;
        for (std::int64_t f = 0; f < 60; ++f) {
            if (f != 0 && f != 59 && g.real(0, 1) < 0.3) continue;
            const double x = x0 + vx * static_cast<double>(f);
            obs.push_back({f, {x, 0, x + 10, 10}, 1.0});
        }
        const auto r = interpolate_gaps(obs, 60);
        ASSERT_EQ(r.runs.size(), 1u);
        for (std::int64_t f = 0; f < 60; ++f) {
            EXPECT_NEAR(r.runs[0].boxes[static_cast<std::size_t>(f)].x1, x0 + vx * static_cast<double>(f), 1e-9);
        }
    }
}

TEST(PredictNext, Examples) {
    const std::vector<Box> one{{0, 0, 10, 10}};
    EXPECT_EQ(predict_next(one), (Box{0, 0, 10, 10}));
    const std::vector<Box> two{{0, 0, 10, 10}, {5, 0, 15, 10}};
    EXPECT_EQ(predict_next(two), (Box{10, 0, 20, 10}));
    const std::vector<Box> still{{3, 3, 6, 6}, {3, 3, 6, 6}, {3, 3, 6, 6}};
    EXPECT_EQ(predict_next(still), (Box{3, 3, 6, 6}));
    EXPECT_THROW(predict_next(std::vector<Box>{}), InvalidInput);
}

TEST(GreedyLink, SingleChain) {
    const std::vector<Detection> d{det(0, {0, 0, 10, 10}), det(1, {0.5, 0, 10.5, 10}), det(2, {1, 0, 11, 10})};
    const auto r = greedy_link(d, LinkConfig{});
    ASSERT_EQ(r.tubelets.size(), 1u);
    EXPECT_EQ(r.tubelets[0].extent, (Interval{0, 3}));
}

TEST(GreedyLink, LowIouSplits) {
    // IoU between frames 1 and 2 is about 0.33.
    const std::vector<Detection> d{det(0, {0, 0, 10, 10}), det(1, {0, 0, 10, 10}), det(2, {5, 0, 15, 10})};
    LinkConfig cfg;
    cfg.max_interp_gap = 0;
    const auto r = greedy_link(d, cfg);
    ASSERT_EQ(r.tubelets.size(), 2u);
    std::vector<std::int64_t> lengths{r.tubelets[0].extent.length(), r.tubelets[1].extent.length()};
    std::sort(lengths.begin(), lengths.end());
    EXPECT_EQ(lengths, (std::vector<std::int64_t>{1, 2}));
}

TEST(GreedyLink, ClassesNeverMix) {
    const std::vector<Detection> d{det(0, {0, 0, 10, 10}, 0.9, ObjectClass::car),
                                   det(1, {0, 0, 10, 10}, 0.9, ObjectClass::truck)};
    EXPECT_EQ(greedy_link(d, LinkConfig{}).tubelets.size(), 2u);
}

TEST(GreedyLink, BridgesShortGapsByInterpolation) {
    const std::vector<Detection> d{det(0, {0, 0, 10, 10}), det(3, {0, 0, 10, 10})};
    const auto r = greedy_link(d, LinkConfig{});
    ASSERT_EQ(r.tubelets.size(), 1u);
    EXPECT_EQ(r.tubelets[0].extent, (Interval{0, 4}));
    EXPECT_EQ(r.stats.interpolated_frames, 2u);
}

TEST(GreedyLink, ParallelLanesMatchOptimalAssignment) {
    oracle::Gen g(21);
    for (int trial = 0; trial < 100; ++trial) {
        const int lanes = static_cast<int>(g.integer(2, 3));
        std::vector<Detection> d;
        std::vector<std::vector<Box>> per_frame(10);
        for (int lane = 0; lane < lanes; ++lane) {
            double x = g.real(0, 50);
            const double y = lane * 15.0;
            const double v = g.real(-2, 2);
            for (std::int64_t f = 0; f < 10; ++f) {
                const Box b{x, y, x + 20, y + 20};
                per_frame[static_cast<std::size_t>(f)].push_back(b);
                d.push_back(det(f, b));
                x += v;
            }
        }
        std::stable_sort(d.begin(), d.end(), [](const Detection& a, const Detection& b) { return a.frame < b.frame; });
        const auto r = greedy_link(d, LinkConfig{});
        ASSERT_EQ(r.tubelets.size(), static_cast<std::size_t>(lanes));
        for (std::size_t f = 1; f < 10; ++f) {
            double greedy_total = 0.0;
            for (const auto& t : r.tubelets) {
                greedy_total += spatial_iou(t.boxes[f - 1], t.boxes[f]);
            }
            EXPECT_NEAR(greedy_total, brute_force_assignment(per_frame[f - 1], per_frame[f], 0.5), 1e-12);
        }
    }
}

TEST(TrackLink, BridgesGapWithPrediction) {
    std::vector<Detection> d;
    for (std::int64_t f = 0; f < 5; ++f) {
        d.push_back(det(f, {2.0 * f, 0, 2.0 * f + 10, 10}));
    }
    d.push_back(det(10, {20, 0, 30, 10}));
    const auto r = track_link(d, ConstantVelocityTracker{}, LinkConfig{});
    ASSERT_EQ(r.tubelets.size(), 1u);
    const auto& t = r.tubelets[0];
    EXPECT_EQ(t.extent, (Interval{0, 11}));
    for (std::int64_t f = 5; f < 10; ++f) {
        EXPECT_EQ(t.provenance[static_cast<std::size_t>(f)], Provenance::tracked);
        EXPECT_DOUBLE_EQ(t.box_at(f).x1, 2.0 * f);
    }
    EXPECT_EQ(t.provenance[10], Provenance::detected);
    EXPECT_EQ(r.stats.tracked_frames, 5u);
}

TEST(TrackLink, GapBeyondPatienceSplits) {
    const std::vector<Detection> d{det(0, {0, 0, 10, 10}), det(1, {0, 0, 10, 10}), det(62, {0, 0, 10, 10})};
    const auto r = track_link(d, ConstantVelocityTracker{}, LinkConfig{});
    ASSERT_EQ(r.tubelets.size(), 2u);
    // The unmatched tail is trimmed.
    EXPECT_EQ(r.tubelets[0].extent, (Interval{0, 2}));
    EXPECT_EQ(r.tubelets[1].extent, (Interval{62, 63}));
}

TEST(TrackLink, SingleFrameVideo) {
    const std::vector<Detection> d{det(0, {0, 0, 10, 10}), det(0, {50, 50, 60, 60})};
    const auto r = track_link(d, ConstantVelocityTracker{}, LinkConfig{});
    ASSERT_EQ(r.tubelets.size(), 2u);
    for (const auto& t : r.tubelets) EXPECT_EQ(t.extent.length(), 1);
}

TEST(TrackLink, RejectsMixedVideos) {
    std::vector<Detection> d{det(0, {0, 0, 1, 1}), det(1, {0, 0, 1, 1})};
    d[1].video_id = "w";
    EXPECT_THROW(track_link(d, ConstantVelocityTracker{}, LinkConfig{}), InvalidInput);
}

TEST(LinkConfig, Validation) {
    LinkConfig c;
    c.patience = 0;
    EXPECT_THROW(validate(c), ConfigError);
    c = LinkConfig{};
    c.iou_link_threshold = 1.5;
    EXPECT_THROW(validate(c), ConfigError);
}

TEST(Linkers, NoiseFreeCorpusRecoversTruthTracks) {
    SceneConfig cfg;
    cfg.video_count = 3;
    const auto corpus = generate(cfg);
    for (const auto& [video, dets] : group_by_video(corpus.detections)) {
        std::vector<Tubelet> truth;
        for (const auto& t : corpus.truth_tracks) {
            if (t.video_id == video) truth.push_back(t);
        }
        for (const bool tracking : {false, true}) {
            auto got = tracking ? track_link(dets, ConstantVelocityTracker{}, LinkConfig{}).tubelets
                                : greedy_link(dets, LinkConfig{}).tubelets;
            ASSERT_EQ(got.size(), truth.size());
            for (const auto& t : truth) {
                const bool found = std::any_of(got.begin(), got.end(), [&](const Tubelet& x) {
                    return x.extent == t.extent && x.boxes == t.boxes && x.object_class == t.object_class;
                });
                EXPECT_TRUE(found) << video << " tracking=" << tracking;
            }
        }
    }
}

TEST(Tubelets, RoundTrip) {
    testing_support::ScratchDir d;
    SceneConfig cfg;
    cfg.video_count = 1;
    cfg.dropout_rate = 0.2;
    const auto corpus = generate(cfg);
    const auto r = track_link(corpus.detections, ConstantVelocityTracker{}, LinkConfig{});
    write_tubelets(r.tubelets, d / "t.jsonl");
    EXPECT_EQ(read_tubelets(d / "t.jsonl"), r.tubelets);
}
