#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "actdet/errors.hpp"
#include "actdet/evaluation.hpp"
#include "oracles.hpp"
#include "scratch.hpp"

using namespace actdet;

namespace {

ActivityInstance inst(Interval extent, double conf = 1.0, Activity a = Activity::Pull, std::string video = "v",
                      Box b = {0, 0, 10, 10}) {
    ActivityInstance x;
    x.video_id = std::move(video);
    x.activity = a;
    x.extent = extent;
    x.boxes.assign(static_cast<std::size_t>(extent.length()), b);
    x.confidence = conf;
    return x;
}

Tubelet tube(Interval extent, Box b = {0, 0, 10, 10}) {
    Tubelet t;
    t.video_id = "v";
    t.extent = extent;
    t.boxes.assign(static_cast<std::size_t>(extent.length()), b);
    t.scores.assign(t.boxes.size(), 1.0);
    t.provenance.assign(t.boxes.size(), Provenance::detected);
    return t;
}

const std::vector<VideoMeta> kTenMinutes{{"v", 18000, 30.0, {0, 0, 100, 100}}};

}  // namespace

TEST(TubeletRecall, PerfectCover) {
    const std::vector<ActivityInstance> gt{inst({0, 50}), inst({100, 180})};
    const std::vector<Tubelet> ts{tube({0, 50}), tube({100, 180})};
    const std::vector<double> taus{0.0, 0.5, 0.9, 0.99};
    for (const double r : tubelet_recall(ts, gt, taus).recall) EXPECT_DOUBLE_EQ(r, 1.0);
}

TEST(TubeletRecall, NoTubelets) {
    const std::vector<ActivityInstance> gt{inst({0, 50})};
    const std::vector<double> taus{0.1, 0.5};
    for (const double r : tubelet_recall({}, gt, taus).recall) EXPECT_DOUBLE_EQ(r, 0.0);
}

TEST(TubeletRecall, HalfCovered) {
    const std::vector<ActivityInstance> gt{inst({0, 10}), inst({100, 110})};
    // Spatial IoU 0.6 on the first instance, about 0.2 on the second.
    const std::vector<Tubelet> ts{tube({0, 10}, {2.5, 0, 12.5, 10}), tube({100, 110}, {80.0 / 12.0, 0, 80.0 / 12.0 + 10, 10})};
    const auto cov = best_coverage(ts, gt);
    EXPECT_NEAR(cov[0], 0.6, 1e-12);
    EXPECT_NEAR(cov[1], 0.2, 1e-12);
    const std::vector<double> taus{0.3};
    EXPECT_DOUBLE_EQ(tubelet_recall(ts, gt, taus).recall[0], 0.5);
}

TEST(TubeletRecall, EmptyGroundTruthUndefined) {
    const std::vector<double> taus{0.5};
    EXPECT_THROW(tubelet_recall({}, {}, taus), UndefinedRecall);
}

TEST(TubeletRecall, MonotoneInThreshold) {
    oracle::Gen g(6);
    std::vector<ActivityInstance> gt;
    std::vector<Tubelet> ts;
    for (int i = 0; i < 30; ++i) {
        gt.push_back(inst(g.interval(300), 1.0, Activity::Pull, "v", g.box()));
        ts.push_back(tube(g.interval(300), g.box()));
    }
    const std::vector<double> taus{0.0, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9};
    const auto r = tubelet_recall(ts, gt, taus).recall;
    EXPECT_TRUE(std::is_sorted(r.rbegin(), r.rend()));
}

TEST(Align, IdenticalLists) {
    const std::vector<ActivityInstance> xs{inst({0, 10}), inst({20, 30}, 1.0, Activity::Riding)};
    const auto a = align_instances(xs, xs, AlignmentPolicy{});
    EXPECT_EQ(a.matches.size(), 2u);
    EXPECT_TRUE(a.misses.empty());
    EXPECT_TRUE(a.false_alarms.empty());
}

TEST(Align, EmptySystem) {
    const std::vector<ActivityInstance> ref{inst({0, 10}), inst({20, 30})};
    const auto a = align_instances({}, ref, AlignmentPolicy{});
    EXPECT_EQ(a.misses.size(), 2u);
}

TEST(Align, TwoCompetingForOne) {
    const std::vector<ActivityInstance> sys{inst({0, 10}), inst({2, 10})};
    const std::vector<ActivityInstance> ref{inst({0, 10})};
    const auto a = align_instances(sys, ref, AlignmentPolicy{});
    ASSERT_EQ(a.matches.size(), 1u);
    EXPECT_EQ(a.matches[0].system, 0u);
    EXPECT_EQ(a.false_alarms, (std::vector<std::size_t>{1}));
    const auto best = oracle::best_matching(sys, ref, 0.2);
    EXPECT_EQ(best.count, 1u);
    EXPECT_NEAR(best.total_iou, a.matches[0].temporal_iou, 1e-12);
}

TEST(Align, PrefersMoreMatchesOverHigherIou) {
    // Greedy by IoU would pair s0-r0 (1.0) and leave r1 unmatched.
    const std::vector<ActivityInstance> sys{inst({0, 10}), inst({8, 18})};
    const std::vector<ActivityInstance> ref{inst({0, 10}), inst({5, 15})};
    const std::vector<ActivityInstance> sys2{inst({0, 10})};
    const auto a = align_instances(sys, ref, AlignmentPolicy{});
    EXPECT_EQ(a.matches.size(), 2u);
    const auto b = align_instances(sys2, ref, AlignmentPolicy{});
    ASSERT_EQ(b.matches.size(), 1u);
    EXPECT_EQ(b.matches[0].reference, 0u);
}

TEST(Align, RespectsVideoAndActivity) {
    const std::vector<ActivityInstance> sys{inst({0, 10}, 1.0, Activity::Pull, "a"), inst({0, 10}, 1.0, Activity::Riding)};
    const std::vector<ActivityInstance> ref{inst({0, 10})};
    EXPECT_TRUE(align_instances(sys, ref, AlignmentPolicy{}).matches.empty());
}

TEST(Align, MatchesBruteForceOnSmallCases) {
    oracle::Gen g(77);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<ActivityInstance> sys, ref;
        const auto ns = g.integer(0, 5), nr = g.integer(0, 5);
        for (std::int64_t i = 0; i < ns; ++i) sys.push_back(inst(g.interval(20)));
        for (std::int64_t i = 0; i < nr; ++i) ref.push_back(inst(g.interval(20)));
        const auto a = align_instances(sys, ref, AlignmentPolicy{});
        const auto best = oracle::best_matching(sys, ref, 0.2);
        double total = 0.0;
        for (const auto& m : a.matches) total += m.temporal_iou;
        EXPECT_EQ(a.matches.size(), best.count);
        EXPECT_NEAR(total, best.total_iou, 1e-9);
        EXPECT_EQ(a.matches.size() + a.misses.size(), ref.size());
        EXPECT_EQ(a.matches.size() + a.false_alarms.size(), sys.size());
    }
}

TEST(Align, PolicyValidation) { EXPECT_THROW(validate(AlignmentPolicy{0.0}), ConfigError); }

TEST(DetCurve, PerfectSystem) {
    const std::vector<ActivityInstance> ref{inst({0, 10}), inst({20, 30})};
    const auto curves = det_curve(ref, ref, kTenMinutes, AlignmentPolicy{});
    ASSERT_EQ(curves.size(), 1u);
    const auto& last = curves[0].points.back();
    EXPECT_DOUBLE_EQ(last.rfa, 0.0);
    EXPECT_DOUBLE_EQ(last.p_miss, 0.0);
    EXPECT_DOUBLE_EQ(p_miss_at_rfa(curves[0]), 0.0);
}

TEST(DetCurve, EmptySystem) {
    const std::vector<ActivityInstance> ref{inst({0, 10})};
    const auto curves = det_curve({}, ref, kTenMinutes, AlignmentPolicy{});
    ASSERT_EQ(curves.size(), 1u);
    ASSERT_EQ(curves[0].points.size(), 1u);
    EXPECT_TRUE(std::isinf(curves[0].points[0].threshold));
    EXPECT_DOUBLE_EQ(curves[0].points[0].rfa, 0.0);
    EXPECT_DOUBLE_EQ(curves[0].points[0].p_miss, 1.0);
}

TEST(DetCurve, HandCountedScenario) {
    const std::vector<ActivityInstance> ref{inst({0, 10}), inst({100, 110}), inst({200, 210})};
    const std::vector<ActivityInstance> sys{inst({0, 10}, 0.9), inst({100, 110}, 0.8), inst({400, 410}, 0.7)};
    const auto curves = det_curve(sys, ref, kTenMinutes, AlignmentPolicy{});
    ASSERT_EQ(curves.size(), 1u);
    const auto& pts = curves[0].points;
    ASSERT_EQ(pts.size(), 3u);
    EXPECT_NEAR(pts[2].rfa, 0.1, 1e-12);
    EXPECT_NEAR(pts[2].p_miss, 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(pts[0].p_miss, 2.0 / 3.0, 1e-12);
}

TEST(DetCurve, ZeroDurationRejected) {
    const std::vector<ActivityInstance> ref{inst({0, 10})};
    EXPECT_THROW(det_curve(ref, ref, {}, AlignmentPolicy{}), InvalidInput);
}

TEST(DetCurve, PMissNonIncreasingInRfa) {
    oracle::Gen g(12);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<ActivityInstance> sys, ref;
        for (int i = 0; i < 15; ++i) {
            ref.push_back(inst(g.interval(200), 1.0, g.real(0, 1) < 0.5 ? Activity::Pull : Activity::Riding));
            sys.push_back(inst(g.interval(200), std::round(g.real(0, 1) * 10) / 10,
                               g.real(0, 1) < 0.5 ? Activity::Pull : Activity::Riding));
        }
        for (const auto& c : det_curve(sys, ref, kTenMinutes, AlignmentPolicy{})) {
            for (std::size_t i = 1; i < c.points.size(); ++i) {
                EXPECT_GE(c.points[i].rfa, c.points[i - 1].rfa);
                EXPECT_LE(c.points[i].p_miss, c.points[i - 1].p_miss);
                EXPECT_LT(c.points[i].threshold, c.points[i - 1].threshold);
            }
        }
    }
}

TEST(PMissAtRfa, Examples) {
    EXPECT_DOUBLE_EQ(p_miss_at_rfa(DetCurve{Activity::Pull, {{1.0, 0.0, 0.0}}}), 0.0);
    EXPECT_DOUBLE_EQ(p_miss_at_rfa(DetCurve{Activity::Pull, {{1.0, 0.0, 1.0}}}), 1.0);
    EXPECT_NEAR(p_miss_at_rfa(DetCurve{Activity::Pull, {{0.9, 0.1, 0.5}, {0.8, 0.2, 0.3}}}, 0.15), 0.4, 1e-12);
}

TEST(MeanPMiss, Examples) {
    EXPECT_DOUBLE_EQ(mean_p_miss({{Activity::Pull, 0.0}, {Activity::Riding, 0.0}}), 0.0);
    EXPECT_DOUBLE_EQ(mean_p_miss({{Activity::Pull, 0.7}}), 0.7);
    EXPECT_NEAR(mean_p_miss({{Activity::Pull, 0.2}, {Activity::Riding, 0.4}}), 0.3, 1e-12);
    EXPECT_NEAR(mean_p_miss({{Activity::Pull, 0.2}, {Activity::Riding, 0.4}}, {{Activity::Riding, 3.0}}), 0.35, 1e-12);
    EXPECT_THROW(mean_p_miss({}), InvalidInput);
}

TEST(Writers, CsvAndSummaryFormat) {
    testing_support::ScratchDir d;
    write_recall_csv(RecallCurve{{0.1, 0.5}, {1.0, 0.25}}, d / "r.csv");
    EXPECT_EQ(oracle::slurp(d / "r.csv"), "threshold,recall\n0.100000,1.000000\n0.500000,0.250000\n");
    const std::vector<DetCurve> curves{{Activity::Pull, {{std::numeric_limits<double>::infinity(), 0.0, 1.0}}}};
    write_det_csv(curves, d / "d.csv");
    EXPECT_EQ(oracle::slurp(d / "d.csv"), "activity,threshold,rfa,p_miss\nPull,inf,0.000000,1.000000\n");
    write_summary_json(summarize(curves, 0.15), d / "s.json");
    const auto j = nlohmann::json::parse(oracle::slurp(d / "s.json"));
    EXPECT_DOUBLE_EQ(j["mean_p_miss"].get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(j["per_class_p_miss"]["Pull"].get<double>(), 1.0);
}
