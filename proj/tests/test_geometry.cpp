#include <gtest/gtest.h>

#include <limits>

#include "actdet/errors.hpp"
#include "actdet/geometry.hpp"
#include "oracles.hpp"

using namespace actdet;

TEST(SpatialIou, IdenticalBoxes) { EXPECT_DOUBLE_EQ(spatial_iou({0, 0, 10, 10}, {0, 0, 10, 10}), 1.0); }

TEST(SpatialIou, DisjointBoxes) { EXPECT_DOUBLE_EQ(spatial_iou({0, 0, 10, 10}, {20, 20, 30, 30}), 0.0); }

TEST(SpatialIou, HalfShift) {
    // inter 50, union 150
    EXPECT_NEAR(spatial_iou({0, 0, 10, 10}, {5, 0, 15, 10}), 50.0 / 150.0, 1e-12);
}

TEST(SpatialIou, Symmetric) {
    oracle::Gen g(3);
    for (int i = 0; i < 200; ++i) {
        const Box a = g.box(), b = g.box();
        EXPECT_DOUBLE_EQ(spatial_iou(a, b), spatial_iou(b, a));
    }
}

TEST(SpatialIou, DegenerateBoxesGiveZero) { EXPECT_DOUBLE_EQ(spatial_iou({1, 1, 1, 1}, {1, 1, 1, 1}), 0.0); }

TEST(SpatialIou, NonFiniteRejected) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(spatial_iou({0, 0, nan, 10}, {0, 0, 10, 10}), InvalidInput);
    EXPECT_THROW(spatial_iou({0, 0, 10, 10}, {0, 0, std::numeric_limits<double>::infinity(), 10}), InvalidInput);
}

TEST(SpatialIou, MatchesRasterOracle) {
    oracle::Gen g(11);
    for (int i = 0; i < 500; ++i) {
        const Box a = g.box(), b = g.box();
        EXPECT_NEAR(spatial_iou(a, b), oracle::raster_iou(a, b), 1e-9);
    }
}

TEST(TemporalIou, Examples) {
    EXPECT_DOUBLE_EQ(temporal_iou({0, 10}, {0, 10}), 1.0);
    EXPECT_DOUBLE_EQ(temporal_iou({0, 10}, {10, 20}), 0.0);
    EXPECT_NEAR(temporal_iou({0, 10}, {5, 15}), 5.0 / 15.0, 1e-12);
}

TEST(TemporalIou, EmptyIntervalRejected) {
    EXPECT_THROW(temporal_iou({5, 5}, {0, 10}), InvalidInput);
    EXPECT_THROW(temporal_iou({0, 10}, {7, 3}), InvalidInput);
    EXPECT_THROW(make_interval(4, 4), InvalidInput);
}

TEST(TemporalIou, MatchesFrameCount) {
    oracle::Gen g(5);
    for (int i = 0; i < 500; ++i) {
        const Interval a = g.interval(60), b = g.interval(60);
        EXPECT_NEAR(temporal_iou(a, b), oracle::frame_iou(a, b), 1e-12);
        EXPECT_EQ(overlap_length(a, b) > 0, oracle::frame_iou(a, b) > 0.0);
    }
}

TEST(Enlarge, IdentityFactor) {
    EXPECT_EQ(enlarge({10, 10, 20, 20}, 1.0, {0, 0, 100, 100}), (Box{10, 10, 20, 20}));
}

TEST(Enlarge, ScalesAboutCenter) {
    const Box b = enlarge({10, 10, 20, 20}, 1.2, {0, 0, 100, 100});
    EXPECT_NEAR(b.x1, 9.0, 1e-12);
    EXPECT_NEAR(b.y1, 9.0, 1e-12);
    EXPECT_NEAR(b.x2, 21.0, 1e-12);
    EXPECT_NEAR(b.y2, 21.0, 1e-12);
}

TEST(Enlarge, ClampsAtFrameEdge) {
    const Box b = enlarge({0, 0, 10, 10}, 1.2, {0, 0, 100, 100});
    EXPECT_NEAR(b.x1, 0.0, 1e-12);
    EXPECT_NEAR(b.y1, 0.0, 1e-12);
    EXPECT_NEAR(b.x2, 11.0, 1e-12);
    EXPECT_NEAR(b.y2, 11.0, 1e-12);
}

TEST(Enlarge, FactorBelowOneRejected) { EXPECT_THROW(enlarge({0, 0, 10, 10}, 0.9, {0, 0, 100, 100}), InvalidInput); }

TEST(Enlarge, StaysInsideBoundsAndContainsOriginal) {
    oracle::Gen g(17);
    const Box bounds{0, 0, 100, 100};
    for (int i = 0; i < 300; ++i) {
        const Box b = g.box();
        const Box e = enlarge(b, g.real(1.0, 2.0), bounds);
        EXPECT_GE(e.x1, 0.0);
        EXPECT_GE(e.y1, 0.0);
        EXPECT_LE(e.x2, 100.0);
        EXPECT_LE(e.y2, 100.0);
        EXPECT_LE(e.x1, b.x1 + 1e-9);
        EXPECT_GE(e.x2, b.x2 - 1e-9);
    }
}

TEST(ResizeWithin, TranslatesInsteadOfClipping) {
    const Box r = resize_within({0, 0, 10, 10}, 12, 12, {0, 0, 100, 100});
    EXPECT_EQ(r, (Box{0, 0, 12, 12}));
    const Box s = resize_within({95, 40, 100, 50}, 20, 10, {0, 0, 100, 100});
    EXPECT_DOUBLE_EQ(s.width(), 20.0);
    EXPECT_DOUBLE_EQ(s.x2, 100.0);
}

TEST(ResizeWithin, CapsAtFrameSize) {
    const Box r = resize_within({40, 40, 60, 60}, 300, 50, {0, 0, 100, 100});
    EXPECT_DOUBLE_EQ(r.width(), 100.0);
    EXPECT_DOUBLE_EQ(r.height(), 50.0);
}
