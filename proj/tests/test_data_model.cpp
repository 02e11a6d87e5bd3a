#include <gtest/gtest.h>

#include "actdet/data_model.hpp"
#include "actdet/errors.hpp"
#include "actdet/synthgen.hpp"
#include "oracles.hpp"
#include "scratch.hpp"

using namespace actdet;
using testing_support::ScratchDir;

namespace {

std::string instance_line(const std::string& activity, std::int64_t start, std::int64_t end,
                          std::int64_t skip = -1) {
    std::string boxes;
    for (std::int64_t f = start; f < end; ++f) {
        if (f == skip) continue;
        if (!boxes.empty()) boxes += ",";
        boxes += R"({"frame":)" + std::to_string(f) + R"(,"x1":0,"y1":0,"x2":10,"y2":10})";
    }
    return R"({"video_id":"v","activity":")" + activity + R"(","start":)" + std::to_string(start) +
           R"(,"end":)" + std::to_string(end) + R"(,"confidence":1,"boxes":[)" + boxes + "]}\n";
}

}  // namespace

TEST(Catalog, EighteenDistinctActivities) {
    std::set<std::string> names;
    for (const auto a : all_activities()) {
        names.insert(std::string(to_string(a)));
        EXPECT_EQ(parse_activity(to_string(a)), a);
    }
    EXPECT_EQ(names.size(), 18u);
    EXPECT_FALSE(parse_activity("Swimming"));
    EXPECT_FALSE(parse_object_class("dog"));
}

TEST(ReadDetections, SingleRecord) {
    ScratchDir d;
    const auto p = d.write("d.jsonl", R"({"video_id":"v","frame":3,"x1":1,"y1":2,"x2":3,"y2":4,"class":"person","score":0.5})"
                                      "\n");
    const auto set = read_detections(p);
    ASSERT_EQ(set.detections.size(), 1u);
    EXPECT_EQ(set.detections[0].frame, 3);
    EXPECT_EQ(set.detections[0].box, (Box{1, 2, 3, 4}));
    EXPECT_EQ(set.dropped, 0u);
}

TEST(ReadDetections, UnknownClassDropped) {
    ScratchDir d;
    const auto p = d.write("d.jsonl",
                           R"({"video_id":"v","frame":0,"x1":0,"y1":0,"x2":1,"y2":1,"class":"dog","score":0.5})"
                           "\n"
                           R"({"video_id":"v","frame":0,"x1":0,"y1":0,"x2":1,"y2":1,"class":"car","score":0.5})"
                           "\n");
    const auto set = read_detections(p);
    EXPECT_EQ(set.detections.size(), 1u);
    EXPECT_EQ(set.dropped, 1u);
}

TEST(ReadDetections, EmptyFile) {
    ScratchDir d;
    const auto set = read_detections(d.write("d.jsonl", ""));
    EXPECT_TRUE(set.detections.empty());
    EXPECT_EQ(set.dropped, 0u);
}

TEST(ReadDetections, MalformedLineReportsLineNumber) {
    ScratchDir d;
    const auto p = d.write("d.jsonl",
                           R"({"format":"actdet.detections","version":1})"
                           "\n"
                           R"({"video_id":"v","frame":0,"x1":0,"y1":0,"x2":1,"y2":1,"class":"car","score":0.5})"
                           "\n{not json\n");
    try {
        read_detections(p);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(ReadDetections, WrongFormatHeaderRejected) {
    ScratchDir d;
    EXPECT_THROW(read_detections(d.write("d.jsonl", R"({"format":"actdet.tubelets","version":1})"
                                                    "\n")),
                 ParseError);
}

TEST(ReadDetections, ScoreOutOfRangeRejected) {
    ScratchDir d;
    EXPECT_THROW(read_detections(d.write(
                     "d.jsonl", R"({"video_id":"v","frame":0,"x1":0,"y1":0,"x2":1,"y2":1,"class":"car","score":1.5})"
                                "\n")),
                 ParseError);
}

TEST(ReadDetections, UnknownVideoIsConsistencyError) {
    ScratchDir d;
    const auto set = read_detections(d.write(
        "d.jsonl", R"({"video_id":"ghost","frame":0,"x1":0,"y1":0,"x2":1,"y2":1,"class":"car","score":0.5})"
                   "\n"));
    const std::vector<VideoMeta> metas{{"v", 10, 30.0, Box{0, 0, 100, 100}}};
    EXPECT_THROW(check_consistency(set.detections, metas), ConsistencyError);
}

TEST(ReadGroundTruth, RidingSingleton) {
    ScratchDir d;
    const auto gt = read_ground_truth(d.write("g.jsonl", instance_line("Riding", 0, 10)));
    ASSERT_EQ(gt.size(), 1u);
    EXPECT_EQ(gt[0].activity, Activity::Riding);
    EXPECT_EQ(gt[0].boxes.size(), 10u);
}

TEST(ReadGroundTruth, UnknownActivityNamesLabel) {
    ScratchDir d;
    try {
        read_ground_truth(d.write("g.jsonl", instance_line("Swimming", 0, 3)));
        FAIL() << "expected SchemaError";
    } catch (const SchemaError& e) {
        EXPECT_NE(std::string(e.what()).find("Swimming"), std::string::npos);
    }
}

TEST(ReadGroundTruth, MissingFrameIsInvariantViolation) {
    ScratchDir d;
    EXPECT_THROW(read_ground_truth(d.write("g.jsonl", instance_line("Riding", 0, 5, 2))), InvariantViolation);
}

TEST(WriteInstances, RoundTrip) {
    ScratchDir d;
    oracle::Gen g(2);
    std::vector<ActivityInstance> xs;
    for (int i = 0; i < 20; ++i) {
        ActivityInstance inst;
        inst.video_id = "v" + std::to_string(i % 3);
        inst.activity = all_activities()[static_cast<std::size_t>(g.integer(0, 17))];
        inst.extent = g.interval(30);
        for (std::int64_t f = 0; f < inst.extent.length(); ++f) inst.boxes.push_back(g.box());
        inst.confidence = g.real(0, 1);
        xs.push_back(inst);
    }
    write_instances(xs, d / "i.jsonl");
    EXPECT_EQ(read_instances(d / "i.jsonl"), xs);
}

TEST(WriteInstances, EmptyListWritesHeaderOnly) {
    ScratchDir d;
    write_instances({}, d / "i.jsonl");
    EXPECT_EQ(oracle::slurp(d / "i.jsonl"), "{\"format\":\"actdet.instances\",\"version\":1}\n");
    EXPECT_TRUE(read_instances(d / "i.jsonl").empty());
}

TEST(WriteInstances, ByteStableForThousandInstances) {
    ScratchDir d;
    SceneConfig cfg;
    cfg.video_count = 170;
    const auto corpus = generate(cfg);
    ASSERT_GE(corpus.ground_truth.size(), 1000u);
    const std::vector<ActivityInstance> xs(corpus.ground_truth.begin(), corpus.ground_truth.begin() + 1000);
    write_instances(xs, d / "a.jsonl");
    write_instances(xs, d / "b.jsonl");
    EXPECT_EQ(oracle::slurp(d / "a.jsonl"), oracle::slurp(d / "b.jsonl"));
}

TEST(WriteDetections, RoundTripPreservesDoubles) {
    ScratchDir d;
    std::vector<Detection> xs{{"a", 0, Box{0.1, 0.2, 10.0 / 3.0, 7.7}, ObjectClass::truck, 0.123456789},
                              {"a", 2, Box{1, 1, 2, 2}, ObjectClass::bicycle, 1.0}};
    write_detections(xs, d / "d.jsonl");
    EXPECT_EQ(read_detections(d / "d.jsonl").detections, xs);
}

TEST(VideoMeta, RoundTripAndMinutes) {
    ScratchDir d;
    std::vector<VideoMeta> ms{{"v", 1800, 30.0, Box{0, 0, 640, 480}}};
    write_video_meta(ms, d / "m.jsonl");
    EXPECT_EQ(read_video_meta(d / "m.jsonl"), ms);
    EXPECT_DOUBLE_EQ(ms[0].minutes(), 1.0);
}
