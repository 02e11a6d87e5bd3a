#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "actdet/data_model.hpp"
#include "actdet/linking.hpp"

namespace actdet {

/// mt19937_64 seeded through std::seed_seq, with portable uniform and normal
/// transforms (the standard distributions are implementation-defined).
class Rng {
public:
    static constexpr const char* kAlgorithm = "mt19937_64/seed_seq(seed_lo,seed_hi,stream)/u53/box-muller";

    Rng(std::uint64_t seed, std::uint32_t stream);

    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
    double normal();
    std::int64_t poisson(double mean);

private:
    std::mt19937_64 engine_;
};

struct IntRange {
    std::int64_t min = 0;
    std::int64_t max = 0;
};

struct RealRange {
    double min = 0.0;
    double max = 0.0;
};

struct SceneConfig {
    std::uint64_t seed = 7;
    std::int64_t video_count = 10;
    std::int64_t frames_per_video = 900;
    double frame_rate = 30.0;
    double width = 1280.0;
    double height = 720.0;
    /// Objects that carry an activity over their whole lifetime.
    IntRange objects_per_video{5, 7};
    /// Motionless objects without an activity.
    std::int64_t static_objects_per_video = 1;
    std::map<Activity, double> activity_mix = uniform_activity_mix();
    /// Relative weights among the classes compatible with a drawn activity.
    std::map<ObjectClass, double> object_mix{
        {ObjectClass::person, 0.4}, {ObjectClass::car, 0.3}, {ObjectClass::truck, 0.1}, {ObjectClass::bicycle, 0.2}};
    IntRange lifetime{61, 241};
    RealRange speed{1.0, 3.0};
    IntRange segment_length{20, 80};
    double dropout_rate = 0.0;
    double box_jitter_px = 0.0;
    /// Expected injected false positives per frame.
    double false_positive_rate = 0.0;
    double score_noise = 0.0;
    double base_score = 0.9;

    static std::map<Activity, double> uniform_activity_mix();
};

/// Throws ConfigError when the configuration cannot be generated.
void validate(const SceneConfig& cfg);

nlohmann::ordered_json to_json(const SceneConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
SceneConfig scene_config_from_json(const nlohmann::json& j);

struct SyntheticCorpus {
    std::vector<Detection> detections;
    std::vector<ActivityInstance> ground_truth;
    std::vector<VideoMeta> metas;
    /// The true object tracks behind the detections, including static objects.
    std::vector<Tubelet> truth_tracks;
};

/// Object classes an activity can be performed by.
std::vector<ObjectClass> compatible_classes(Activity a);

SyntheticCorpus generate(const SceneConfig& cfg);

struct CorpusPaths {
    std::filesystem::path detections;
    std::filesystem::path ground_truth;
    std::filesystem::path meta;
    std::filesystem::path manifest;
};

CorpusPaths corpus_paths(const std::filesystem::path& dir);

/// Writes detections, ground truth, video metadata and a manifest into `dir`.
CorpusPaths write_corpus(const SyntheticCorpus& corpus, const SceneConfig& cfg, const std::filesystem::path& dir);

}  // namespace actdet
