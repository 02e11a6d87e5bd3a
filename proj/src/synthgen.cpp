#include "actdet/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "actdet/errors.hpp"
#include "actdet/proposals.hpp"

namespace actdet {

Rng::Rng(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffU), static_cast<std::uint32_t>(seed >> 32), stream};
    engine_.seed(seq);
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<double>(hi - lo + 1);
    const auto k = static_cast<std::int64_t>(std::floor(uniform() * span));
    return std::min(hi, lo + k);
}

double Rng::normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::int64_t Rng::poisson(double mean) {
    if (mean <= 0.0) {
        return 0;
    }
    const double limit = std::exp(-mean);
    std::int64_t k = 0;
    double p = uniform();
    while (p > limit) {
        ++k;
        p *= uniform();
    }
    return k;
}

std::map<Activity, double> SceneConfig::uniform_activity_mix() {
    std::map<Activity, double> mix;
    for (const auto a : all_activities()) {
        mix[a] = 1.0 / static_cast<double>(kActivityCount);
    }
    return mix;
}

std::vector<ObjectClass> compatible_classes(Activity a) {
    if (group_of(a) == ModelGroup::vehicle_related) {
        return {ObjectClass::car, ObjectClass::truck};
    }
    if (a == Activity::Riding) {
        return {ObjectClass::bicycle};
    }
    return {ObjectClass::person};
}

namespace {

// Nominal (width, height) per class, in pixels.
std::pair<double, double> nominal_size(ObjectClass c) {
    switch (c) {
        case ObjectClass::person:
            return {20.0, 48.0};
        case ObjectClass::bicycle:
            return {28.0, 44.0};
        case ObjectClass::car:
            return {60.0, 36.0};
        case ObjectClass::truck:
            return {80.0, 44.0};
    }
    return {20.0, 48.0};
}

constexpr double kMaxSizeScale = 1.1;
constexpr double kVerticalWiggle = 8.0;

enum Stream : std::uint32_t { kScene = 0, kDropout = 1, kJitter = 2, kScoreNoise = 3, kFalsePositive = 4 };

template <typename K>
K draw(Rng& rng, const std::vector<std::pair<K, double>>& weighted) {
    double total = 0.0;
    for (const auto& [k, w] : weighted) total += w;
    double u = rng.uniform() * total;
    for (const auto& [k, w] : weighted) {
        if (u < w) return k;
        u -= w;
    }
    return weighted.back().first;
}

double class_weight(const SceneConfig& cfg, ObjectClass c) {
    auto it = cfg.object_mix.find(c);
    return it == cfg.object_mix.end() ? 0.0 : it->second;
}

struct SimObject {
    ObjectClass cls;
    std::optional<Activity> activity;
    Interval life;
    std::vector<Box> boxes;
};

SimObject simulate_object(Rng& rng, const SceneConfig& cfg, std::int64_t band, double band_height, bool moving,
                          std::optional<Activity> activity, ObjectClass cls) {
    SimObject obj{cls, activity, {}, {}};
    // Odd durations: an even duration 2w lets two disjoint windows of size w each
    // reach temporal IoU exactly 0.5 with the instance.
    std::int64_t len = rng.uniform_int(cfg.lifetime.min, cfg.lifetime.max);
    if (len % 2 == 0) {
        len = len < cfg.lifetime.max ? len + 1 : len - 1;
    }
    len = std::clamp<std::int64_t>(len, 1, cfg.frames_per_video);
    const std::int64_t start = rng.uniform_int(0, cfg.frames_per_video - len);
    obj.life = Interval{start, start + len};

    const auto [nw, nh] = nominal_size(cls);
    const double scale = rng.uniform(0.9, kMaxSizeScale);
    const double w = nw * scale;
    const double h = nh * scale;
    const double band_top = static_cast<double>(band) * band_height;
    const double y_min = band_top;
    const double y_max = band_top + band_height - h;
    double x = rng.uniform(0.0, cfg.width - w);
    double y = 0.5 * (y_min + y_max) + rng.uniform(-kVerticalWiggle, kVerticalWiggle) * 0.5;
    y = std::clamp(y, y_min, y_max);

    double vx = 0.0;
    double vy = 0.0;
    std::int64_t segment_left = 0;
    for (std::int64_t f = 0; f < len; ++f) {
        if (moving && segment_left == 0) {
            segment_left = rng.uniform_int(cfg.segment_length.min, cfg.segment_length.max);
            const double speed = rng.uniform(cfg.speed.min, cfg.speed.max);
            vx = rng.uniform() < 0.5 ? -speed : speed;
            vy = rng.uniform(-0.25, 0.25);
        }
        obj.boxes.push_back(Box{x, y, x + w, y + h});
        if (!moving) {
            continue;
        }
        --segment_left;
        x += vx;
        y += vy;
        if (x < 0.0 || x + w > cfg.width) {
            vx = -vx;
            x = std::clamp(x, 0.0, cfg.width - w);
        }
        if (y < y_min || y > y_max) {
            vy = -vy;
            y = std::clamp(y, y_min, y_max);
        }
    }
    return obj;
}

}  // namespace

void validate(const SceneConfig& cfg) {
    if (cfg.video_count < 1 || cfg.frames_per_video < 1) {
        throw ConfigError("video_count and frames_per_video must be positive");
    }
    if (!(cfg.frame_rate > 0.0) || !(cfg.width > 0.0) || !(cfg.height > 0.0)) {
        throw ConfigError("frame_rate, width and height must be positive");
    }
    if (cfg.objects_per_video.min < 0 || cfg.objects_per_video.min > cfg.objects_per_video.max ||
        cfg.static_objects_per_video < 0) {
        throw ConfigError("objects_per_video must be a non-negative range");
    }
    if (cfg.lifetime.min < 1 || cfg.lifetime.min > cfg.lifetime.max || cfg.lifetime.max > cfg.frames_per_video) {
        throw ConfigError("lifetime must satisfy 1 <= min <= max <= frames_per_video");
    }
    if (!(cfg.speed.min >= 0.0) || cfg.speed.min > cfg.speed.max) {
        throw ConfigError("speed must be a non-negative range");
    }
    if (cfg.segment_length.min < 1 || cfg.segment_length.min > cfg.segment_length.max) {
        throw ConfigError("segment_length must be a positive range");
    }
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(cfg.dropout_rate) || !unit(cfg.base_score)) {
        throw ConfigError("dropout_rate and base_score must lie in [0, 1]");
    }
    if (!(cfg.box_jitter_px >= 0.0) || !(cfg.false_positive_rate >= 0.0) || !(cfg.score_noise >= 0.0)) {
        throw ConfigError("noise parameters must be non-negative");
    }
    double total = 0.0;
    for (const auto& [a, p] : cfg.activity_mix) {
        if (!unit(p)) {
            throw ConfigError("activity_mix probability for '" + std::string(to_string(a)) + "' outside [0, 1]");
        }
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw ConfigError("activity_mix must sum to 1");
    }
    for (const auto& [c, w] : cfg.object_mix) {
        if (!(w >= 0.0)) {
            throw ConfigError("object_mix weights must be non-negative");
        }
    }
    for (const auto& [a, p] : cfg.activity_mix) {
        if (p <= 0.0) continue;
        double w = 0.0;
        for (const auto c : compatible_classes(a)) w += class_weight(cfg, c);
        if (w <= 0.0) {
            throw ConfigError("activity '" + std::string(to_string(a)) +
                              "' has positive probability but no compatible object class in object_mix");
        }
    }
    if (cfg.static_objects_per_video > 0) {
        double w = 0.0;
        for (const auto& [c, x] : cfg.object_mix) w += x;
        if (w <= 0.0) throw ConfigError("object_mix is empty");
    }
    const auto bands = cfg.objects_per_video.max + cfg.static_objects_per_video;
    if (bands > 0) {
        double tallest = 0.0;
        double widest = 0.0;
        for (const auto c : kObjectClasses) {
            tallest = std::max(tallest, nominal_size(c).second * kMaxSizeScale);
            widest = std::max(widest, nominal_size(c).first * kMaxSizeScale);
        }
        if (cfg.height / static_cast<double>(bands) < tallest + kVerticalWiggle || cfg.width < widest) {
            throw ConfigError("frame too small for " + std::to_string(bands) + " object lanes");
        }
    }
}

SyntheticCorpus generate(const SceneConfig& cfg) {
    validate(cfg);
    SyntheticCorpus corpus;
    std::vector<std::pair<Activity, double>> act_weights(cfg.activity_mix.begin(), cfg.activity_mix.end());
    std::vector<std::pair<ObjectClass, double>> class_weights(cfg.object_mix.begin(), cfg.object_mix.end());
    const auto bands = cfg.objects_per_video.max + cfg.static_objects_per_video;
    const double band_height = bands > 0 ? cfg.height / static_cast<double>(bands) : cfg.height;
    std::int64_t track_id = 0;

    for (std::int64_t v = 0; v < cfg.video_count; ++v) {
        char name[32];
        std::snprintf(name, sizeof name, "vid_%03lld", static_cast<long long>(v));
        const std::string video_id = name;
        const std::uint64_t child = cfg.seed + static_cast<std::uint64_t>(v);
        Rng scene(child, kScene), dropout(child, kDropout), jitter(child, kJitter), score(child, kScoreNoise),
            fp(child, kFalsePositive);

        VideoMeta meta{video_id, cfg.frames_per_video, cfg.frame_rate, Box{0.0, 0.0, cfg.width, cfg.height}};
        corpus.metas.push_back(meta);

        std::vector<SimObject> objects;
        const auto active = scene.uniform_int(cfg.objects_per_video.min, cfg.objects_per_video.max);
        for (std::int64_t k = 0; k < active; ++k) {
            const Activity act = draw(scene, act_weights);
            std::vector<std::pair<ObjectClass, double>> options;
            for (const auto c : compatible_classes(act)) options.emplace_back(c, class_weight(cfg, c));
            const ObjectClass cls = draw(scene, options);
            objects.push_back(simulate_object(scene, cfg, k, band_height, true, act, cls));
        }
        for (std::int64_t k = 0; k < cfg.static_objects_per_video; ++k) {
            const ObjectClass cls = draw(scene, class_weights);
            objects.push_back(
                simulate_object(scene, cfg, cfg.objects_per_video.max + k, band_height, false, std::nullopt, cls));
        }

        // Frame-major detection slots. Every slot consumes the same draws whatever
        // the noise levels, so corpora that differ only in dropout_rate drop nested
        // sets of detections.
        std::vector<std::vector<Detection>> per_frame(static_cast<std::size_t>(cfg.frames_per_video));
        for (const auto& obj : objects) {
            for (std::int64_t f = obj.life.start; f < obj.life.end; ++f) {
                const Box& truth = obj.boxes[static_cast<std::size_t>(f - obj.life.start)];
                const double u = dropout.uniform();
                const double j0 = jitter.normal(), j1 = jitter.normal(), j2 = jitter.normal(), j3 = jitter.normal();
                const double s = score.normal();
                if (u < cfg.dropout_rate) {
                    continue;
                }
                Box b = truth;
                if (cfg.box_jitter_px > 0.0) {
                    const double x1 = truth.x1 + cfg.box_jitter_px * j0;
                    const double y1 = truth.y1 + cfg.box_jitter_px * j1;
                    const double x2 = truth.x2 + cfg.box_jitter_px * j2;
                    const double y2 = truth.y2 + cfg.box_jitter_px * j3;
                    b = Box{std::min(x1, x2), std::min(y1, y2), std::max(x1, x2), std::max(y1, y2)};
                }
                const double sc = std::clamp(cfg.base_score + cfg.score_noise * s, 0.0, 1.0);
                per_frame[static_cast<std::size_t>(f)].push_back(Detection{video_id, f, b, obj.cls, sc});
            }
        }
        if (cfg.false_positive_rate > 0.0) {
            for (std::int64_t f = 0; f < cfg.frames_per_video; ++f) {
                const auto n = fp.poisson(cfg.false_positive_rate);
                for (std::int64_t i = 0; i < n; ++i) {
                    const ObjectClass cls = draw(fp, class_weights);
                    const auto [w, h] = nominal_size(cls);
                    const double x = fp.uniform(0.0, cfg.width - w);
                    const double y = fp.uniform(0.0, cfg.height - h);
                    per_frame[static_cast<std::size_t>(f)].push_back(
                        Detection{video_id, f, Box{x, y, x + w, y + h}, cls, fp.uniform(0.3, 0.7)});
                }
            }
        }
        for (auto& dets : per_frame) {
            corpus.detections.insert(corpus.detections.end(), dets.begin(), dets.end());
        }

        std::vector<ActivityInstance> video_gt;
        std::vector<Tubelet> video_tracks;
        for (const auto& obj : objects) {
            Tubelet t;
            t.id = 0;
            t.video_id = video_id;
            t.object_class = obj.cls;
            t.extent = obj.life;
            t.boxes = obj.boxes;
            t.scores.assign(obj.boxes.size(), 1.0);
            t.provenance.assign(obj.boxes.size(), Provenance::detected);
            video_tracks.push_back(std::move(t));
            if (obj.activity) {
                video_gt.push_back(ActivityInstance{video_id, *obj.activity, obj.life, obj.boxes, 1.0});
            }
        }
        std::stable_sort(video_gt.begin(), video_gt.end(), [](const ActivityInstance& a, const ActivityInstance& b) {
            return a.extent.start < b.extent.start;
        });
        std::stable_sort(video_tracks.begin(), video_tracks.end(),
                         [](const Tubelet& a, const Tubelet& b) { return a.extent.start < b.extent.start; });
        for (auto& t : video_tracks) {
            t.id = track_id++;
        }
        corpus.ground_truth.insert(corpus.ground_truth.end(), video_gt.begin(), video_gt.end());
        corpus.truth_tracks.insert(corpus.truth_tracks.end(), video_tracks.begin(), video_tracks.end());
    }
    return corpus;
}

nlohmann::ordered_json to_json(const SceneConfig& cfg) {
    nlohmann::ordered_json j;
    j["seed"] = cfg.seed;
    j["video_count"] = cfg.video_count;
    j["frames_per_video"] = cfg.frames_per_video;
    j["frame_rate"] = cfg.frame_rate;
    j["width"] = cfg.width;
    j["height"] = cfg.height;
    j["objects_per_video"] = {{"min", cfg.objects_per_video.min}, {"max", cfg.objects_per_video.max}};
    j["static_objects_per_video"] = cfg.static_objects_per_video;
    nlohmann::ordered_json mix = nlohmann::ordered_json::object();
    for (const auto& [a, p] : cfg.activity_mix) mix[std::string(to_string(a))] = p;
    j["activity_mix"] = std::move(mix);
    nlohmann::ordered_json omix = nlohmann::ordered_json::object();
    for (const auto& [c, w] : cfg.object_mix) omix[std::string(to_string(c))] = w;
    j["object_mix"] = std::move(omix);
    j["lifetime"] = {{"min", cfg.lifetime.min}, {"max", cfg.lifetime.max}};
    j["speed"] = {{"min", cfg.speed.min}, {"max", cfg.speed.max}};
    j["segment_length"] = {{"min", cfg.segment_length.min}, {"max", cfg.segment_length.max}};
    j["dropout_rate"] = cfg.dropout_rate;
    j["box_jitter_px"] = cfg.box_jitter_px;
    j["false_positive_rate"] = cfg.false_positive_rate;
    j["score_noise"] = cfg.score_noise;
    j["base_score"] = cfg.base_score;
    return j;
}

namespace {

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) {
        try {
            out = it->get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("synth.") + key + ": " + e.what());
        }
    }
}

template <typename R>
void read_range(const nlohmann::json& j, const char* key, R& out) {
    if (auto it = j.find(key); it != j.end()) {
        if (!it->is_object()) throw ConfigError(std::string("synth.") + key + " must be {min, max}");
        read_key(*it, "min", out.min);
        read_key(*it, "max", out.max);
    }
}

}  // namespace

SceneConfig scene_config_from_json(const nlohmann::json& j) {
    static const std::set<std::string> known{"seed",          "video_count",     "frames_per_video",
                                             "frame_rate",    "width",           "height",
                                             "objects_per_video", "static_objects_per_video", "activity_mix",
                                             "object_mix",    "lifetime",        "speed",
                                             "segment_length", "dropout_rate",   "box_jitter_px",
                                             "false_positive_rate", "score_noise", "base_score"};
    if (!j.is_object()) throw ConfigError("synth section must be an object");
    for (const auto& [k, v] : j.items()) {
        if (!known.count(k)) throw ConfigError("unknown synth key '" + k + "'");
    }
    SceneConfig cfg;
    read_key(j, "seed", cfg.seed);
    read_key(j, "video_count", cfg.video_count);
    read_key(j, "frames_per_video", cfg.frames_per_video);
    read_key(j, "frame_rate", cfg.frame_rate);
    read_key(j, "width", cfg.width);
    read_key(j, "height", cfg.height);
    read_range(j, "objects_per_video", cfg.objects_per_video);
    read_key(j, "static_objects_per_video", cfg.static_objects_per_video);
    if (auto it = j.find("activity_mix"); it != j.end()) {
        cfg.activity_mix.clear();
        for (const auto& [k, v] : it->items()) {
            const auto a = parse_activity(k);
            if (!a || !v.is_number()) throw ConfigError("bad activity_mix entry '" + k + "'");
            cfg.activity_mix[*a] = v.get<double>();
        }
    }
    if (auto it = j.find("object_mix"); it != j.end()) {
        cfg.object_mix.clear();
        for (const auto& [k, v] : it->items()) {
            const auto c = parse_object_class(k);
            if (!c || !v.is_number()) throw ConfigError("bad object_mix entry '" + k + "'");
            cfg.object_mix[*c] = v.get<double>();
        }
    }
    read_range(j, "lifetime", cfg.lifetime);
    read_range(j, "speed", cfg.speed);
    read_range(j, "segment_length", cfg.segment_length);
    read_key(j, "dropout_rate", cfg.dropout_rate);
    read_key(j, "box_jitter_px", cfg.box_jitter_px);
    read_key(j, "false_positive_rate", cfg.false_positive_rate);
    read_key(j, "score_noise", cfg.score_noise);
    read_key(j, "base_score", cfg.base_score);
    return cfg;
}

CorpusPaths corpus_paths(const std::filesystem::path& dir) {
    return CorpusPaths{dir / "detections.jsonl", dir / "ground_truth.jsonl", dir / "video_meta.jsonl",
                       dir / "synth_manifest.json"};
}

CorpusPaths write_corpus(const SyntheticCorpus& corpus, const SceneConfig& cfg, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    }
    const auto paths = corpus_paths(dir);
    write_detections(corpus.detections, paths.detections);
    write_instances(corpus.ground_truth, paths.ground_truth);
    write_video_meta(corpus.metas, paths.meta);
    nlohmann::ordered_json m;
    m["generator"] = "actdet synth";
    m["rng"] = Rng::kAlgorithm;
    m["seed"] = cfg.seed;
    m["child_seed_rule"] = "seed + video_index";
    m["config"] = to_json(cfg);
    m["counts"] = {{"videos", corpus.metas.size()},
                   {"detections", corpus.detections.size()},
                   {"ground_truth", corpus.ground_truth.size()},
                   {"objects", corpus.truth_tracks.size()}};
    std::ofstream out(paths.manifest, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write '" + paths.manifest.string() + "'");
    }
    out << m.dump(2) << '\n';
    return paths;
}

}  // namespace actdet
