#include "actdet/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "actdet/parallel.hpp"

namespace actdet {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(LinkStrategy s) { return s == LinkStrategy::greedy ? "greedy" : "tracking"; }

std::optional<LinkStrategy> parse_link_strategy(std::string_view s) {
    if (s == "greedy") return LinkStrategy::greedy;
    if (s == "tracking") return LinkStrategy::tracking;
    return std::nullopt;
}

void validate(const ScorerConfig& cfg) {
    if (cfg.kind != "oracle" && cfg.kind != "heuristic") {
        throw ConfigError("unknown scorer '" + cfg.kind + "' (expected oracle or heuristic)");
    }
    if (!(cfg.epsilon >= 0.0 && cfg.epsilon <= 1.0) || !(cfg.label_noise >= 0.0 && cfg.label_noise <= 1.0)) {
        throw ConfigError("scorer epsilon and label_noise must lie in [0, 1]");
    }
    if (!(cfg.heuristic_scale > 0.0)) {
        throw ConfigError("heuristic_scale must be positive");
    }
}

std::unique_ptr<Scorer> make_scorer(const ScorerConfig& cfg, std::vector<ActivityInstance> ground_truth,
                                    const LabelPolicy& policy) {
    validate(cfg);
    if (cfg.kind == "oracle") {
        return std::make_unique<OracleScorer>(std::move(ground_truth), policy, cfg.epsilon, cfg.label_noise, cfg.seed);
    }
    return std::make_unique<HeuristicScorer>(cfg.heuristic_scale);
}

void validate(const EvalConfig& cfg) {
    validate(cfg.alignment);
    if (!(cfg.target_rfa >= 0.0)) {
        throw ConfigError("target_rfa must be non-negative");
    }
    if (cfg.recall_thresholds.empty() || !std::is_sorted(cfg.recall_thresholds.begin(), cfg.recall_thresholds.end())) {
        throw ConfigError("recall_thresholds must be a non-empty ascending list");
    }
}

void validate(const PipelineConfig& cfg) {
    if (cfg.workers < 1) throw ConfigError("workers must be >= 1");
    if (cfg.synth) {
        validate(*cfg.synth);
    } else if (cfg.inputs.detections.empty() || cfg.inputs.ground_truth.empty() || cfg.inputs.meta.empty()) {
        throw ConfigError("without a synth section, inputs.detections, inputs.ground_truth and inputs.meta are required");
    }
    validate(cfg.link);
    validate(cfg.refine);
    validate(cfg.label);
    validate(cfg.scorer);
    validate(cfg.fuse);
    validate(cfg.eval);

    const auto& o = cfg.outputs;
    std::vector<std::string> names{o.tubelets,  o.proposals, o.labels,  o.vehicle_scored, o.person_scored,
                                   o.instances, o.recall_csv, o.det_csv, o.summary,        o.manifest};
    if (cfg.synth) {
        const auto synth = corpus_paths("");
        for (const auto& p : {synth.detections, synth.ground_truth, synth.meta, synth.manifest}) {
            names.push_back(p.filename().string());
        }
    }
    std::set<std::string> seen;
    for (const auto& n : names) {
        if (n.empty()) throw ConfigError("output file names must not be empty");
        if (!seen.insert(fs::path(n).lexically_normal().string()).second) {
            throw ConfigError("output file '" + n + "' is referenced twice");
        }
    }
    if (!cfg.synth) {
        std::set<std::string> in;
        for (const auto& p : {cfg.inputs.detections, cfg.inputs.ground_truth, cfg.inputs.meta, cfg.inputs.motion}) {
            if (!p.empty() && !in.insert(p.lexically_normal().string()).second) {
                throw ConfigError("input file '" + p.string() + "' is referenced twice");
            }
        }
    }
}

// ---- configuration text format ----

namespace {

/// Reads one object of the config, rejecting keys that were never consumed.
class Section {
public:
    Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) throw ConfigError(name_ + " must be an object");
    }

    bool has(const char* key) const { return j_.contains(key); }

    const json& raw(const char* key) {
        used_.insert(key);
        return j_.at(key);
    }

    template <typename T>
    void get(const char* key, T& out) {
        if (!j_.contains(key)) return;
        used_.insert(key);
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(name_ + "." + key + ": " + e.what());
        }
    }

    Section sub(const char* key) {
        used_.insert(key);
        return Section(j_.at(key), name_ + "." + key);
    }

    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (!used_.count(k)) throw ConfigError("unknown key '" + name_ + "." + k + "'");
        }
    }

private:
    const json& j_;
    std::string name_;
    std::set<std::string> used_;
};

ordered_json nms_json(const SoftNmsConfig& c) {
    return {{"method", c.method == SoftNmsMethod::gaussian ? "gaussian" : "linear"},
            {"sigma", c.sigma},
            {"linear_threshold", c.linear_threshold},
            {"score_floor", c.score_floor}};
}

}  // namespace

ordered_json to_json(const PipelineConfig& cfg) {
    ordered_json j;
    j["workers"] = cfg.workers;
    j["synth"] = cfg.synth ? to_json(*cfg.synth) : ordered_json(nullptr);
    j["inputs"] = {{"detections", cfg.inputs.detections.string()},
                   {"ground_truth", cfg.inputs.ground_truth.string()},
                   {"meta", cfg.inputs.meta.string()},
                   {"motion", cfg.inputs.motion.string()}};
    j["link"] = {{"strategy", to_string(cfg.strategy)},
                 {"iou_link_threshold", cfg.link.iou_link_threshold},
                 {"patience", cfg.link.patience},
                 {"max_interp_gap", cfg.link.max_interp_gap}};
    j["refine"] = {{"displacement_threshold", cfg.refine.displacement_threshold},
                   {"flow_threshold", cfg.refine.flow_threshold},
                   {"enlarge_factor", cfg.refine.enlarge_factor},
                   {"window_sizes", cfg.refine.window_sizes},
                   {"window_stride", cfg.refine.window_stride},
                   {"sample_count", cfg.refine.sample_count}};
    j["label"] = {{"spatial_pos", cfg.label.spatial_pos},
                  {"temporal_pos", cfg.label.temporal_pos},
                  {"temporal_neg", cfg.label.temporal_neg}};
    j["score"] = {{"scorer", cfg.scorer.kind},
                  {"epsilon", cfg.scorer.epsilon},
                  {"label_noise", cfg.scorer.label_noise},
                  {"seed", cfg.scorer.seed},
                  {"heuristic_scale", cfg.scorer.heuristic_scale}};
    j["fuse"] = {{"vehicle_weight", cfg.fuse.weights.vehicle},
                 {"person_weight", cfg.fuse.weights.person},
                 {"score_threshold", cfg.fuse.score_threshold},
                 {"soft_nms", nms_json(cfg.fuse.nms)}};
    j["eval"] = {{"temporal_iou_min", cfg.eval.alignment.temporal_iou_min},
                 {"target_rfa", cfg.eval.target_rfa},
                 {"recall_thresholds", cfg.eval.recall_thresholds}};
    const auto& o = cfg.outputs;
    j["outputs"] = {{"tubelets", o.tubelets},       {"proposals", o.proposals},
                    {"labels", o.labels},           {"vehicle_scored", o.vehicle_scored},
                    {"person_scored", o.person_scored}, {"instances", o.instances},
                    {"recall_csv", o.recall_csv},   {"det_csv", o.det_csv},
                    {"summary", o.summary},         {"manifest", o.manifest}};
    return j;
}

PipelineConfig pipeline_config_from_json(const json& j) {
    PipelineConfig cfg;
    Section root(j, "config");
    root.get("workers", cfg.workers);
    if (root.has("synth")) {
        const json& s = root.raw("synth");
        cfg.synth = s.is_null() ? std::nullopt : std::optional<SceneConfig>(scene_config_from_json(s));
    }
    if (root.has("inputs")) {
        auto s = root.sub("inputs");
        std::string d, g, m, mo;
        s.get("detections", d);
        s.get("ground_truth", g);
        s.get("meta", m);
        s.get("motion", mo);
        s.finish();
        cfg.inputs = InputPaths{d, g, m, mo};
    }
    if (root.has("link")) {
        auto s = root.sub("link");
        if (s.has("strategy")) {
            std::string name;
            s.get("strategy", name);
            const auto st = parse_link_strategy(name);
            if (!st) throw ConfigError("unknown link strategy '" + name + "'");
            cfg.strategy = *st;
        }
        s.get("iou_link_threshold", cfg.link.iou_link_threshold);
        s.get("patience", cfg.link.patience);
        s.get("max_interp_gap", cfg.link.max_interp_gap);
        s.finish();
    }
    if (root.has("refine")) {
        auto s = root.sub("refine");
        s.get("displacement_threshold", cfg.refine.displacement_threshold);
        s.get("flow_threshold", cfg.refine.flow_threshold);
        s.get("enlarge_factor", cfg.refine.enlarge_factor);
        s.get("window_sizes", cfg.refine.window_sizes);
        s.get("window_stride", cfg.refine.window_stride);
        s.get("sample_count", cfg.refine.sample_count);
        s.finish();
    }
    if (root.has("label")) {
        auto s = root.sub("label");
        s.get("spatial_pos", cfg.label.spatial_pos);
        s.get("temporal_pos", cfg.label.temporal_pos);
        s.get("temporal_neg", cfg.label.temporal_neg);
        s.finish();
    }
    if (root.has("score")) {
        auto s = root.sub("score");
        s.get("scorer", cfg.scorer.kind);
        s.get("epsilon", cfg.scorer.epsilon);
        s.get("label_noise", cfg.scorer.label_noise);
        s.get("seed", cfg.scorer.seed);
        s.get("heuristic_scale", cfg.scorer.heuristic_scale);
        s.finish();
    }
    if (root.has("fuse")) {
        auto s = root.sub("fuse");
        s.get("vehicle_weight", cfg.fuse.weights.vehicle);
        s.get("person_weight", cfg.fuse.weights.person);
        s.get("score_threshold", cfg.fuse.score_threshold);
        if (s.has("soft_nms")) {
            auto n = s.sub("soft_nms");
            if (n.has("method")) {
                std::string m;
                n.get("method", m);
                if (m == "gaussian") {
                    cfg.fuse.nms.method = SoftNmsMethod::gaussian;
                } else if (m == "linear") {
                    cfg.fuse.nms.method = SoftNmsMethod::linear;
                } else {
                    throw ConfigError("unknown soft_nms method '" + m + "'");
                }
            }
            n.get("sigma", cfg.fuse.nms.sigma);
            n.get("linear_threshold", cfg.fuse.nms.linear_threshold);
            n.get("score_floor", cfg.fuse.nms.score_floor);
            n.finish();
        }
        s.finish();
    }
    if (root.has("eval")) {
        auto s = root.sub("eval");
        s.get("temporal_iou_min", cfg.eval.alignment.temporal_iou_min);
        s.get("target_rfa", cfg.eval.target_rfa);
        s.get("recall_thresholds", cfg.eval.recall_thresholds);
        s.finish();
    }
    if (root.has("outputs")) {
        auto s = root.sub("outputs");
        auto& o = cfg.outputs;
        s.get("tubelets", o.tubelets);
        s.get("proposals", o.proposals);
        s.get("labels", o.labels);
        s.get("vehicle_scored", o.vehicle_scored);
        s.get("person_scored", o.person_scored);
        s.get("instances", o.instances);
        s.get("recall_csv", o.recall_csv);
        s.get("det_csv", o.det_csv);
        s.get("summary", o.summary);
        s.get("manifest", o.manifest);
        s.finish();
    }
    root.finish();
    validate(cfg);
    return cfg;
}

PipelineConfig read_pipeline_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "': " + e.what());
    }
    return pipeline_config_from_json(j);
}

ordered_json reference_config() { return to_json(PipelineConfig{}); }

std::string config_hash(const ordered_json& config) {
    auto keyed = config;
    if (keyed.is_object()) keyed.erase("workers");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : keyed.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---- stages ----

namespace {

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
        if (ec) throw IoError("cannot create '" + p.parent_path().string() + "': " + ec.message());
    }
}

std::int64_t count(std::size_t n) { return static_cast<std::int64_t>(n); }

template <typename T, typename Key>
std::vector<std::pair<std::string, std::vector<T>>> split_by_video(const std::vector<T>& xs, Key key) {
    std::map<std::string, std::vector<T>> m;
    for (const auto& x : xs) m[key(x)].push_back(x);
    return {m.begin(), m.end()};
}

}  // namespace

StageReport stage_synth(const SceneConfig& cfg, const fs::path& out_dir) {
    const auto corpus = generate(cfg);
    write_corpus(corpus, cfg, out_dir);
    return StageReport{"synth",
                       0.0,
                       {{"videos", count(corpus.metas.size())},
                        {"detections", count(corpus.detections.size())},
                        {"ground_truth", count(corpus.ground_truth.size())}}};
}

StageReport stage_link(const fs::path& detections, const fs::path& meta, LinkStrategy strategy, const LinkConfig& cfg,
                       std::size_t workers, const fs::path& out) {
    validate(cfg);
    const auto dets = read_detections(detections);
    const auto metas = read_video_meta(meta);
    check_consistency(dets.detections, metas);
    const auto videos = split_by_video(dets.detections, [](const Detection& d) { return d.video_id; });

    std::vector<LinkResult> results(videos.size());
    const ConstantVelocityTracker tracker;
    parallel_for(videos.size(), workers, [&](std::size_t i) {
        const auto& v = videos[i].second;
        results[i] = strategy == LinkStrategy::greedy ? greedy_link(v, cfg) : track_link(v, tracker, cfg);
    });

    std::vector<Tubelet> tubelets;
    LinkStats stats;
    for (auto& r : results) {
        for (auto& t : r.tubelets) {
            t.id = count(tubelets.size());
            tubelets.push_back(std::move(t));
        }
        stats.interpolated_frames += r.stats.interpolated_frames;
        stats.tracked_frames += r.stats.tracked_frames;
    }
    ensure_parent(out);
    write_tubelets(tubelets, out);
    return StageReport{"link",
                       0.0,
                       {{"detections", count(dets.detections.size())},
                        {"dropped_unknown_class", count(dets.dropped)},
                        {"tubelets", count(tubelets.size())},
                        {"interpolated_frames", count(stats.interpolated_frames)},
                        {"tracked_frames", count(stats.tracked_frames)}}};
}

StageReport stage_refine(const fs::path& tubelets, const fs::path& meta, const RefineConfig& cfg,
                         const std::optional<fs::path>& motion, std::size_t workers, const fs::path& out) {
    validate(cfg);
    const auto tubes = read_tubelets(tubelets);
    const auto metas = read_video_meta(meta);
    std::optional<FrameMotionTable> table;
    if (motion) table = FrameMotionTable::read(*motion);
    const auto videos = split_by_video(tubes, [](const Tubelet& t) { return t.video_id; });
    for (const auto& [video, ts] : videos) {
        const auto& m = find_meta(metas, video);
        for (const auto& t : ts) {
            if (t.extent.start < 0 || t.extent.end > m.frame_count) {
                throw ConsistencyError("tubelet " + std::to_string(t.id) + " leaves video '" + video + "'");
            }
        }
    }

    std::vector<RefineResult> results(videos.size());
    parallel_for(videos.size(), workers, [&](std::size_t i) {
        results[i] =
            refine_video(videos[i].second, find_meta(metas, videos[i].first), cfg, table ? &*table : nullptr);
    });
    std::vector<Proposal> proposals;
    std::size_t removed = 0;
    for (auto& r : results) {
        for (auto& p : r.proposals) {
            p.id = count(proposals.size());
            proposals.push_back(std::move(p));
        }
        removed += r.removed_static;
    }
    ensure_parent(out);
    write_proposals(proposals, out);
    return StageReport{"refine",
                       0.0,
                       {{"tubelets", count(tubes.size())},
                        {"removed_static", count(removed)},
                        {"proposals", count(proposals.size())}}};
}

StageReport stage_label(const fs::path& proposals, const fs::path& ground_truth, const LabelPolicy& policy,
                        const fs::path& out) {
    const auto props = read_proposals(proposals);
    const auto gt = read_ground_truth(ground_truth);
    const auto labels = label_proposals(props, gt, policy);
    std::int64_t pos = 0, neg = 0;
    for (const auto& l : labels) {
        pos += l.label.kind == LabelKind::positive;
        neg += l.label.kind == LabelKind::negative;
    }
    ensure_parent(out);
    write_labels(labels, out);
    return StageReport{"label",
                       0.0,
                       {{"proposals", count(labels.size())},
                        {"positive", pos},
                        {"negative", neg},
                        {"ignore", count(labels.size()) - pos - neg}}};
}

StageReport stage_score(const fs::path& proposals, const ScorerConfig& scorer,
                        const std::optional<fs::path>& ground_truth, const LabelPolicy& policy, ModelGroup group,
                        std::size_t workers, const fs::path& out) {
    validate(scorer);
    if (scorer.kind == "oracle" && !ground_truth) {
        throw ConfigError("the oracle scorer needs ground truth");
    }
    const auto props = read_proposals(proposals);
    std::vector<ActivityInstance> gt;
    if (ground_truth) gt = read_ground_truth(*ground_truth);
    const auto s = make_scorer(scorer, std::move(gt), policy);
    const auto scored = score_proposals(props, *s, group, workers);
    ensure_parent(out);
    write_proposals(scored, out);
    return StageReport{"score", 0.0, {{"proposals", count(props.size())}, {"scored", count(scored.size())}}};
}

StageReport stage_fuse(const fs::path& vehicle, const fs::path& person, const FuseConfig& cfg, const fs::path& out) {
    validate(cfg);
    const auto v = read_proposals(vehicle);
    const auto p = read_proposals(person);
    const auto instances = fuse(v, p, cfg);
    ensure_parent(out);
    write_instances(instances, out);
    return StageReport{"fuse",
                       0.0,
                       {{"vehicle_proposals", count(v.size())},
                        {"person_proposals", count(p.size())},
                        {"instances", count(instances.size())}}};
}

StageReport stage_eval_recall(const fs::path& tubelets, const fs::path& ground_truth,
                              const std::vector<double>& thresholds, const fs::path& out_csv) {
    const auto tubes = read_tubelets(tubelets);
    const auto gt = read_ground_truth(ground_truth);
    const auto curve = tubelet_recall(tubes, gt, thresholds);
    ensure_parent(out_csv);
    write_recall_csv(curve, out_csv);
    return StageReport{"eval-recall", 0.0, {{"tubelets", count(tubes.size())}, {"ground_truth", count(gt.size())}}};
}

StageReport stage_eval_det(const fs::path& instances, const fs::path& ground_truth, const fs::path& meta,
                           const EvalConfig& cfg, const fs::path& out_csv, const fs::path& out_summary) {
    validate(cfg);
    const auto sys = read_instances(instances);
    const auto gt = read_ground_truth(ground_truth);
    const auto metas = read_video_meta(meta);
    check_consistency(sys, metas);
    check_consistency(gt, metas);
    const auto curves = det_curve(sys, gt, metas, cfg.alignment);
    const auto summary = summarize(curves, cfg.target_rfa);
    ensure_parent(out_csv);
    ensure_parent(out_summary);
    write_det_csv(curves, out_csv);
    write_summary_json(summary, out_summary);
    return StageReport{"eval-det",
                       0.0,
                       {{"instances", count(sys.size())},
                        {"ground_truth", count(gt.size())},
                        {"classes", count(curves.size())}}};
}

std::vector<StageReport> run_pipeline(const PipelineConfig& cfg, const fs::path& out_dir) {
    validate(cfg);
    std::vector<StageReport> reports;
    InputPaths in = cfg.inputs;
    if (cfg.synth) {
        const auto paths = corpus_paths(out_dir);
        reports.push_back(run_stage("synth", [&] { return stage_synth(*cfg.synth, out_dir); }));
        in = InputPaths{paths.detections, paths.ground_truth, paths.meta, {}};
    }
    const auto& o = cfg.outputs;
    const auto at = [&](const std::string& name) { return out_dir / name; };
    const std::optional<fs::path> motion = in.motion.empty() ? std::nullopt : std::optional<fs::path>(in.motion);

    reports.push_back(run_stage("link", [&] {
        return stage_link(in.detections, in.meta, cfg.strategy, cfg.link, cfg.workers, at(o.tubelets));
    }));
    reports.push_back(run_stage(
        "refine", [&] { return stage_refine(at(o.tubelets), in.meta, cfg.refine, motion, cfg.workers, at(o.proposals)); }));
    reports.push_back(
        run_stage("label", [&] { return stage_label(at(o.proposals), in.ground_truth, cfg.label, at(o.labels)); }));
    for (const auto group : {ModelGroup::vehicle_related, ModelGroup::person_related}) {
        const auto& target = group == ModelGroup::vehicle_related ? o.vehicle_scored : o.person_scored;
        reports.push_back(run_stage("score-" + std::string(to_string(group)), [&] {
            return stage_score(at(o.proposals), cfg.scorer, in.ground_truth, cfg.label, group, cfg.workers,
                               at(target));
        }));
    }
    reports.push_back(run_stage(
        "fuse", [&] { return stage_fuse(at(o.vehicle_scored), at(o.person_scored), cfg.fuse, at(o.instances)); }));
    reports.push_back(run_stage("eval-recall", [&] {
        return stage_eval_recall(at(o.tubelets), in.ground_truth, cfg.eval.recall_thresholds, at(o.recall_csv));
    }));
    reports.push_back(run_stage("eval-det", [&] {
        return stage_eval_det(at(o.instances), in.ground_truth, in.meta, cfg.eval, at(o.det_csv), at(o.summary));
    }));
    return reports;
}

void write_run_manifest(const fs::path& path, const std::string& command, const ordered_json& config,
                        const std::vector<StageReport>& reports) {
    ordered_json m;
    m["command"] = command;
    m["config_hash"] = config_hash(config);
    m["config"] = config;
    ordered_json stages = ordered_json::array();
    for (const auto& r : reports) {
        ordered_json counts = ordered_json::object();
        for (const auto& [k, v] : r.counts) counts[k] = v;
        stages.push_back({{"stage", r.stage}, {"seconds", r.seconds}, {"counts", std::move(counts)}});
    }
    m["stages"] = std::move(stages);
    ensure_parent(path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << m.dump(2) << '\n';
}

}  // namespace actdet
