#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "actdet/errors.hpp"
#include "actdet/evaluation.hpp"
#include "actdet/linking.hpp"
#include "actdet/postprocess.hpp"
#include "actdet/proposals.hpp"
#include "actdet/refinement.hpp"
#include "actdet/synthgen.hpp"

namespace actdet {

enum class LinkStrategy { greedy, tracking };

std::string_view to_string(LinkStrategy s);
std::optional<LinkStrategy> parse_link_strategy(std::string_view s);

struct ScorerConfig {
    /// "oracle" or "heuristic".
    std::string kind = "oracle";
    double epsilon = 0.0;
    double label_noise = 0.0;
    std::uint64_t seed = 0;
    double heuristic_scale = 2.0;
};

void validate(const ScorerConfig& cfg);

/// The oracle needs the ground truth; other scorers ignore it.
std::unique_ptr<Scorer> make_scorer(const ScorerConfig& cfg, std::vector<ActivityInstance> ground_truth,
                                    const LabelPolicy& policy);

struct EvalConfig {
    AlignmentPolicy alignment;
    double target_rfa = 0.15;
    std::vector<double> recall_thresholds{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
};

void validate(const EvalConfig& cfg);

/// Existing corpus used when the pipeline does not synthesize one.
struct InputPaths {
    std::filesystem::path detections;
    std::filesystem::path ground_truth;
    std::filesystem::path meta;
    /// Optional per-frame motion magnitudes for the static filter.
    std::filesystem::path motion;
};

/// File names inside the pipeline output directory.
struct OutputNames {
    std::string tubelets = "tubelets.jsonl";
    std::string proposals = "proposals.jsonl";
    std::string labels = "labels.jsonl";
    std::string vehicle_scored = "scored_vehicle.jsonl";
    std::string person_scored = "scored_person.jsonl";
    std::string instances = "instances.jsonl";
    std::string recall_csv = "recall.csv";
    std::string det_csv = "det.csv";
    std::string summary = "summary.json";
    std::string manifest = "manifest.json";
};

struct PipelineConfig {
    std::size_t workers = 1;
    /// When set the pipeline generates its corpus; otherwise it reads `inputs`.
    std::optional<SceneConfig> synth = SceneConfig{};
    InputPaths inputs;
    LinkStrategy strategy = LinkStrategy::tracking;
    LinkConfig link;
    RefineConfig refine;
    LabelPolicy label;
    ScorerConfig scorer;
    FuseConfig fuse;
    EvalConfig eval;
    OutputNames outputs;
};

/// Checks every component and that no two referenced files coincide.
void validate(const PipelineConfig& cfg);

nlohmann::ordered_json to_json(const PipelineConfig& cfg);
/// Missing keys keep their defaults; unknown keys raise ConfigError.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
PipelineConfig read_pipeline_config(const std::filesystem::path& path);
/// The default configuration with every key spelled out.
nlohmann::ordered_json reference_config();

/// FNV-1a 64 of the compact serialization, as 16 hex digits. The worker count
/// never changes outputs and is left out.
std::string config_hash(const nlohmann::ordered_json& config);

struct StageReport {
    std::string stage;
    double seconds = 0.0;
    std::vector<std::pair<std::string, std::int64_t>> counts;
};

/// A stage error tagged with the stage that raised it.
class StageFailure : public Error {
public:
    StageFailure(std::string stage, std::exception_ptr cause, const std::string& what)
        : Error(what), stage_(std::move(stage)), cause_(std::move(cause)) {}
    const std::string& stage() const noexcept { return stage_; }
    const std::exception_ptr& cause() const noexcept { return cause_; }

private:
    std::string stage_;
    std::exception_ptr cause_;
};

namespace fs = std::filesystem;

StageReport stage_synth(const SceneConfig& cfg, const fs::path& out_dir);
StageReport stage_link(const fs::path& detections, const fs::path& meta, LinkStrategy strategy, const LinkConfig& cfg,
                       std::size_t workers, const fs::path& out);
StageReport stage_refine(const fs::path& tubelets, const fs::path& meta, const RefineConfig& cfg,
                         const std::optional<fs::path>& motion, std::size_t workers, const fs::path& out);
StageReport stage_label(const fs::path& proposals, const fs::path& ground_truth, const LabelPolicy& policy,
                        const fs::path& out);
StageReport stage_score(const fs::path& proposals, const ScorerConfig& scorer,
                        const std::optional<fs::path>& ground_truth, const LabelPolicy& policy, ModelGroup group,
                        std::size_t workers, const fs::path& out);
StageReport stage_fuse(const fs::path& vehicle, const fs::path& person, const FuseConfig& cfg, const fs::path& out);
StageReport stage_eval_recall(const fs::path& tubelets, const fs::path& ground_truth,
                              const std::vector<double>& thresholds, const fs::path& out_csv);
StageReport stage_eval_det(const fs::path& instances, const fs::path& ground_truth, const fs::path& meta,
                           const EvalConfig& cfg, const fs::path& out_csv, const fs::path& out_summary);

/// Every stage in order, writing into `out_dir`. Failures surface as StageFailure.
std::vector<StageReport> run_pipeline(const PipelineConfig& cfg, const fs::path& out_dir);

/// Runs `fn` as stage `name`, timing it and tagging any error with the name.
template <typename Fn>
StageReport run_stage(const std::string& name, Fn&& fn);

void write_run_manifest(const fs::path& path, const std::string& command, const nlohmann::ordered_json& config,
                        const std::vector<StageReport>& reports);

}  // namespace actdet

#include <chrono>

namespace actdet {

template <typename Fn>
StageReport run_stage(const std::string& name, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    StageReport report;
    try {
        report = fn();
    } catch (const StageFailure&) {
        throw;
    } catch (const std::exception& e) {
        throw StageFailure(name, std::current_exception(), e.what());
    }
    report.stage = name;
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

}  // namespace actdet
