#include "cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <optional>

#include "actdet/pipeline.hpp"

namespace actdet {

namespace {

constexpr int kInputError = 1;
constexpr int kStageFailure = 2;

struct ErrorInfo {
    std::string type;
    int exit_code = kStageFailure;
    nlohmann::ordered_json extra = nlohmann::ordered_json::object();
};

ErrorInfo classify(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const ParseError& x) {
        return {"ParseError", kInputError, {{"line", x.line()}}};
    } catch (const SchemaError&) {
        return {"SchemaError", kInputError};
    } catch (const InvariantViolation&) {
        return {"InvariantViolation", kInputError};
    } catch (const ConsistencyError&) {
        return {"ConsistencyError", kInputError};
    } catch (const ConfigError&) {
        return {"ConfigError", kInputError};
    } catch (const IoError&) {
        return {"IoError", kInputError};
    } catch (const InvalidInput&) {
        return {"InvalidInput", kInputError};
    } catch (const ScoringError& x) {
        return {"ScoringError", kStageFailure, {{"proposal_id", x.proposal_id()}}};
    } catch (const UndefinedRecall&) {
        return {"UndefinedRecall", kStageFailure};
    } catch (const std::exception&) {
        return {"Error", kStageFailure};
    } catch (...) {
        return {"unknown", kStageFailure};
    }
}

int report(std::ostream& err, const std::string& stage, const std::exception_ptr& e, const std::string& message) {
    const auto info = classify(e);
    nlohmann::ordered_json j;
    j["stage"] = stage;
    j["type"] = info.type;
    j["message"] = message;
    j["exit_code"] = info.exit_code;
    for (const auto& [k, v] : info.extra.items()) j[k] = v;
    err << nlohmann::ordered_json{{"error", j}}.dump() << '\n';
    return info.exit_code;
}

fs::path manifest_for(const std::string& flag, const fs::path& primary) {
    return flag.empty() ? fs::path(primary.string() + ".manifest.json") : fs::path(flag);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Tubelet-based activity detection pipeline", "actdet"};
    app.require_subcommand(1);

    std::string config_path;
    std::size_t workers = 0;
    std::string manifest;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Pipeline config (JSON); sections supply stage parameters");
        sub->add_option("--workers", workers, "Worker threads (defaults to the config value)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--manifest", manifest, "Run manifest path (defaults to <output>.manifest.json)");
    };

    std::string detections, meta, ground_truth, tubelets, proposals, motion, out_path, out_dir, strategy, group,
        scorer, vehicle, person, instances, summary;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
    add_common(synth);
    synth->add_option("--out-dir", out_dir, "Output directory")->required();

    auto* link = app.add_subcommand("link", "Link detections into tubelets");
    add_common(link);
    link->add_option("--detections", detections)->required();
    link->add_option("--meta", meta)->required();
    link->add_option("--strategy", strategy)->check(CLI::IsMember({"greedy", "tracking"}));
    link->add_option("--out", out_path)->required();

    auto* refine = app.add_subcommand("refine", "Filter, normalize and jitter tubelets into proposals");
    add_common(refine);
    refine->add_option("--tubelets", tubelets)->required();
    refine->add_option("--meta", meta)->required();
    refine->add_option("--motion", motion, "Per-frame motion magnitudes");
    refine->add_option("--out", out_path)->required();

    auto* label = app.add_subcommand("label", "Label proposals against ground truth");
    add_common(label);
    label->add_option("--proposals", proposals)->required();
    label->add_option("--ground-truth", ground_truth)->required();
    label->add_option("--out", out_path)->required();

    auto* score = app.add_subcommand("score", "Score the proposals routed to one model group");
    add_common(score);
    score->add_option("--proposals", proposals)->required();
    score->add_option("--group", group)->required()->check(CLI::IsMember({"vehicle", "person"}));
    score->add_option("--scorer", scorer)->check(CLI::IsMember({"oracle", "heuristic"}));
    score->add_option("--ground-truth", ground_truth, "Required by the oracle scorer");
    score->add_option("--out", out_path)->required();

    auto* fuse_cmd = app.add_subcommand("fuse", "Fuse both models' scored proposals into activity instances");
    add_common(fuse_cmd);
    fuse_cmd->add_option("--vehicle", vehicle)->required();
    fuse_cmd->add_option("--person", person)->required();
    fuse_cmd->add_option("--out", out_path)->required();

    auto* recall = app.add_subcommand("eval-recall", "Tubelet recall at IoU thresholds");
    add_common(recall);
    recall->add_option("--tubelets", tubelets)->required();
    recall->add_option("--ground-truth", ground_truth)->required();
    recall->add_option("--out", out_path, "Recall CSV")->required();

    auto* det = app.add_subcommand("eval-det", "DET curves and p_miss at the target false-alarm rate");
    add_common(det);
    det->add_option("--instances", instances)->required();
    det->add_option("--ground-truth", ground_truth)->required();
    det->add_option("--meta", meta)->required();
    det->add_option("--out", out_path, "DET CSV")->required();
    det->add_option("--summary", summary, "Summary JSON")->required();

    auto* pipeline = app.add_subcommand("pipeline", "Run every stage in sequence");
    add_common(pipeline);
    pipeline->add_option("--out-dir", out_dir, "Output directory")->required();

    auto* config = app.add_subcommand("config", "Print the reference configuration");
    config->add_option("--out", out_path, "Write to a file instead of stdout");

    std::vector<std::string> argv(args.rbegin(), args.rend());
    if (!argv.empty()) argv.pop_back();
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        nlohmann::ordered_json j{{"error",
                                  {{"stage", "arguments"},
                                   {"type", "UsageError"},
                                   {"message", e.what()},
                                   {"exit_code", kInputError}}}};
        err << j.dump() << '\n';
        return kInputError;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    std::string stage = "config";
    try {
        if (command == "config") {
            const auto text = reference_config().dump(2) + "\n";
            if (out_path.empty()) {
                out << text;
            } else {
                const std::filesystem::path target(out_path);
                if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
                std::ofstream f(target, std::ios::binary | std::ios::trunc);
                if (!f) throw IoError("cannot write '" + out_path + "'");
                f << text;
            }
            return 0;
        }

        PipelineConfig cfg;
        if (!config_path.empty()) {
            cfg = read_pipeline_config(config_path);
        }
        if (workers > 0) cfg.workers = workers;
        if (!strategy.empty()) cfg.strategy = *parse_link_strategy(strategy);
        if (!scorer.empty()) cfg.scorer.kind = scorer;
        const auto effective = to_json(cfg);

        stage = command;
        std::vector<StageReport> reports;
        fs::path primary;
        if (command == "synth") {
            if (!cfg.synth) throw ConfigError("config has no synth section");
            reports.push_back(run_stage(command, [&] { return stage_synth(*cfg.synth, out_dir); }));
            primary = fs::path(out_dir) / "synth";
        } else if (command == "link") {
            reports.push_back(run_stage(command, [&] {
                return stage_link(detections, meta, cfg.strategy, cfg.link, cfg.workers, out_path);
            }));
            primary = out_path;
        } else if (command == "refine") {
            const auto m = motion.empty() ? std::nullopt : std::optional<fs::path>(motion);
            reports.push_back(run_stage(
                command, [&] { return stage_refine(tubelets, meta, cfg.refine, m, cfg.workers, out_path); }));
            primary = out_path;
        } else if (command == "label") {
            reports.push_back(
                run_stage(command, [&] { return stage_label(proposals, ground_truth, cfg.label, out_path); }));
            primary = out_path;
        } else if (command == "score") {
            const auto g = *parse_model_group(group);
            const auto gt = ground_truth.empty() ? std::nullopt : std::optional<fs::path>(ground_truth);
            reports.push_back(run_stage(command, [&] {
                return stage_score(proposals, cfg.scorer, gt, cfg.label, g, cfg.workers, out_path);
            }));
            primary = out_path;
        } else if (command == "fuse") {
            reports.push_back(run_stage(command, [&] { return stage_fuse(vehicle, person, cfg.fuse, out_path); }));
            primary = out_path;
        } else if (command == "eval-recall") {
            reports.push_back(run_stage(command, [&] {
                return stage_eval_recall(tubelets, ground_truth, cfg.eval.recall_thresholds, out_path);
            }));
            primary = out_path;
        } else if (command == "eval-det") {
            reports.push_back(run_stage(command, [&] {
                return stage_eval_det(instances, ground_truth, meta, cfg.eval, out_path, summary);
            }));
            primary = out_path;
        } else if (command == "pipeline") {
            reports = run_pipeline(cfg, out_dir);
            const auto path = manifest.empty() ? fs::path(out_dir) / cfg.outputs.manifest : fs::path(manifest);
            write_run_manifest(path, command, effective, reports);
            return 0;
        }
        write_run_manifest(manifest_for(manifest, primary), command, effective, reports);
    } catch (const StageFailure& e) {
        return report(err, e.stage(), e.cause(), e.what());
    } catch (const std::exception& e) {
        return report(err, stage, std::current_exception(), e.what());
    }
    return 0;
}

}  // namespace actdet
