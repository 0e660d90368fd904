#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "litmeta/pipeline.hpp"

namespace {

struct CliOptions {
    std::string config_path;
    std::string stage_dir;
    std::string backend;
    bool force = false;
};

int run_stages(const std::vector<litmeta::pipeline::Stage>& stages, const CliOptions& opts) {
    using namespace litmeta::pipeline;

    PipelineConfig cfg;
    try {
        cfg = PipelineConfig::load(opts.config_path);
    } catch (const litmeta::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    RunOptions run;
    run.force = opts.force;
    if (!opts.backend.empty()) {
        run.backend_override = opts.backend == "live" ? BackendKind::Live : BackendKind::Mock;
    }
    if (!opts.stage_dir.empty()) run.output_dir_override = opts.stage_dir;

    for (Stage stage : stages) {
        StageResult result = run_stage(stage, cfg, run);
        if (result.exit_code != kExitOk) {
            std::cerr << "error: " << result.message << "\n";
            return result.exit_code;
        }
        std::cout << result.message << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Batch pipeline for LLM-driven literature review of WRF microphysics usage"};
    app.require_subcommand(1);

    CliOptions opts;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", opts.config_path, "pipeline configuration (JSON)")
            ->required();
        cmd->add_option("--stage-dir", opts.stage_dir, "override the output directory");
        cmd->add_option("--backend", opts.backend, "backend selection")
            ->check(CLI::IsMember({"live", "mock"}));
        cmd->add_flag("--force", opts.force, "ignore up-to-date stamps and rerun");
    };

    std::vector<std::pair<std::string, std::string>> stage_help = {
        {"ingest", "parse engine exports, deduplicate by DOI, apply exclusion rules"},
        {"screen", "coupled-model prefilter plus the LLM relevance gate"},
        {"extract", "run the eight-question extraction over full texts"},
        {"geocode", "resolve simulation-domain names to bounding boxes"},
        {"validate", "compare extractions against gold annotations"},
        {"analyze", "compute all aggregate statistics"},
        {"report", "render the consolidated report and run manifest"},
    };
    for (const auto& [name, help] : stage_help) {
        add_common(app.add_subcommand(name, help));
    }
    add_common(app.add_subcommand("all", "run every stage in order"));

    CLI11_PARSE(app, argc, argv);

    using litmeta::pipeline::Stage;
    std::string sub = app.get_subcommands().front()->get_name();
    std::vector<Stage> stages;
    if (sub == "all") {
        stages = {Stage::Ingest, Stage::Screen, Stage::Extract, Stage::Geocode, Stage::Analyze,
                  Stage::Report};
    } else {
        stages = {litmeta::pipeline::stage_from_string(sub)};
    }
    return run_stages(stages, opts);
}
