#pragma once

#include <ctime>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "litmeta/analytics.hpp"
#include "litmeta/common.hpp"
#include "litmeta/corpus.hpp"
#include "litmeta/csv.hpp"
#include "litmeta/docstore.hpp"
#include "litmeta/extraction.hpp"
#include "litmeta/llm.hpp"
#include "litmeta/prompts.hpp"
#include "litmeta/screening.hpp"
#include "litmeta/validation.hpp"

namespace litmeta::pipeline {

namespace fs = std::filesystem;

enum class Stage { Ingest, Screen, Extract, Geocode, Validate, Analyze, Report };

inline const std::vector<std::pair<Stage, std::string>>& stage_names() {
    static const std::vector<std::pair<Stage, std::string>> names = {
        {Stage::Ingest, "ingest"},   {Stage::Screen, "screen"},   {Stage::Extract, "extract"},
        {Stage::Geocode, "geocode"}, {Stage::Validate, "validate"}, {Stage::Analyze, "analyze"},
        {Stage::Report, "report"},
    };
    return names;
}

inline std::string to_string(Stage s) {
    for (const auto& [stage, name] : stage_names()) {
        if (stage == s) return name;
    }
    return "ingest";
}

inline Stage stage_from_string(const std::string& s) {
    for (const auto& [stage, name] : stage_names()) {
        if (name == s) return stage;
    }
    throw Error("ConfigInvalid", "unknown stage '" + s + "'");
}

enum class BackendKind { Mock, Live };
enum class ExtractionMode { SingleCall, EightCalls };

// Exit codes per error class.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitPrerequisite = 2;
inline constexpr int kExitBackend = 3;
inline constexpr int kExitData = 4;

struct PipelineConfig {
    // paths (resolved against the config file's directory)
    std::optional<fs::path> wos_csv;
    std::optional<fs::path> scopus_csv;
    fs::path docs_dir;
    fs::path cache_dir;
    fs::path output_dir;

    llm::LlmConfig llm;
    BackendKind backend = BackendKind::Mock;
    std::optional<fs::path> mock_table;

    std::vector<corpus::ExclusionRule> exclusion_rules = corpus::default_exclusion_rules();
    std::optional<fs::path> screening_gold;   // CSV record_id,relevant
    bool strict_yes_no = false;

    std::optional<fs::path> alias_table_path;
    std::optional<fs::path> scheme_meta_path;
    std::optional<fs::path> continents_path;

    double grid_cell_size = 2.5;
    long cooccurrence_threshold = 500;
    size_t top_configs_k = 3;
    ExtractionMode extraction_mode = ExtractionMode::SingleCall;
    size_t context_budget_tokens = 24000;
    std::optional<fs::path> validation_gold;  // extraction-style JSONL
    int current_year = 0;  // 0: use the system clock

    nlohmann::json raw;  // resolved config as loaded, for stamping

    extraction::AliasTable load_alias_table() const {
        return alias_table_path ? extraction::AliasTable::from_file(*alias_table_path)
                                : extraction::AliasTable::defaults();
    }
    extraction::SchemeMetaTable load_scheme_meta() const {
        return scheme_meta_path ? extraction::SchemeMetaTable::from_json(
                                      nlohmann::json::parse(read_file(*scheme_meta_path)))
                                : extraction::SchemeMetaTable::defaults();
    }
    analytics::ContinentTable load_continents() const {
        return continents_path ? analytics::ContinentTable::from_json(
                                     nlohmann::json::parse(read_file(*continents_path)))
                               : analytics::ContinentTable::defaults();
    }

    int effective_year() const {
        if (current_year > 0) return current_year;
        std::time_t t = std::time(nullptr);
        std::tm tm{};
        gmtime_r(&t, &tm);
        return tm.tm_year + 1900;
    }

    static PipelineConfig load(const fs::path& config_path);
    void validate() const;
};

inline PipelineConfig PipelineConfig::load(const fs::path& config_path) {
    auto text = read_file_if_exists(config_path);
    if (!text) throw Error("ConfigInvalid", "config file not found: " + config_path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(*text);
    } catch (const std::exception& e) {
        throw Error("ConfigInvalid", "config is not valid JSON: " + std::string(e.what()));
    }

    fs::path base = fs::absolute(config_path).parent_path();
    auto resolve = [&](const std::string& rel) -> fs::path {
        fs::path p(rel);
        return p.is_absolute() ? p : base / p;
    };

    PipelineConfig cfg;
    cfg.raw = j;
    const auto& paths = j.value("paths", nlohmann::json::object());
    if (paths.contains("wos_csv")) cfg.wos_csv = resolve(paths.at("wos_csv").get<std::string>());
    if (paths.contains("scopus_csv")) {
        cfg.scopus_csv = resolve(paths.at("scopus_csv").get<std::string>());
    }
    cfg.docs_dir = resolve(paths.value("docs_dir", "docs"));
    cfg.cache_dir = resolve(paths.value("cache_dir", "cache"));
    cfg.output_dir = resolve(paths.value("output_dir", "out"));

    if (j.contains("llm")) {
        const auto& l = j.at("llm");
        cfg.llm.model_name = l.value("model_name", cfg.llm.model_name);
        cfg.llm.temperature = l.value("temperature", cfg.llm.temperature);
        cfg.llm.max_output_tokens = l.value("max_output_tokens", cfg.llm.max_output_tokens);
        cfg.llm.endpoint_url = l.value("endpoint_url", cfg.llm.endpoint_url);
        cfg.llm.api_key_env_var = l.value("api_key_env_var", cfg.llm.api_key_env_var);
        cfg.llm.max_parallel_requests =
            l.value("max_parallel_requests", cfg.llm.max_parallel_requests);
        cfg.llm.max_retries = l.value("max_retries", cfg.llm.max_retries);
    }
    if (j.contains("backend")) {
        std::string b = j.at("backend").get<std::string>();
        if (b == "mock") cfg.backend = BackendKind::Mock;
        else if (b == "live") cfg.backend = BackendKind::Live;
        else throw Error("ConfigInvalid", "backend must be 'mock' or 'live', got '" + b + "'");
    }
    if (j.contains("mock_table")) cfg.mock_table = resolve(j.at("mock_table").get<std::string>());

    if (j.contains("exclusion_rules")) {
        cfg.exclusion_rules.clear();
        for (const auto& r : j.at("exclusion_rules")) {
            corpus::ExclusionRule rule;
            std::string kind = r.at("kind").get<std::string>();
            if (kind == "DocType") rule.kind = corpus::RuleKind::DocType;
            else if (kind == "Language") rule.kind = corpus::RuleKind::Language;
            else if (kind == "KeywordOnAbstractOrTitle") {
                rule.kind = corpus::RuleKind::KeywordOnAbstractOrTitle;
            } else {
                throw Error("ConfigInvalid", "exclusion_rules[].kind invalid: '" + kind + "'");
            }
            rule.pattern = r.at("pattern").get<std::string>();
            if (rule.pattern.empty()) throw Error("ConfigInvalid", "exclusion rule pattern empty");
            rule.reason_code = r.at("reason_code").get<std::string>();
            cfg.exclusion_rules.push_back(std::move(rule));
        }
    }

    if (j.contains("screening")) {
        const auto& s = j.at("screening");
        if (s.contains("gold_labels_csv")) {
            cfg.screening_gold = resolve(s.at("gold_labels_csv").get<std::string>());
        }
        cfg.strict_yes_no = s.value("strict_yes_no", false);
    }
    if (j.contains("alias_table")) {
        cfg.alias_table_path = resolve(j.at("alias_table").get<std::string>());
    }
    if (j.contains("scheme_meta")) {
        cfg.scheme_meta_path = resolve(j.at("scheme_meta").get<std::string>());
    }
    if (j.contains("continents")) {
        cfg.continents_path = resolve(j.at("continents").get<std::string>());
    }
    if (j.contains("grid")) {
        cfg.grid_cell_size = j.at("grid").value("cell_size_degrees", cfg.grid_cell_size);
    }
    if (j.contains("cooccurrence")) {
        cfg.cooccurrence_threshold =
            j.at("cooccurrence").value("other_threshold", cfg.cooccurrence_threshold);
        cfg.top_configs_k = j.at("cooccurrence").value("top_k", cfg.top_configs_k);
    }
    if (j.contains("extraction")) {
        const auto& e = j.at("extraction");
        std::string mode = e.value("mode", "single");
        if (mode == "single") cfg.extraction_mode = ExtractionMode::SingleCall;
        else if (mode == "eight") cfg.extraction_mode = ExtractionMode::EightCalls;
        else throw Error("ConfigInvalid", "extraction.mode must be 'single' or 'eight'");
        cfg.context_budget_tokens = e.value("context_budget_tokens", cfg.context_budget_tokens);
    }
    if (j.contains("validation") && j.at("validation").contains("gold_extractions")) {
        cfg.validation_gold = resolve(j.at("validation").at("gold_extractions").get<std::string>());
    }
    cfg.current_year = j.value("current_year", 0);
    return cfg;
}

inline void PipelineConfig::validate() const {
    std::vector<std::string> problems;
    auto check_exists = [&](const std::optional<fs::path>& p, const std::string& field) {
        if (p && !fs::exists(*p)) problems.push_back(field + ": path does not exist: " + p->string());
    };
    if (!wos_csv && !scopus_csv) problems.push_back("paths: need wos_csv and/or scopus_csv");
    check_exists(wos_csv, "paths.wos_csv");
    check_exists(scopus_csv, "paths.scopus_csv");
    check_exists(mock_table, "mock_table");
    check_exists(screening_gold, "screening.gold_labels_csv");
    check_exists(alias_table_path, "alias_table");
    check_exists(scheme_meta_path, "scheme_meta");
    check_exists(continents_path, "continents");
    check_exists(validation_gold, "validation.gold_extractions");
    if (backend == BackendKind::Mock && !mock_table) {
        problems.push_back("backend=mock requires mock_table");
    }
    if (backend == BackendKind::Live && llm.endpoint_url.empty()) {
        problems.push_back("backend=live requires llm.endpoint_url");
    }
    try {
        llm.validate();
    } catch (const Error& e) {
        problems.push_back(std::string("llm: ") + e.what());
    }
    if (grid_cell_size <= 0) problems.push_back("grid.cell_size_degrees must be positive");
    if (cooccurrence_threshold < 0) problems.push_back("cooccurrence.other_threshold must be >= 0");
    if (context_budget_tokens == 0) problems.push_back("extraction.context_budget_tokens must be > 0");
    if (!problems.empty()) {
        std::string message = "invalid configuration:";
        for (const auto& p : problems) message += "\n  - " + p;
        throw Error("ConfigInvalid", message);
    }
}

struct RunOptions {
    bool force = false;
    std::optional<BackendKind> backend_override;
    std::optional<fs::path> output_dir_override;
};

struct StageResult {
    int exit_code = kExitOk;
    bool noop = false;
    std::string message;
};

namespace detail {

inline fs::path stage_dir(const PipelineConfig& cfg, Stage stage) {
    return cfg.output_dir / to_string(stage);
}

inline void write_manifest_entry(const PipelineConfig& cfg, const std::string& key,
                                 const nlohmann::json& value) {
    fs::path manifest_path = cfg.output_dir / "manifest.json";
    nlohmann::json manifest = nlohmann::json::object();
    if (auto text = read_file_if_exists(manifest_path)) {
        auto parsed = nlohmann::json::parse(*text, nullptr, false);
        if (!parsed.is_discarded()) manifest = parsed;
    }
    if (key == "funnel") manifest["funnel"] = value;
    else manifest["stages"][key] = value;
    atomic_write_file(manifest_path, manifest.dump(2) + "\n");
}

inline nlohmann::json read_manifest(const PipelineConfig& cfg) {
    if (auto text = read_file_if_exists(cfg.output_dir / "manifest.json")) {
        auto parsed = nlohmann::json::parse(*text, nullptr, false);
        if (!parsed.is_discarded()) return parsed;
    }
    return nlohmann::json::object();
}

// Content-hash stamp that makes a completed stage a no-op on rerun.
inline uint64_t stage_fingerprint(const PipelineConfig& cfg, Stage stage,
                                  const std::vector<fs::path>& inputs) {
    uint64_t h = fnv1a64(to_string(stage));
    h = fnv1a64(cfg.raw.dump(), h);
    h = fnv1a64(cfg.backend == BackendKind::Mock ? "mock" : "live", h);
    for (const auto& p : inputs) {
        h = fnv1a64(p.filename().string(), h);
        if (auto text = read_file_if_exists(p)) h = fnv1a64(*text, h);
    }
    return h;
}

inline bool stamp_matches(const fs::path& dir, uint64_t fingerprint,
                          const std::vector<std::string>& outputs) {
    auto text = read_file_if_exists(dir / ".stamp.json");
    if (!text) return false;
    auto j = nlohmann::json::parse(*text, nullptr, false);
    if (j.is_discarded()) return false;
    if (j.value("fingerprint", "") != std::to_string(fingerprint)) return false;
    for (const auto& name : outputs) {
        if (!fs::exists(dir / name)) return false;
    }
    return true;
}

inline void write_stamp(const fs::path& dir, uint64_t fingerprint,
                        const std::vector<std::string>& outputs) {
    nlohmann::json j;
    j["fingerprint"] = std::to_string(fingerprint);
    j["outputs"] = outputs;
    atomic_write_file(dir / ".stamp.json", j.dump(2) + "\n");
}

inline std::shared_ptr<llm::ChatBackend> make_backend(const PipelineConfig& cfg);

inline llm::Gateway make_gateway(const PipelineConfig& cfg) {
    llm::GatewayOptions options;
    options.audit_path = cfg.output_dir / "audit.jsonl";
    fs::create_directories(cfg.cache_dir);
    options.cache_path = cfg.cache_dir / "llm_cache.jsonl";
    return llm::Gateway(cfg.llm, make_backend(cfg), std::move(options));
}

// Inputs a stage requires, as (description, path) pairs.
inline std::vector<std::pair<std::string, fs::path>> stage_prerequisites(const PipelineConfig& cfg,
                                                                         Stage stage) {
    fs::path out = cfg.output_dir;
    switch (stage) {
        case Stage::Ingest: return {};
        case Stage::Screen: return {{"ingest corpus snapshot", out / "ingest" / "corpus.jsonl"}};
        case Stage::Extract:
            return {{"ingest corpus snapshot", out / "ingest" / "corpus.jsonl"},
                    {"screening verdicts", out / "screen" / "verdicts.jsonl"}};
        case Stage::Geocode:
            return {{"extraction records", out / "extract" / "extractions.jsonl"}};
        case Stage::Validate:
            return {{"extraction records", out / "extract" / "extractions.jsonl"}};
        case Stage::Analyze:
            return {{"ingest corpus snapshot", out / "ingest" / "corpus.jsonl"},
                    {"geocoded extraction records", out / "geocode" / "extractions.jsonl"}};
        case Stage::Report:
            return {{"analytics output", out / "analyze" / "summary.json"}};
    }
    return {};
}

void run_ingest(const PipelineConfig& cfg, const fs::path& dir);
void run_screen(const PipelineConfig& cfg, const fs::path& dir);
void run_extract(const PipelineConfig& cfg, const fs::path& dir);
void run_geocode(const PipelineConfig& cfg, const fs::path& dir);
void run_validate(const PipelineConfig& cfg, const fs::path& dir);
void run_analyze(const PipelineConfig& cfg, const fs::path& dir);
void run_report(const PipelineConfig& cfg, const fs::path& dir);

}  // namespace detail

// Run one pipeline stage. Outputs are written atomically; rerunning a
// completed stage with unchanged inputs is a no-op unless forced.
inline StageResult run_stage(Stage stage, PipelineConfig cfg, const RunOptions& options = {}) {
    if (options.backend_override) cfg.backend = *options.backend_override;
    if (options.output_dir_override) cfg.output_dir = *options.output_dir_override;
    try {
        cfg.validate();
    } catch (const Error& e) {
        return {kExitConfig, false, e.what()};
    }

    std::vector<fs::path> input_files;
    for (const auto& [description, path] : detail::stage_prerequisites(cfg, stage)) {
        if (!fs::exists(path)) {
            return {kExitPrerequisite, false,
                    "MissingPrerequisite: " + description + " (" + path.string() +
                        "); run the producing stage first"};
        }
        input_files.push_back(path);
    }
    if (stage == Stage::Ingest) {
        if (cfg.wos_csv) input_files.push_back(*cfg.wos_csv);
        if (cfg.scopus_csv) input_files.push_back(*cfg.scopus_csv);
    }
    if (stage == Stage::Validate) {
        if (!cfg.validation_gold) {
            return {kExitConfig, false, "ConfigInvalid: validate requires validation.gold_extractions"};
        }
        input_files.push_back(*cfg.validation_gold);
    }

    fs::path dir = detail::stage_dir(cfg, stage);
    fs::create_directories(dir);
    uint64_t fingerprint = detail::stage_fingerprint(cfg, stage, input_files);

    // outputs per stage for the no-op check
    static const std::map<Stage, std::vector<std::string>> stage_outputs = {
        {Stage::Ingest, {"corpus.jsonl", "excluded.csv"}},
        {Stage::Screen, {"verdicts.jsonl", "prefilter_dropped.csv"}},
        {Stage::Extract, {"extractions.jsonl"}},
        {Stage::Geocode, {"extractions.jsonl"}},
        {Stage::Validate, {"table1.csv", "error_tags.csv"}},
        {Stage::Analyze, {"summary.json"}},
        {Stage::Report, {"report.md", "report.json"}},
    };
    const auto& outputs = stage_outputs.at(stage);
    if (!options.force && detail::stamp_matches(dir, fingerprint, outputs)) {
        return {kExitOk, true, to_string(stage) + ": up to date"};
    }

    try {
        switch (stage) {
            case Stage::Ingest: detail::run_ingest(cfg, dir); break;
            case Stage::Screen: detail::run_screen(cfg, dir); break;
            case Stage::Extract: detail::run_extract(cfg, dir); break;
            case Stage::Geocode: detail::run_geocode(cfg, dir); break;
            case Stage::Validate: detail::run_validate(cfg, dir); break;
            case Stage::Analyze: detail::run_analyze(cfg, dir); break;
            case Stage::Report: detail::run_report(cfg, dir); break;
        }
    } catch (const Error& e) {
        int code = kExitData;
        if (e.kind() == "ConfigInvalid") code = kExitConfig;
        else if (e.kind() == "MissingPrerequisite") code = kExitPrerequisite;
        else if (e.kind() == "BackendUnavailable" || e.kind() == "AuthError" ||
                 e.kind() == "BudgetExceeded") {
            code = kExitBackend;
        }
        return {code, false, e.what()};
    } catch (const std::exception& e) {
        return {kExitData, false, e.what()};
    }

    detail::write_stamp(dir, fingerprint, outputs);
    return {kExitOk, false, to_string(stage) + ": done"};
}

inline StageResult run_stage(const std::string& stage_name, const PipelineConfig& cfg,
                             const RunOptions& options = {}) {
    return run_stage(stage_from_string(stage_name), cfg, options);
}

}  // namespace litmeta::pipeline

#include "litmeta/pipeline_stages.hpp"
