#pragma once

// Stage bodies for pipeline.hpp. Split out to keep the orchestration file
// readable; this header is included at the bottom of pipeline.hpp.

#include "litmeta/llm_http.hpp"

namespace litmeta::pipeline::detail {

inline bool is_backend_error(const std::string& message) {
    return message.rfind("BackendUnavailable", 0) == 0 || message.rfind("AuthError", 0) == 0 ||
           message.rfind("BudgetExceeded", 0) == 0;
}

inline std::shared_ptr<llm::ChatBackend> make_backend(const PipelineConfig& cfg) {
    if (cfg.backend == BackendKind::Mock) {
        return llm::MockBackend::from_file(*cfg.mock_table);
    }
    return std::make_shared<llm::HttpBackend>(cfg.llm.endpoint_url);
}

// ---------------------------------------------------------------------------
// ingest

inline void run_ingest(const PipelineConfig& cfg, const fs::path& dir) {
    std::vector<corpus::BibRecord> all;
    nlohmann::json manifest;
    long row_errors = 0;
    std::string errors_csv = "engine,row,message\n";

    auto ingest_engine = [&](const fs::path& path, corpus::SourceEngine engine) {
        auto parsed = corpus::parse_export(read_file(path), engine, cfg.effective_year());
        manifest[engine == corpus::SourceEngine::WebOfScience ? "raw_wos" : "raw_scopus"] =
            parsed.records.size() + parsed.errors.size();
        for (const auto& e : parsed.errors) {
            ++row_errors;
            errors_csv += csv::write_row({corpus::to_string(engine), std::to_string(e.row),
                                          e.message});
        }
        all.insert(all.end(), parsed.records.begin(), parsed.records.end());
    };
    if (cfg.wos_csv) ingest_engine(*cfg.wos_csv, corpus::SourceEngine::WebOfScience);
    if (cfg.scopus_csv) ingest_engine(*cfg.scopus_csv, corpus::SourceEngine::Scopus);

    auto deduped = corpus::dedup(all);
    auto screened = corpus::apply_exclusions(deduped.kept, cfg.exclusion_rules);

    std::string excluded_csv = "record_id,reason_code\n";
    for (const auto& [rec, reason] : screened.excluded) {
        excluded_csv += csv::write_row({rec.record_id, reason});
    }

    atomic_write_file(dir / "corpus.jsonl", corpus::to_jsonl(screened.kept));
    atomic_write_file(dir / "excluded.csv", excluded_csv);
    atomic_write_file(dir / "dedup_removed.jsonl", corpus::to_jsonl(deduped.removed));
    atomic_write_file(dir / "row_errors.csv", errors_csv);

    manifest["row_errors"] = row_errors;
    manifest["after_dedup"] = deduped.kept.size();
    manifest["duplicates_removed"] = deduped.removed.size();
    manifest["excluded"] = screened.excluded.size();
    manifest["ingested"] = screened.kept.size();
    write_manifest_entry(cfg, "ingest", manifest);
}

// ---------------------------------------------------------------------------
// screen

inline void run_screen(const PipelineConfig& cfg, const fs::path& dir) {
    auto records = corpus::records_from_jsonl(read_file(cfg.output_dir / "ingest" / "corpus.jsonl"));
    auto prefiltered = screening::coupled_model_prefilter(records);

    std::string dropped_csv = "record_id,keyword\n";
    for (const auto& [rec, keyword] : prefiltered.dropped) {
        dropped_csv += csv::write_row({rec.record_id, keyword});
    }

    llm::Gateway gateway = make_gateway(cfg);
    screening::ScreenOptions options;
    options.strict_parse = cfg.strict_yes_no;
    options.workers = cfg.llm.max_parallel_requests;
    auto result = screening::screen(prefiltered.kept, gateway, options);

    // per-record errors are recorded, but a backend that serves nothing
    // fails the whole stage
    if (!prefiltered.kept.empty() && result.verdicts.empty() && !result.errors.empty() &&
        is_backend_error(result.errors.front().second)) {
        throw Error("BackendUnavailable",
                    "no record could be screened: " + result.errors.front().second);
    }

    std::string errors_csv = "record_id,message\n";
    for (const auto& [id, message] : result.errors) {
        errors_csv += csv::write_row({id, message});
    }

    long relevant = 0, not_relevant = 0, unparseable = 0;
    for (const auto& v : result.verdicts) {
        if (v.verdict == screening::Relevance::Relevant) ++relevant;
        else if (v.verdict == screening::Relevance::NotRelevant) ++not_relevant;
        else ++unparseable;
    }

    atomic_write_file(dir / "verdicts.jsonl", screening::verdicts_to_jsonl(result.verdicts));
    atomic_write_file(dir / "prefilter_dropped.csv", dropped_csv);
    atomic_write_file(dir / "errors.csv", errors_csv);

    nlohmann::json manifest;
    manifest["input"] = records.size();
    manifest["prefiltered"] = prefiltered.kept.size();
    manifest["dropped_coupled_model"] = prefiltered.dropped.size();
    manifest["relevant"] = relevant;
    manifest["not_relevant"] = not_relevant;
    manifest["unparseable"] = unparseable;
    manifest["errors"] = result.errors.size();

    if (cfg.screening_gold) {
        auto gold = screening::gold_labels_from_csv(read_file(*cfg.screening_gold));
        auto report = screening::screening_accuracy(result.verdicts, gold);
        atomic_write_file(dir / "accuracy.json", report.to_json().dump(2) + "\n");
        manifest["accuracy"] = report.accuracy;
    }
    write_manifest_entry(cfg, "screen", manifest);
}

// ---------------------------------------------------------------------------
// extract

inline void run_extract(const PipelineConfig& cfg, const fs::path& dir) {
    auto records = corpus::records_from_jsonl(read_file(cfg.output_dir / "ingest" / "corpus.jsonl"));
    auto verdicts =
        screening::verdicts_from_jsonl(read_file(cfg.output_dir / "screen" / "verdicts.jsonl"));

    std::map<std::string, const corpus::BibRecord*> by_id;
    for (const auto& r : records) by_id[r.record_id] = &r;

    std::vector<const corpus::BibRecord*> relevant;
    for (const auto& v : verdicts) {
        if (v.verdict != screening::Relevance::Relevant) continue;
        auto it = by_id.find(v.record_id);
        if (it != by_id.end()) relevant.push_back(it->second);
    }

    doc::DocStore store(cfg.docs_dir, cfg.cache_dir / "text");
    llm::Gateway gateway = make_gateway(cfg);
    auto alias_table = cfg.load_alias_table();

    struct Failure {
        std::string record_id;
        std::string kind;
        std::string detail;
        std::string raw;  // unsplittable response, kept for audit
    };
    std::vector<std::optional<extraction::ExtractionRecord>> slots(relevant.size());
    std::vector<std::optional<Failure>> failures(relevant.size());

    parallel_for(relevant.size(), cfg.llm.max_parallel_requests, [&](size_t i) {
        const auto& rec = *relevant[i];
        try {
            doc::DocText text = store.load(rec.record_id);
            auto mode = cfg.extraction_mode == ExtractionMode::SingleCall
                            ? extraction::ExtractionCallMode::SingleCall
                            : extraction::ExtractionCallMode::PerQuestion;
            auto answers =
                extraction::run_extraction(text, gateway, cfg.context_budget_tokens, mode);
            slots[i] = extraction::assemble_extraction(rec.record_id, answers, alias_table);
        } catch (const Error& e) {
            // SplitFailure keeps the raw completion: it is the most recent
            // extraction exchange in the audit trail for this record
            std::string raw;
            if (e.kind() == "SplitFailure") {
                for (const auto& exchange : gateway.audit().snapshot()) {
                    if (exchange.record_id == rec.record_id &&
                        exchange.prompt_id == llm::PromptId::Extraction) {
                        raw = exchange.response_text;
                    }
                }
            }
            failures[i] = Failure{rec.record_id, e.kind(), e.what(), raw};
        }
    });

    std::vector<extraction::ExtractionRecord> extracted;
    long missing = 0, split_failures = 0, unreadable = 0, backend_errors = 0;
    bool any_success = false;
    for (const auto& slot : slots) {
        if (slot) any_success = true;
    }
    if (!relevant.empty() && !any_success && failures.front() &&
        is_backend_error(failures.front()->kind)) {
        throw Error("BackendUnavailable",
                    "no document could be extracted: " + failures.front()->detail);
    }
    std::string failures_csv = "record_id,kind,message\n";
    std::string failures_raw;
    for (size_t i = 0; i < relevant.size(); ++i) {
        if (slots[i]) {
            extracted.push_back(std::move(*slots[i]));
            continue;
        }
        const auto& f = *failures[i];
        failures_csv += csv::write_row({f.record_id, f.kind, f.detail});
        if (f.kind == "MissingDocument") ++missing;
        else if (f.kind == "SplitFailure") {
            ++split_failures;
            failures_raw +=
                nlohmann::json{{"record_id", f.record_id}, {"response", f.raw}}.dump() + "\n";
        } else if (f.kind == "UnreadablePdf" || f.kind == "EmptyText") ++unreadable;
        else ++backend_errors;
    }
    std::sort(extracted.begin(), extracted.end(),
              [](const auto& a, const auto& b) { return a.record_id < b.record_id; });

    atomic_write_file(dir / "extractions.jsonl", extraction::extractions_to_jsonl(extracted));
    atomic_write_file(dir / "failures.csv", failures_csv);
    atomic_write_file(dir / "failures_raw.jsonl", failures_raw);

    nlohmann::json manifest;
    manifest["relevant"] = relevant.size();
    manifest["extracted"] = extracted.size();
    manifest["missing_fulltext"] = missing;
    manifest["split_failures"] = split_failures;
    manifest["unreadable_documents"] = unreadable;
    manifest["backend_errors"] = backend_errors;
    write_manifest_entry(cfg, "extract", manifest);
}

// ---------------------------------------------------------------------------
// geocode

inline void run_geocode(const PipelineConfig& cfg, const fs::path& dir) {
    auto extractions = extraction::extractions_from_jsonl(
        read_file(cfg.output_dir / "extract" / "extractions.jsonl"));

    // geocode each distinct domain once, in parallel
    std::map<std::string, std::string> domain_spelling;  // normalized -> first spelling
    for (const auto& rec : extractions) {
        if (rec.domain_name.empty() || rec.geo_box) continue;
        std::string key = to_lower(collapse_whitespace(rec.domain_name));
        domain_spelling.emplace(key, rec.domain_name);
    }
    std::vector<std::pair<std::string, std::string>> domains(domain_spelling.begin(),
                                                             domain_spelling.end());

    llm::Gateway gateway = make_gateway(cfg);
    extraction::Geocoder geocoder(gateway);
    std::vector<std::optional<extraction::GeoBox>> boxes(domains.size());
    std::vector<std::optional<std::string>> errors(domains.size());
    parallel_for(domains.size(), cfg.llm.max_parallel_requests, [&](size_t i) {
        try {
            boxes[i] = geocoder.geocode(domains[i].second);
        } catch (const Error& e) {
            errors[i] = e.what();
        }
    });

    if (!domains.empty() && errors.size() == boxes.size()) {
        bool all_failed_backend = true;
        for (size_t i = 0; i < domains.size(); ++i) {
            if (boxes[i] || !errors[i] || !is_backend_error(*errors[i])) {
                all_failed_backend = false;
                break;
            }
        }
        if (all_failed_backend) {
            throw Error("BackendUnavailable", "no domain could be geocoded: " + *errors.front());
        }
    }

    std::map<std::string, extraction::GeoBox> resolved;
    std::string failures_csv = "domain,message\n";
    long failed = 0;
    for (size_t i = 0; i < domains.size(); ++i) {
        if (boxes[i]) {
            resolved[domains[i].first] = *boxes[i];
        } else {
            ++failed;
            failures_csv += csv::write_row({domains[i].second, *errors[i]});
        }
    }

    long with_box = 0;
    for (auto& rec : extractions) {
        if (!rec.geo_box && !rec.domain_name.empty()) {
            auto it = resolved.find(to_lower(collapse_whitespace(rec.domain_name)));
            if (it != resolved.end()) rec.geo_box = it->second;
        }
        if (rec.geo_box) ++with_box;
    }

    atomic_write_file(dir / "extractions.jsonl", extraction::extractions_to_jsonl(extractions));
    atomic_write_file(dir / "failures.csv", failures_csv);

    nlohmann::json manifest;
    manifest["records"] = extractions.size();
    manifest["distinct_domains"] = domains.size();
    manifest["geocoded_domains"] = domains.size() - failed;
    manifest["failed_domains"] = failed;
    manifest["records_with_box"] = with_box;
    write_manifest_entry(cfg, "geocode", manifest);
}

// ---------------------------------------------------------------------------
// validate

inline void run_validate(const PipelineConfig& cfg, const fs::path& dir) {
    auto extractions = extraction::extractions_from_jsonl(
        read_file(cfg.output_dir / "extract" / "extractions.jsonl"));
    auto gold = validation::gold_from_jsonl(read_file(*cfg.validation_gold));

    auto result = validation::compare(extractions, gold);
    auto tags = validation::tag_errors(result.disagreements);

    atomic_write_file(dir / "table1.csv", validation::report_csv(result));
    atomic_write_file(dir / "error_tags.csv", validation::tags_csv(tags));

    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : result.rows) {
        rows.push_back({{"question_id", row.question_id},
                        {"name", row.name},
                        {"matches", row.matches},
                        {"total", row.total},
                        {"accuracy", row.accuracy()}});
    }
    nlohmann::json report;
    report["rows"] = std::move(rows);
    report["average_accuracy"] = result.average_accuracy();
    report["disagreements"] = result.disagreements.size();
    atomic_write_file(dir / "report.json", report.dump(2) + "\n");

    nlohmann::json manifest;
    manifest["gold_records"] = gold.size();
    manifest["average_accuracy"] = result.average_accuracy();
    manifest["disagreements"] = result.disagreements.size();
    write_manifest_entry(cfg, "validate", manifest);
}

// ---------------------------------------------------------------------------
// analyze

inline void run_analyze(const PipelineConfig& cfg, const fs::path& dir) {
    auto records = corpus::records_from_jsonl(read_file(cfg.output_dir / "ingest" / "corpus.jsonl"));
    auto extractions = extraction::extractions_from_jsonl(
        read_file(cfg.output_dir / "geocode" / "extractions.jsonl"));
    auto meta = cfg.load_scheme_meta();
    auto continents = cfg.load_continents();

    nlohmann::json summary;

    // corpus statistics
    auto yearly = analytics::pubs_and_authors_per_year(records);
    summary["corpus"]["total"] = records.size();
    summary["corpus"]["per_year"] = yearly.counts.to_json();
    summary["corpus"]["mean_authors"] = yearly.mean_authors.to_json();
    atomic_write_file(dir / "pubs_per_year.csv",
                      analytics::year_series_csv({{"publications", &yearly.counts},
                                                  {"mean_authors", &yearly.mean_authors}}));

    auto journals = analytics::journal_stats(records, 15);
    {
        std::string csv_text = "journal,pub_count,mean_citations,median_citations\n";
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& row : journals) {
            csv_text += csv::write_row(
                {row.journal, std::to_string(row.pub_count),
                 row.mean_citations ? format_trimmed(*row.mean_citations, 1) : "",
                 row.median_citations ? format_trimmed(*row.median_citations, 1) : ""});
            nlohmann::json r{{"journal", row.journal}, {"pub_count", row.pub_count}};
            if (row.mean_citations) r["mean_citations"] = *row.mean_citations;
            if (row.median_citations) r["median_citations"] = *row.median_citations;
            rows.push_back(std::move(r));
        }
        atomic_write_file(dir / "journal_stats.csv", csv_text);
        summary["journals"] = std::move(rows);
    }

    auto geo = analytics::country_institution_counts(records);
    {
        auto table_csv = [](const std::vector<std::pair<std::string, long>>& rows,
                            const char* label) {
            std::string out = std::string(label) + ",pub_count\n";
            for (const auto& [name, count] : rows) {
                out += csv::write_row({name, std::to_string(count)});
            }
            return out;
        };
        atomic_write_file(dir / "countries.csv", table_csv(geo.countries, "country"));
        atomic_write_file(dir / "institutions.csv", table_csv(geo.institutions, "institution"));
        summary["countries"] = geo.countries;
        summary["institutions"] = geo.institutions;
        summary["geo_excluded"] = geo.excluded;
    }

    // temporal scheme usage and adoption lag
    std::map<std::string, int> pub_years;
    for (const auto& r : records) pub_years[r.record_id] = r.pub_date.year;
    auto usage = analytics::scheme_usage_by_year(extractions, pub_years, meta);
    {
        std::vector<std::pair<std::string, const analytics::YearSeries*>> columns;
        nlohmann::json usage_json = nlohmann::json::object();
        for (const auto& [scheme, series] : usage.per_scheme) {
            usage_json[to_string(scheme)] = series.to_json();
        }
        std::vector<std::string> names;
        for (const auto& [scheme, series] : usage.per_scheme) names.push_back(to_string(scheme));
        size_t idx = 0;
        for (const auto& [scheme, series] : usage.per_scheme) {
            columns.push_back({names[idx++], &series});
        }
        atomic_write_file(dir / "scheme_usage.csv", analytics::year_series_csv(columns));
        summary["scheme_usage"] = std::move(usage_json);

        nlohmann::json shares_json = nlohmann::json::object();
        std::vector<std::pair<std::string, const analytics::YearSeries*>> share_columns;
        for (const auto& [cls, series] : usage.class_shares) {
            shares_json[to_string(cls)] = series.to_json();
            share_columns.push_back({to_string(cls), &series});
        }
        atomic_write_file(dir / "moment_shares.csv", analytics::year_series_csv(share_columns));
        summary["moment_shares"] = std::move(shares_json);
    }
    {
        auto lags = analytics::adoption_lag(meta, usage);
        std::string csv_text = "scheme,code_year,first_use_year,lag\n";
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& row : lags.rows) {
            csv_text += csv::write_row({to_string(row.scheme), std::to_string(row.code_year),
                                        std::to_string(row.first_use_year),
                                        std::to_string(row.lag)});
            rows.push_back({{"scheme", to_string(row.scheme)},
                            {"code_year", row.code_year},
                            {"first_use_year", row.first_use_year},
                            {"lag", row.lag}});
        }
        atomic_write_file(dir / "adoption_lag.csv", csv_text);
        summary["adoption_lag"] = std::move(rows);
    }

    // gridded maps
    {
        auto all = analytics::grid_counts(extractions, std::nullopt, cfg.grid_cell_size);
        atomic_write_file(dir / "grid_all.csv", analytics::grid_csv(all.map));
        atomic_write_file(dir / "grid_all.json", analytics::grid_json(all.map).dump(2) + "\n");
        atomic_write_file(dir / "grid_all.geojson",
                          analytics::grid_geojson(all.map).dump(2) + "\n");
        summary["grid"]["skipped_no_box"] = all.skipped_no_box;
        summary["grid"]["nonzero_cells"] = all.map.cells.size();

        for (const auto scheme : extraction::main_schemes()) {
            extraction::SchemeId id{scheme};
            auto per = analytics::grid_counts(extractions, id, cfg.grid_cell_size);
            auto diff = analytics::bias_difference_map(extractions, id, cfg.grid_cell_size);
            if (per.map.cells.empty() && diff.map.cells.empty()) continue;
            std::string base = "grid_" + to_lower(to_string(id));
            atomic_write_file(dir / (base + ".csv"), analytics::grid_csv(per.map));
            atomic_write_file(dir / (base + ".json"),
                              analytics::grid_json(per.map).dump(2) + "\n");
            atomic_write_file(dir / (base + ".geojson"),
                              analytics::grid_geojson(per.map).dump(2) + "\n");
            std::string diff_base = "bias_diff_" + to_lower(to_string(id));
            atomic_write_file(dir / (diff_base + ".csv"), analytics::grid_csv(diff.map));
            atomic_write_file(dir / (diff_base + ".json"),
                              analytics::grid_json(diff.map).dump(2) + "\n");
            atomic_write_file(dir / (diff_base + ".geojson"),
                              analytics::grid_geojson(diff.map).dump(2) + "\n");
        }
    }

    // co-occurrence and configurations
    {
        auto rows = analytics::cooccurrence_table(extractions, cfg.cooccurrence_threshold);
        std::string csv_text = "category,name,count,percent\n";
        nlohmann::json rows_json = nlohmann::json::array();
        for (const auto& row : rows) {
            csv_text += csv::write_row({row.category, row.name, std::to_string(row.count),
                                        format_fixed(row.percent, 1)});
            rows_json.push_back({{"category", row.category},
                                 {"name", row.name},
                                 {"count", row.count},
                                 {"percent", row.percent}});
        }
        atomic_write_file(dir / "cooccurrence.csv", csv_text);
        summary["cooccurrence"] = std::move(rows_json);
        long total_configs = 0;
        for (const auto& rec : extractions) total_configs += rec.configs.size();
        summary["total_configurations"] = total_configs;
    }
    {
        auto top = analytics::top_configs_per_scheme(extractions, cfg.top_configs_k);
        std::string csv_text = "scheme,rank,configuration,count\n";
        nlohmann::json top_json = nlohmann::json::object();
        for (const auto& [scheme, rows] : top) {
            nlohmann::json list = nlohmann::json::array();
            for (size_t i = 0; i < rows.size(); ++i) {
                csv_text += csv::write_row({to_string(scheme), std::to_string(i + 1),
                                            rows[i].tuple_key, std::to_string(rows[i].count)});
                list.push_back({{"configuration", rows[i].tuple_key}, {"count", rows[i].count}});
            }
            top_json[to_string(scheme)] = std::move(list);
        }
        atomic_write_file(dir / "top_configs.csv", csv_text);
        summary["top_configs"] = std::move(top_json);
    }

    // bias tallies
    auto tally_json = [](const std::vector<analytics::BiasTallyRow>& rows) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& row : rows) {
            nlohmann::json r{{"scheme", to_string(row.scheme)},
                             {"n_over", row.n_over},
                             {"n_under", row.n_under}};
            if (row.pct_over) r["pct_over"] = *row.pct_over;
            out.push_back(std::move(r));
        }
        return out;
    };
    auto tally_csv = [](const std::vector<analytics::BiasTallyRow>& rows) {
        std::string out = "scheme,n_over,n_under,pct_over\n";
        for (const auto& row : rows) {
            out += csv::write_row({to_string(row.scheme), std::to_string(row.n_over),
                                   std::to_string(row.n_under),
                                   row.pct_over ? format_fixed(*row.pct_over, 3) : ""});
        }
        return out;
    };
    {
        auto all_rows = analytics::bias_tally(extractions);
        auto popular_rows =
            analytics::bias_tally(extractions, analytics::TupleFilter::most_popular());
        atomic_write_file(dir / "bias_tally.csv", tally_csv(all_rows));
        atomic_write_file(dir / "bias_tally_popular.csv", tally_csv(popular_rows));
        summary["bias_tally"] = tally_json(all_rows);
        summary["bias_tally_popular"] = tally_json(popular_rows);
    }

    // metric distributions and scatter
    {
        auto dist = analytics::metric_distributions(extractions, continents);
        std::string csv_text = "kind,scheme,n,median,q1,q3,whisker_low,whisker_high,outliers\n";
        nlohmann::json rmse_json = nlohmann::json::object();
        nlohmann::json cc_json = nlohmann::json::object();
        auto emit = [&](const char* kind, const std::map<extraction::SchemeId,
                                                         analytics::BoxplotStats>& stats,
                        nlohmann::json& out) {
            for (const auto& [scheme, s] : stats) {
                csv_text += csv::write_row(
                    {kind, to_string(scheme), std::to_string(s.n), format_fixed(s.median, 2),
                     format_fixed(s.q1, 3), format_fixed(s.q3, 3), format_fixed(s.whisker_low, 3),
                     format_fixed(s.whisker_high, 3), std::to_string(s.outliers.size())});
                out[to_string(scheme)] = s.to_json();
            }
        };
        emit("RMSE", dist.rmse, rmse_json);
        emit("CC", dist.cc, cc_json);
        atomic_write_file(dir / "metrics_boxplot.csv", csv_text);
        summary["metrics"]["rmse"] = std::move(rmse_json);
        summary["metrics"]["cc"] = std::move(cc_json);
        summary["metrics"]["unattributed_samples"] = dist.unattributed_samples;

        std::string scatter_csv = "record_id,scheme,rmse_mm_day,cc,continent\n";
        nlohmann::json scatter_json = nlohmann::json::array();
        for (const auto& row : dist.scatter) {
            scatter_csv += csv::write_row({row.record_id, to_string(row.scheme),
                                           format_trimmed(row.rmse, 6), format_trimmed(row.cc, 6),
                                           to_string(row.continent)});
            scatter_json.push_back({{"record_id", row.record_id},
                                    {"scheme", to_string(row.scheme)},
                                    {"rmse", row.rmse},
                                    {"cc", row.cc},
                                    {"continent", to_string(row.continent)}});
        }
        atomic_write_file(dir / "scatter.csv", scatter_csv);
        summary["scatter"] = std::move(scatter_json);
    }

    // each analytic also ships as its own JSON file next to its CSV
    for (const char* key :
         {"journals", "countries", "institutions", "scheme_usage", "moment_shares",
          "adoption_lag", "cooccurrence", "top_configs", "bias_tally", "bias_tally_popular",
          "scatter"}) {
        atomic_write_file(dir / (std::string(key) + ".json"), summary.at(key).dump(2) + "\n");
    }
    atomic_write_file(dir / "pubs_per_year.json", summary.at("corpus").dump(2) + "\n");
    atomic_write_file(dir / "metrics_boxplot.json", summary.at("metrics").dump(2) + "\n");

    atomic_write_file(dir / "summary.json", summary.dump(2) + "\n");

    nlohmann::json manifest;
    manifest["records"] = records.size();
    manifest["extractions"] = extractions.size();
    manifest["total_configurations"] = summary["total_configurations"];
    write_manifest_entry(cfg, "analyze", manifest);
}

// ---------------------------------------------------------------------------
// report

inline void run_report(const PipelineConfig& cfg, const fs::path& dir) {
    auto summary =
        nlohmann::json::parse(read_file(cfg.output_dir / "analyze" / "summary.json"));
    auto manifest = read_manifest(cfg);
    const auto& stages = manifest.value("stages", nlohmann::json::object());

    nlohmann::json funnel;
    auto stage_count = [&](const char* stage, const char* key) -> std::optional<long> {
        if (stages.contains(stage) && stages.at(stage).contains(key)) {
            return stages.at(stage).at(key).get<long>();
        }
        return std::nullopt;
    };
    if (auto v = stage_count("ingest", "ingested")) funnel["ingested"] = *v;
    if (auto v = stage_count("screen", "prefiltered")) funnel["prefiltered"] = *v;
    if (auto v = stage_count("screen", "relevant")) funnel["relevant"] = *v;
    if (auto v = stage_count("extract", "extracted")) funnel["extracted"] = *v;

    std::string md;
    md += "# WRF microphysics literature review report\n\n";

    md += "## Pipeline funnel\n\n";
    md += "| stage | publications |\n|---|---|\n";
    for (const char* key : {"ingested", "prefiltered", "relevant", "extracted"}) {
        if (funnel.contains(key)) {
            md += std::string("| ") + key + " | " + std::to_string(funnel.at(key).get<long>()) +
                  " |\n";
        }
    }
    md += "\n";

    md += "## Corpus\n\n";
    md += "Total publications: " + std::to_string(summary["corpus"]["total"].get<long>()) + "\n\n";
    if (summary.contains("journals") && !summary["journals"].empty()) {
        md += "Top journals (publications, mean/median citations):\n\n";
        for (const auto& j : summary["journals"]) {
            md += "- " + j.at("journal").get<std::string>() + ": " +
                  std::to_string(j.at("pub_count").get<long>());
            if (j.contains("mean_citations")) {
                md += ", mean " + format_trimmed(j.at("mean_citations").get<double>(), 1) +
                      " / median " + format_trimmed(j.at("median_citations").get<double>(), 1) +
                      " citations";
            }
            md += "\n";
        }
        md += "\n";
    }
    if (summary.contains("countries") && !summary["countries"].empty()) {
        md += "Top countries: ";
        size_t shown = 0;
        for (const auto& c : summary["countries"]) {
            if (shown++) md += ", ";
            md += c.at(0).get<std::string>() + " (" + std::to_string(c.at(1).get<long>()) + ")";
            if (shown >= 5) break;
        }
        md += "\n\n";
    }

    md += "## Microphysics scheme usage\n\n";
    if (summary.contains("scheme_usage")) {
        for (const auto& [scheme, series] : summary["scheme_usage"].items()) {
            long total = 0;
            for (const auto& [year, count] : series.items()) {
                total += static_cast<long>(count.get<double>());
            }
            md += "- " + scheme + ": " + std::to_string(total) + " publications\n";
        }
        md += "\n";
    }
    if (summary.contains("adoption_lag") && !summary["adoption_lag"].empty()) {
        md += "Adoption lag (code year -> first use):\n\n";
        for (const auto& row : summary["adoption_lag"]) {
            md += "- " + row.at("scheme").get<std::string>() + ": " +
                  std::to_string(row.at("code_year").get<int>()) + " -> " +
                  std::to_string(row.at("first_use_year").get<int>()) + " (lag " +
                  std::to_string(row.at("lag").get<int>()) + ")\n";
        }
        md += "\n";
    }

    md += "## Co-occurrence of parameterizations (share of configurations)\n\n";
    if (summary.contains("cooccurrence")) {
        std::string current;
        for (const auto& row : summary["cooccurrence"]) {
            std::string category = row.at("category").get<std::string>();
            if (category != current) {
                if (!current.empty()) md += "\n";
                md += "### " + category + "\n\n";
                current = category;
            }
            md += "- " + row.at("name").get<std::string>() + " " +
                  format_fixed(row.at("percent").get<double>(), 1) + "% (" +
                  std::to_string(row.at("count").get<long>()) + ")\n";
        }
        md += "\n";
    }

    md += "## Most used configurations per scheme\n\n";
    if (summary.contains("top_configs")) {
        for (const auto& [scheme, rows] : summary["top_configs"].items()) {
            md += "- " + scheme + ": ";
            size_t shown = 0;
            for (const auto& row : rows) {
                if (shown++) md += "; ";
                md += row.at("configuration").get<std::string>() + " (" +
                      std::to_string(row.at("count").get<long>()) + ")";
            }
            md += "\n";
        }
        md += "\n";
    }

    md += "## Bias verdicts\n\n";
    auto render_tally = [&](const char* key, const char* title) {
        if (!summary.contains(key) || summary[key].empty()) return;
        md += std::string("### ") + title + "\n\n";
        for (const auto& row : summary[key]) {
            md += "- " + row.at("scheme").get<std::string>() + ": " +
                  std::to_string(row.at("n_over").get<long>()) + " over / " +
                  std::to_string(row.at("n_under").get<long>()) + " under";
            if (row.contains("pct_over")) {
                md += " (" + format_fixed(100.0 * row.at("pct_over").get<double>(), 1) +
                      "% overestimation)";
            }
            md += "\n";
        }
        md += "\n";
    };
    render_tally("bias_tally", "All configurations");
    render_tally("bias_tally_popular", "Most popular configuration (RRTM/Dudhia-KF-YSU-Noah)");

    md += "## Metric distributions\n\n";
    if (summary["metrics"].contains("rmse")) {
        md += "### RMSE (mm/day)\n\n";
        for (const auto& [scheme, s] : summary["metrics"]["rmse"].items()) {
            md += "- " + scheme + ": median " + format_fixed(s.at("median").get<double>(), 2) +
                  " mm/day (n=" + std::to_string(s.at("n").get<long>()) + ")\n";
        }
        md += "\n";
    }
    if (summary["metrics"].contains("cc")) {
        md += "### CC\n\n";
        for (const auto& [scheme, s] : summary["metrics"]["cc"].items()) {
            md += "- " + scheme + ": median " + format_fixed(s.at("median").get<double>(), 2) +
                  " (n=" + std::to_string(s.at("n").get<long>()) + ")\n";
        }
        md += "\n";
    }

    md += "## Simulation domain maps\n\n";
    if (summary.contains("grid")) {
        md += "Nonzero grid cells: " +
              std::to_string(summary["grid"]["nonzero_cells"].get<long>()) + "\n";
        md += "Records without a domain box: " +
              std::to_string(summary["grid"]["skipped_no_box"].get<long>()) + "\n";
    }

    nlohmann::json report;
    report["funnel"] = funnel;
    report["summary"] = summary;

    atomic_write_file(dir / "report.md", md);
    atomic_write_file(dir / "report.json", report.dump(2) + "\n");
    write_manifest_entry(cfg, "report",
                         nlohmann::json{{"rendered", true}, {"sections", 8}});
    write_manifest_entry(cfg, "funnel", funnel);
}

}  // namespace litmeta::pipeline::detail
