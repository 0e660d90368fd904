#pragma once

#include <algorithm>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "litmeta/common.hpp"
#include "litmeta/corpus.hpp"
#include "litmeta/csv.hpp"
#include "litmeta/extraction.hpp"
#include "litmeta/schemes.hpp"

namespace litmeta::analytics {

using extraction::BiasVerdict;
using extraction::ConfigRecord;
using extraction::ExtractionRecord;
using extraction::GeoBox;
using extraction::MetricKind;
using extraction::Scheme;
using extraction::SchemeId;
using extraction::SchemeMetaTable;

// ---------------------------------------------------------------------------
// YearSeries

// Contiguous per-year values; missing years inside the range are explicit
// zeros.
struct YearSeries {
    int start_year = 0;
    std::vector<double> values;

    bool empty() const { return values.empty(); }
    int end_year() const { return start_year + static_cast<int>(values.size()) - 1; }

    double at(int year) const {
        if (empty() || year < start_year || year > end_year()) return 0.0;
        return values[static_cast<size_t>(year - start_year)];
    }

    void ensure_range(int first, int last) {
        if (empty()) {
            start_year = first;
            values.assign(static_cast<size_t>(last - first + 1), 0.0);
            return;
        }
        if (first < start_year) {
            values.insert(values.begin(), static_cast<size_t>(start_year - first), 0.0);
            start_year = first;
        }
        if (last > end_year()) {
            values.resize(values.size() + static_cast<size_t>(last - end_year()), 0.0);
        }
    }

    void add(int year, double delta) {
        ensure_range(empty() ? year : std::min(year, start_year),
                     empty() ? year : std::max(year, end_year()));
        values[static_cast<size_t>(year - start_year)] += delta;
    }

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::object();
        for (size_t i = 0; i < values.size(); ++i) {
            j[std::to_string(start_year + static_cast<int>(i))] = values[i];
        }
        return j;
    }
};

// ---------------------------------------------------------------------------
// Publication statistics

struct YearlyPubStats {
    YearSeries counts;
    YearSeries mean_authors;
};

inline YearlyPubStats pubs_and_authors_per_year(const std::vector<corpus::BibRecord>& records) {
    YearlyPubStats out;
    if (records.empty()) return out;
    int first = records.front().pub_date.year, last = first;
    for (const auto& r : records) {
        first = std::min(first, r.pub_date.year);
        last = std::max(last, r.pub_date.year);
    }
    out.counts.ensure_range(first, last);
    out.mean_authors.ensure_range(first, last);
    YearSeries author_sums, author_pubs;
    author_sums.ensure_range(first, last);
    author_pubs.ensure_range(first, last);
    for (const auto& r : records) {
        out.counts.add(r.pub_date.year, 1.0);
        if (!r.authors.empty()) {
            author_sums.add(r.pub_date.year, static_cast<double>(r.authors.size()));
            author_pubs.add(r.pub_date.year, 1.0);
        }
    }
    for (int y = first; y <= last; ++y) {
        double pubs = author_pubs.at(y);
        if (pubs > 0) {
            out.mean_authors.values[static_cast<size_t>(y - first)] = author_sums.at(y) / pubs;
        }
    }
    return out;
}

struct JournalRow {
    std::string journal;
    long pub_count = 0;
    std::optional<double> mean_citations;
    std::optional<double> median_citations;
};

// Top journals by publication count; mean/median over records that carry a
// citation count.
inline std::vector<JournalRow> journal_stats(const std::vector<corpus::BibRecord>& records,
                                             size_t top_n) {
    std::map<std::string, std::vector<long>> citations;
    std::map<std::string, long> counts;
    for (const auto& r : records) {
        if (r.journal.empty()) continue;
        ++counts[r.journal];
        if (r.citation_count) citations[r.journal].push_back(*r.citation_count);
    }
    std::vector<JournalRow> rows;
    for (const auto& [journal, count] : counts) {
        JournalRow row;
        row.journal = journal;
        row.pub_count = count;
        auto it = citations.find(journal);
        if (it != citations.end() && !it->second.empty()) {
            auto& c = it->second;
            std::sort(c.begin(), c.end());
            double sum = 0;
            for (long v : c) sum += static_cast<double>(v);
            row.mean_citations = sum / static_cast<double>(c.size());
            size_t n = c.size();
            row.median_citations = n % 2 == 1
                                       ? static_cast<double>(c[n / 2])
                                       : (static_cast<double>(c[n / 2 - 1]) + c[n / 2]) / 2.0;
        }
        rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end(), [](const JournalRow& a, const JournalRow& b) {
        if (a.pub_count != b.pub_count) return a.pub_count > b.pub_count;
        return a.journal < b.journal;
    });
    if (rows.size() > top_n) rows.resize(top_n);
    return rows;
}

struct GeoCounts {
    std::vector<std::pair<std::string, long>> countries;     // count desc, name asc
    std::vector<std::pair<std::string, long>> institutions;  // count desc, name asc
    long excluded = 0;  // records recording neither countries nor institutions
};

// A publication increments each distinct country/institution it lists once.
inline GeoCounts country_institution_counts(const std::vector<corpus::BibRecord>& records) {
    GeoCounts out;
    std::map<std::string, long> countries, institutions;
    for (const auto& r : records) {
        bool has_countries = r.author_countries && !r.author_countries->empty();
        bool has_institutions = r.author_institutions && !r.author_institutions->empty();
        if (!has_countries && !has_institutions) {
            ++out.excluded;
            continue;
        }
        if (has_countries) {
            std::set<std::string> distinct(r.author_countries->begin(), r.author_countries->end());
            for (const auto& c : distinct) ++countries[c];
        }
        if (has_institutions) {
            std::set<std::string> distinct(r.author_institutions->begin(),
                                           r.author_institutions->end());
            for (const auto& i : distinct) ++institutions[i];
        }
    }
    auto flatten = [](const std::map<std::string, long>& m) {
        std::vector<std::pair<std::string, long>> v(m.begin(), m.end());
        std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        return v;
    };
    out.countries = flatten(countries);
    out.institutions = flatten(institutions);
    return out;
}

// ---------------------------------------------------------------------------
// Temporal scheme usage and adoption lag

struct SchemeUsage {
    std::map<SchemeId, YearSeries> per_scheme;  // publication x distinct-scheme counts
    std::map<extraction::MomentClass, YearSeries> class_shares;  // fraction of counts per year
};

// A publication counts once per distinct microphysics scheme it uses, not
// per configuration. Moment-class shares are per-year fractions of the
// publication-scheme counts whose scheme has a known moment class.
inline SchemeUsage scheme_usage_by_year(const std::vector<ExtractionRecord>& extractions,
                                        const std::map<std::string, int>& pub_years,
                                        const SchemeMetaTable& meta) {
    SchemeUsage out;
    int first = 0, last = 0;
    bool any = false;
    for (const auto& rec : extractions) {
        auto it = pub_years.find(rec.record_id);
        if (it == pub_years.end()) continue;
        if (!any) {
            first = last = it->second;
            any = true;
        }
        first = std::min(first, it->second);
        last = std::max(last, it->second);
    }
    if (!any) return out;

    std::map<extraction::MomentClass, YearSeries> class_counts;
    YearSeries total_counts;
    total_counts.ensure_range(first, last);
    for (const auto& rec : extractions) {
        auto it = pub_years.find(rec.record_id);
        if (it == pub_years.end()) continue;
        int year = it->second;
        for (const auto& scheme : rec.named_schemes()) {
            auto& series = out.per_scheme[scheme];
            series.ensure_range(first, last);
            series.add(year, 1.0);
            if (const auto* m = meta.find(scheme)) {
                auto& cls = class_counts[m->moment_class];
                cls.ensure_range(first, last);
                cls.add(year, 1.0);
                total_counts.add(year, 1.0);
            }
        }
    }
    for (auto& [cls, counts] : class_counts) {
        YearSeries share;
        share.ensure_range(first, last);
        for (int y = first; y <= last; ++y) {
            double total = total_counts.at(y);
            if (total > 0) share.values[static_cast<size_t>(y - first)] = counts.at(y) / total;
        }
        out.class_shares[cls] = std::move(share);
    }
    return out;
}

struct AdoptionLag {
    SchemeId scheme;
    int code_year = 0;
    int first_use_year = 0;
    int lag = 0;  // first_use - code_year; negative values reported as-is
};

struct AdoptionLagResult {
    std::vector<AdoptionLag> rows;       // schemes with usage and a code year
    std::vector<SchemeId> never_used;    // schemes with a code year but no usage
};

inline AdoptionLagResult adoption_lag(const SchemeMetaTable& meta, const SchemeUsage& usage) {
    AdoptionLagResult out;
    for (const auto& row : meta.rows()) {
        if (!row.wrf_code_year) continue;
        auto it = usage.per_scheme.find(row.scheme);
        std::optional<int> first_use;
        if (it != usage.per_scheme.end()) {
            const YearSeries& s = it->second;
            for (int y = s.start_year; y <= s.end_year(); ++y) {
                if (s.at(y) > 0) {
                    first_use = y;
                    break;
                }
            }
        }
        if (!first_use) {
            out.never_used.push_back(row.scheme);
            continue;
        }
        out.rows.push_back({row.scheme, *row.wrf_code_year, *first_use,
                            *first_use - *row.wrf_code_year});
    }
    return out;
}

// Single-scheme accessor; throws NoUsage for a scheme that never appears.
inline AdoptionLag adoption_lag_for(const SchemeId& scheme, const SchemeMetaTable& meta,
                                    const SchemeUsage& usage) {
    auto all = adoption_lag(meta, usage);
    for (const auto& row : all.rows) {
        if (row.scheme == scheme) return row;
    }
    throw Error("NoUsage", "scheme " + to_string(scheme) + " never used");
}

// ---------------------------------------------------------------------------
// Gridded maps

struct GridMap {
    double cell_size = 2.5;
    std::map<std::pair<int, int>, long long> cells;  // (lat_index, lon_index) -> count

    long long at(int lat_index, int lon_index) const {
        auto it = cells.find({lat_index, lon_index});
        return it == cells.end() ? 0 : it->second;
    }

    void add(int lat_index, int lon_index, long long delta) {
        auto key = std::make_pair(lat_index, lon_index);
        long long v = cells[key] += delta;
        if (v == 0) cells.erase(key);
    }

    int lat_cells() const { return static_cast<int>(std::ceil(180.0 / cell_size - 1e-9)); }
    int lon_cells() const { return static_cast<int>(std::ceil(360.0 / cell_size - 1e-9)); }
    double lat_lo(int i) const { return -90.0 + i * cell_size; }
    double lon_lo(int j) const { return -180.0 + j * cell_size; }
};

namespace detail {

// Strict-overlap predicate: zero-measure touching does not count, so a box
// exactly covering one cell touches no neighbours.
inline bool interval_overlaps(double lo, double hi, double a, double b) {
    return lo < b && hi > a;
}

}  // namespace detail

// All grid cells a box intersects (positive-measure). Wrapped boxes split
// at the antimeridian.
inline std::vector<std::pair<int, int>> cells_for_box(const GeoBox& box, const GridMap& grid) {
    std::vector<std::pair<double, double>> lon_segments;
    if (box.wrapped) {
        lon_segments.push_back({box.west, 180.0});
        lon_segments.push_back({-180.0, box.east});
    } else {
        lon_segments.push_back({box.west, box.east});
    }

    std::vector<std::pair<int, int>> out;
    double cell = grid.cell_size;
    int lat_first = std::max(0, static_cast<int>(std::floor((box.south + 90.0) / cell)) - 1);
    int lat_last = std::min(grid.lat_cells() - 1,
                            static_cast<int>(std::ceil((box.north + 90.0) / cell)));
    for (int i = lat_first; i <= lat_last; ++i) {
        double lat_lo = grid.lat_lo(i);
        if (!detail::interval_overlaps(lat_lo, lat_lo + cell, box.south, box.north)) continue;
        for (const auto& [seg_w, seg_e] : lon_segments) {
            if (seg_w >= seg_e) continue;
            int lon_first = std::max(0, static_cast<int>(std::floor((seg_w + 180.0) / cell)) - 1);
            int lon_last = std::min(grid.lon_cells() - 1,
                                    static_cast<int>(std::ceil((seg_e + 180.0) / cell)));
            for (int j = lon_first; j <= lon_last; ++j) {
                double lon_lo = grid.lon_lo(j);
                if (!detail::interval_overlaps(lon_lo, lon_lo + cell, seg_w, seg_e)) continue;
                out.emplace_back(i, j);
            }
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

struct GridResult {
    GridMap map;
    long skipped_no_box = 0;  // records without a valid GeoBox
};

// Each publication increments every grid cell its box intersects, once per
// publication per cell. Optional filter restricts to publications using a
// given microphysics scheme.
inline GridResult grid_counts(const std::vector<ExtractionRecord>& extractions,
                              const std::optional<SchemeId>& scheme_filter, double cell_size) {
    GridResult out;
    out.map.cell_size = cell_size;
    for (const auto& rec : extractions) {
        if (scheme_filter && !rec.named_schemes().count(*scheme_filter)) continue;
        if (!rec.geo_box) {
            ++out.skipped_no_box;
            continue;
        }
        for (const auto& [i, j] : cells_for_box(*rec.geo_box, out.map)) {
            out.map.add(i, j, 1);
        }
    }
    return out;
}

// N_over - N_under per cell for one scheme. Only definitive
// verdicts contribute; Mix and NoAnswer records are ignored.
inline GridResult bias_difference_map(const std::vector<ExtractionRecord>& extractions,
                                      const SchemeId& scheme, double cell_size) {
    GridResult out;
    out.map.cell_size = cell_size;
    for (const auto& rec : extractions) {
        auto it = rec.verdicts.find(scheme);
        if (it == rec.verdicts.end()) continue;
        long long sign = 0;
        if (it->second == BiasVerdict::Overestimation) sign = 1;
        else if (it->second == BiasVerdict::Underestimation) sign = -1;
        else continue;
        if (!rec.geo_box) {
            ++out.skipped_no_box;
            continue;
        }
        for (const auto& [i, j] : cells_for_box(*rec.geo_box, out.map)) {
            out.map.add(i, j, sign);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Co-occurrence of parameterizations

struct CoocRow {
    std::string category;  // radiation / cumulus / pbl / land_surface
    std::string name;      // canonical name, "Other" or "None"
    long count = 0;
    double percent = 0;    // of all configurations
};

// Percentages of canonical parameterizations over all configurations (the
// unit of analysis is the ConfigRecord, not the publication). Canonicals
// used `other_threshold` times or fewer pool into Other; None stays its
// own bucket.
inline std::vector<CoocRow> cooccurrence_table(const std::vector<ExtractionRecord>& extractions,
                                               long other_threshold) {
    long total = 0;
    std::map<std::string, std::map<std::string, long>> counts;  // category -> display -> count
    for (const auto& rec : extractions) {
        for (const auto& c : rec.configs) {
            ++total;
            auto tally = [&](const char* category, const extraction::SlotValue& v) {
                std::string name = v.is_other() ? "Other" : v.canonical;
                ++counts[category][name];
            };
            tally("radiation", c.radiation);
            tally("cumulus", c.cumulus);
            tally("pbl", c.pbl);
            tally("land_surface", c.land_surface);
        }
    }

    std::vector<CoocRow> rows;
    if (total == 0) return rows;
    for (const auto& category : {"radiation", "cumulus", "pbl", "land_surface"}) {
        long other = 0, none = 0;
        std::vector<CoocRow> named;
        for (const auto& [name, count] : counts[category]) {
            if (name == "None") none += count;
            else if (name == "Other" || count <= other_threshold) other += count;
            else named.push_back({category, name, count, 0});
        }
        std::sort(named.begin(), named.end(), [](const CoocRow& a, const CoocRow& b) {
            if (a.count != b.count) return a.count > b.count;
            return a.name < b.name;
        });
        named.push_back({category, "Other", other, 0});
        named.push_back({category, "None", none, 0});
        for (auto& row : named) {
            row.percent = 100.0 * static_cast<double>(row.count) / static_cast<double>(total);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

struct ConfigCount {
    std::string tuple_key;  // radiation-cumulus-pbl-land_surface
    long count = 0;         // publications using the tuple with the scheme
};

// Top-k configurations per microphysics scheme, counted per publication.
inline std::map<SchemeId, std::vector<ConfigCount>> top_configs_per_scheme(
    const std::vector<ExtractionRecord>& extractions, size_t k) {
    if (k < 1) throw Error("BadArgument", "k must be >= 1");
    std::map<SchemeId, std::map<std::string, long>> counts;
    for (const auto& rec : extractions) {
        std::set<std::pair<SchemeId, std::string>> seen;
        for (const auto& c : rec.configs) {
            if (c.microphysics.value == Scheme::None) continue;
            seen.insert({c.microphysics, c.tuple_key()});
        }
        for (const auto& [scheme, tuple] : seen) ++counts[scheme][tuple];
    }
    std::map<SchemeId, std::vector<ConfigCount>> out;
    for (const auto& [scheme, tuples] : counts) {
        std::vector<ConfigCount> rows;
        for (const auto& [tuple, count] : tuples) rows.push_back({tuple, count});
        std::sort(rows.begin(), rows.end(), [](const ConfigCount& a, const ConfigCount& b) {
            if (a.count != b.count) return a.count > b.count;
            return a.tuple_key < b.tuple_key;
        });
        if (rows.size() > k) rows.resize(k);
        out[scheme] = std::move(rows);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bias tallies

struct TupleFilter {
    extraction::SlotValue radiation;
    extraction::SlotValue cumulus;
    extraction::SlotValue pbl;
    extraction::SlotValue land_surface;

    bool matches(const ConfigRecord& c) const {
        return c.radiation == radiation && c.cumulus == cumulus && c.pbl == pbl &&
               c.land_surface == land_surface;
    }

    // The most popular configuration corpus-wide: RRTM/Dudhia, KF, YSU, Noah.
    static TupleFilter most_popular() {
        return {{"RRTM/Dudhia", ""}, {"KF", ""}, {"YSU", ""}, {"Noah", ""}};
    }
};

struct BiasTallyRow {
    SchemeId scheme;
    long n_over = 0;
    long n_under = 0;
    std::optional<double> pct_over;  // absent when no definitive verdicts
};

// Per-scheme overestimation/underestimation counts; Mix and NoAnswer are
// excluded. With a filter, only publications pairing the scheme with the
// given 4-tuple contribute. Rows sort by increasing pct_over.
inline std::vector<BiasTallyRow> bias_tally(const std::vector<ExtractionRecord>& extractions,
                                            const std::optional<TupleFilter>& config_filter = {}) {
    std::map<SchemeId, BiasTallyRow> rows;
    for (const auto& rec : extractions) {
        for (const auto& [scheme, verdict] : rec.verdicts) {
            if (verdict != BiasVerdict::Overestimation && verdict != BiasVerdict::Underestimation) {
                continue;
            }
            if (config_filter) {
                bool uses = false;
                for (const auto& c : rec.configs) {
                    if (c.microphysics == scheme && config_filter->matches(c)) {
                        uses = true;
                        break;
                    }
                }
                if (!uses) continue;
            }
            auto& row = rows[scheme];
            row.scheme = scheme;
            if (verdict == BiasVerdict::Overestimation) ++row.n_over;
            else ++row.n_under;
        }
    }
    std::vector<BiasTallyRow> out;
    for (auto& [scheme, row] : rows) {
        long definitive = row.n_over + row.n_under;
        if (definitive > 0) {
            row.pct_over = static_cast<double>(row.n_over) / static_cast<double>(definitive);
        }
        out.push_back(std::move(row));
    }
    std::sort(out.begin(), out.end(), [](const BiasTallyRow& a, const BiasTallyRow& b) {
        double pa = a.pct_over.value_or(2.0), pb = b.pct_over.value_or(2.0);
        if (pa != pb) return pa < pb;
        return to_string(a.scheme) < to_string(b.scheme);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Distribution statistics

struct BoxplotStats {
    size_t n = 0;
    double median = 0;
    double q1 = 0;
    double q3 = 0;
    double iqr = 0;
    double whisker_low = 0;
    double whisker_high = 0;
    std::vector<double> outliers;

    nlohmann::json to_json() const {
        return {{"n", n},     {"median", median},           {"q1", q1},
                {"q3", q3},   {"iqr", iqr},                 {"whisker_low", whisker_low},
                {"whisker_high", whisker_high},             {"outliers", outliers}};
    }
};

// Quartiles by inclusive linear interpolation between order statistics;
// whiskers at the most extreme data points within 1.5*IQR of the quartiles.
inline BoxplotStats boxplot_stats(std::vector<double> samples) {
    if (samples.empty()) throw Error("EmptySample", "boxplot_stats needs at least one sample");
    std::sort(samples.begin(), samples.end());
    auto quantile = [&](double p) {
        double h = static_cast<double>(samples.size() - 1) * p;
        size_t lo = static_cast<size_t>(std::floor(h));
        double frac = h - static_cast<double>(lo);
        if (lo + 1 >= samples.size()) return samples[lo];
        return samples[lo] + frac * (samples[lo + 1] - samples[lo]);
    };
    BoxplotStats s;
    s.n = samples.size();
    s.q1 = quantile(0.25);
    s.median = quantile(0.5);
    s.q3 = quantile(0.75);
    s.iqr = s.q3 - s.q1;
    double fence_lo = s.q1 - 1.5 * s.iqr;
    double fence_hi = s.q3 + 1.5 * s.iqr;
    bool have_whisker = false;
    for (double x : samples) {
        if (x < fence_lo || x > fence_hi) {
            s.outliers.push_back(x);
            continue;
        }
        if (!have_whisker) {
            s.whisker_low = s.whisker_high = x;
            have_whisker = true;
        } else {
            s.whisker_low = std::min(s.whisker_low, x);
            s.whisker_high = std::max(s.whisker_high, x);
        }
    }
    return s;
}

enum class Continent { Asia, Europe, Africa, NorthAmerica, SouthAmerica, Oceania, Antarctica,
                       Unassigned };

inline std::string to_string(Continent c) {
    switch (c) {
        case Continent::Asia: return "Asia";
        case Continent::Europe: return "Europe";
        case Continent::Africa: return "Africa";
        case Continent::NorthAmerica: return "NorthAmerica";
        case Continent::SouthAmerica: return "SouthAmerica";
        case Continent::Oceania: return "Oceania";
        case Continent::Antarctica: return "Antarctica";
        case Continent::Unassigned: return "Unassigned";
    }
    return "Unassigned";
}

inline Continent continent_from_string(const std::string& s) {
    for (Continent c : {Continent::Asia, Continent::Europe, Continent::Africa,
                        Continent::NorthAmerica, Continent::SouthAmerica, Continent::Oceania,
                        Continent::Antarctica}) {
        if (to_string(c) == s) return c;
    }
    return Continent::Unassigned;
}

// Coarse land boxes per continent, checked in table order. Points in no box
// (oceans) are Unassigned. Ships as editable data (data/continents.json).
class ContinentTable {
public:
    struct Region {
        Continent continent;
        double south, north, west, east;
    };

    static ContinentTable defaults() {
        ContinentTable t;
        t.regions_ = {
            {Continent::Antarctica, -90, -60, -180, 180},
            {Continent::Oceania, -44, -10, 112, 154},   // Australia
            {Continent::Oceania, -47, -34, 166, 179},   // New Zealand
            {Continent::Oceania, -10, 0, 140, 155},     // New Guinea
            {Continent::SouthAmerica, -56, 13, -82, -34},
            {Continent::NorthAmerica, 7, 84, -168, -52},
            {Continent::NorthAmerica, 59, 84, -52, -12},  // Greenland
            {Continent::Africa, -35, 37, -18, 43},
            {Continent::Africa, -2, 12, 43, 51.5},        // Horn of Africa
            {Continent::Europe, 36, 71.5, -11, 42},
            {Continent::Europe, 42, 71.5, 42, 60},        // west of the Urals
            {Continent::Asia, 12, 55, 42, 60},            // Middle East
            {Continent::Asia, -10, 78, 60, 180},
        };
        return t;
    }

    static ContinentTable from_json(const nlohmann::json& j) {
        ContinentTable t;
        for (const auto& r : j) {
            t.regions_.push_back({continent_from_string(r.at("continent").get<std::string>()),
                                  r.at("south").get<double>(), r.at("north").get<double>(),
                                  r.at("west").get<double>(), r.at("east").get<double>()});
        }
        return t;
    }

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& r : regions_) {
            j.push_back({{"continent", analytics::to_string(r.continent)},
                         {"south", r.south},
                         {"north", r.north},
                         {"west", r.west},
                         {"east", r.east}});
        }
        return j;
    }

    Continent classify(double lat, double lon) const {
        for (const auto& r : regions_) {
            if (lat >= r.south && lat <= r.north && lon >= r.west && lon <= r.east) {
                return r.continent;
            }
        }
        return Continent::Unassigned;
    }

private:
    std::vector<Region> regions_;
};

// Classify a box by its center point.
inline Continent continent_of(const GeoBox& box, const ContinentTable& table) {
    double lat = (box.north + box.south) / 2.0;
    double lon;
    if (box.wrapped) {
        lon = box.west + ((box.east + 360.0) - box.west) / 2.0;
        if (lon > 180.0) lon -= 360.0;
    } else {
        lon = (box.west + box.east) / 2.0;
    }
    return table.classify(lat, lon);
}

inline Continent continent_of(const GeoBox& box) {
    static const ContinentTable table = ContinentTable::defaults();
    return continent_of(box, table);
}

struct ScatterRow {
    SchemeId scheme;
    std::string record_id;
    double rmse = 0;  // mm/day
    double cc = 0;
    Continent continent = Continent::Unassigned;
};

struct MetricDistributions {
    std::map<SchemeId, BoxplotStats> rmse;  // unit-normalized pool only
    std::map<SchemeId, BoxplotStats> cc;
    std::vector<ScatterRow> scatter;
    long unattributed_samples = 0;
};

namespace detail {

inline std::optional<SchemeId> sample_scheme(const extraction::MetricSample& sample,
                                             const ExtractionRecord& rec) {
    if (sample.scheme) return sample.scheme;
    auto named = rec.named_schemes();
    if (named.size() == 1) return *named.begin();
    return std::nullopt;
}

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

}  // namespace detail

// Per-scheme RMSE (mm/day) and CC distributions plus the RMSE/CC scatter.
// Samples without a scheme attribution inherit the record's scheme when it
// is unique, otherwise they are counted as unattributed. Scatter rows need
// both metrics for the same record and scheme; the continent comes from the
// record's domain box center.
inline MetricDistributions metric_distributions(const std::vector<ExtractionRecord>& extractions,
                                                const ContinentTable& continents) {
    MetricDistributions out;
    std::map<SchemeId, std::vector<double>> rmse_pool, cc_pool;
    for (const auto& rec : extractions) {
        std::map<SchemeId, std::vector<double>> rec_rmse, rec_cc;
        for (const auto& sample : rec.metrics) {
            auto scheme = detail::sample_scheme(sample, rec);
            if (!scheme) {
                ++out.unattributed_samples;
                continue;
            }
            if (sample.kind == MetricKind::RMSE) {
                if (!sample.unit_normalized) continue;  // restricted to the mm/day pool
                rmse_pool[*scheme].push_back(*sample.unit_normalized);
                rec_rmse[*scheme].push_back(*sample.unit_normalized);
            } else {
                cc_pool[*scheme].push_back(sample.value);
                rec_cc[*scheme].push_back(sample.value);
            }
        }
        for (const auto& [scheme, rmse_values] : rec_rmse) {
            auto it = rec_cc.find(scheme);
            if (it == rec_cc.end()) continue;
            ScatterRow row;
            row.scheme = scheme;
            row.record_id = rec.record_id;
            row.rmse = detail::median_of(rmse_values);
            row.cc = detail::median_of(it->second);
            row.continent = rec.geo_box ? continent_of(*rec.geo_box, continents)
                                        : Continent::Unassigned;
            out.scatter.push_back(std::move(row));
        }
    }
    for (const auto& [scheme, values] : rmse_pool) out.rmse[scheme] = boxplot_stats(values);
    for (const auto& [scheme, values] : cc_pool) out.cc[scheme] = boxplot_stats(values);
    std::sort(out.scatter.begin(), out.scatter.end(), [](const ScatterRow& a, const ScatterRow& b) {
        if (a.record_id != b.record_id) return a.record_id < b.record_id;
        return to_string(a.scheme) < to_string(b.scheme);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Emission helpers (CSV / JSON / GeoJSON)

inline std::string year_series_csv(const std::vector<std::pair<std::string, const YearSeries*>>& columns) {
    if (columns.empty()) return "year\n";
    int first = 0, last = -1;
    for (const auto& [name, s] : columns) {
        if (s->empty()) continue;
        if (last < first) {
            first = s->start_year;
            last = s->end_year();
        } else {
            first = std::min(first, s->start_year);
            last = std::max(last, s->end_year());
        }
    }
    std::vector<std::string> header = {"year"};
    for (const auto& [name, s] : columns) header.push_back(name);
    std::string out = csv::write_row(header);
    for (int y = first; y <= last; ++y) {
        std::vector<std::string> row = {std::to_string(y)};
        for (const auto& [name, s] : columns) row.push_back(format_trimmed(s->at(y), 6));
        out += csv::write_row(row);
    }
    return out;
}

inline std::string grid_csv(const GridMap& map) {
    std::string out = "lat_index,lon_index,lat_south,lon_west,count\n";
    for (const auto& [key, count] : map.cells) {
        out += csv::write_row({std::to_string(key.first), std::to_string(key.second),
                               format_trimmed(map.lat_lo(key.first), 6),
                               format_trimmed(map.lon_lo(key.second), 6),
                               std::to_string(count)});
    }
    return out;
}

// One polygon feature per nonzero cell with a `count` property.
inline nlohmann::json grid_geojson(const GridMap& map) {
    nlohmann::json features = nlohmann::json::array();
    for (const auto& [key, count] : map.cells) {
        if (count == 0) continue;
        double s = map.lat_lo(key.first), w = map.lon_lo(key.second);
        double n = s + map.cell_size, e = w + map.cell_size;
        nlohmann::json feature;
        feature["type"] = "Feature";
        feature["properties"] = {{"count", count}};
        feature["geometry"] = {
            {"type", "Polygon"},
            {"coordinates",
             nlohmann::json::array({nlohmann::json::array(
                 {nlohmann::json::array({w, s}), nlohmann::json::array({e, s}),
                  nlohmann::json::array({e, n}), nlohmann::json::array({w, n}),
                  nlohmann::json::array({w, s})})})},
        };
        features.push_back(std::move(feature));
    }
    return nlohmann::json{{"type", "FeatureCollection"}, {"features", std::move(features)}};
}

inline nlohmann::json grid_json(const GridMap& map) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& [key, count] : map.cells) {
        cells.push_back({{"lat_index", key.first}, {"lon_index", key.second}, {"count", count}});
    }
    return nlohmann::json{{"cell_size_degrees", map.cell_size}, {"cells", std::move(cells)}};
}

}  // namespace litmeta::analytics
