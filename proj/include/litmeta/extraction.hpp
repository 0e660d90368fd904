#pragma once

#include <array>
#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "litmeta/common.hpp"
#include "litmeta/docstore.hpp"
#include "litmeta/llm.hpp"
#include "litmeta/schemes.hpp"

namespace litmeta::extraction {

// ---------------------------------------------------------------------------
// Domain types

struct GeoBox {
    double north = 0;
    double south = 0;
    double west = 0;
    double east = 0;
    bool wrapped = false;  // west > east: box crosses the antimeridian

    bool operator==(const GeoBox&) const = default;

    void validate() const {
        if (!(south >= -90.0 && north <= 90.0 && south < north)) {
            throw Error("GeocodeInvalid", "latitudes must satisfy -90 <= south < north <= 90");
        }
        if (west < -180.0 || west > 180.0 || east < -180.0 || east > 180.0) {
            throw Error("GeocodeInvalid", "longitudes must lie in [-180, 180]");
        }
        if (west == east) throw Error("GeocodeInvalid", "west == east is forbidden");
        if (wrapped != (west > east)) throw Error("GeocodeInvalid", "wrapped flag inconsistent");
    }

    nlohmann::json to_json() const {
        return {{"north", north}, {"south", south}, {"west", west}, {"east", east},
                {"wrapped", wrapped}};
    }

    static GeoBox from_json(const nlohmann::json& j) {
        GeoBox b{j.at("north"), j.at("south"), j.at("west"), j.at("east"),
                 j.value("wrapped", false)};
        b.wrapped = b.west > b.east;
        return b;
    }
};

enum class PrecipKind { AccumulatedAmount, Rate, Reflectivity, Unstated };

inline std::string to_string(PrecipKind k) {
    switch (k) {
        case PrecipKind::AccumulatedAmount: return "AccumulatedAmount";
        case PrecipKind::Rate: return "Rate";
        case PrecipKind::Reflectivity: return "Reflectivity";
        case PrecipKind::Unstated: return "Unstated";
    }
    return "Unstated";
}

inline PrecipKind precip_kind_from_string(const std::string& s) {
    if (s == "AccumulatedAmount") return PrecipKind::AccumulatedAmount;
    if (s == "Rate") return PrecipKind::Rate;
    if (s == "Reflectivity") return PrecipKind::Reflectivity;
    return PrecipKind::Unstated;
}

struct PrecipVariable {
    PrecipKind kind = PrecipKind::Unstated;
    std::optional<double> accumulation_hours;  // only for AccumulatedAmount

    bool operator==(const PrecipVariable&) const = default;
};

enum class BiasVerdict { NoAnswer, Overestimation, Underestimation, Mix };

inline std::string to_string(BiasVerdict v) {
    switch (v) {
        case BiasVerdict::NoAnswer: return "NoAnswer";
        case BiasVerdict::Overestimation: return "Overestimation";
        case BiasVerdict::Underestimation: return "Underestimation";
        case BiasVerdict::Mix: return "Mix";
    }
    return "NoAnswer";
}

inline BiasVerdict bias_verdict_from_string(const std::string& s) {
    if (s == "Overestimation") return BiasVerdict::Overestimation;
    if (s == "Underestimation") return BiasVerdict::Underestimation;
    if (s == "Mix") return BiasVerdict::Mix;
    return BiasVerdict::NoAnswer;
}

enum class MetricKind { RMSE, CC };

inline std::string to_string(MetricKind k) { return k == MetricKind::RMSE ? "RMSE" : "CC"; }

struct MetricSample {
    MetricKind kind = MetricKind::RMSE;
    double value = 0;
    std::optional<std::string> unit;             // RMSE only, canonical spelling
    std::optional<double> unit_normalized;       // value in mm/day when convertible
    std::optional<SchemeId> scheme;
    std::string record_id;
};

struct ConfigRecord {
    SchemeId microphysics;
    SlotValue radiation;
    SlotValue cumulus;
    SlotValue pbl;
    SlotValue land_surface;

    bool operator==(const ConfigRecord&) const = default;

    // Canonical 4-tuple key for co-occurrence analytics.
    std::string tuple_key() const {
        return radiation.display() + "-" + cumulus.display() + "-" + pbl.display() + "-" +
               land_surface.display();
    }
};

inline constexpr int kExtractionSchemaVersion = 1;

struct ExtractionRecord {
    std::string record_id;
    std::vector<ConfigRecord> configs;
    std::string domain_name;
    std::optional<GeoBox> geo_box;
    PrecipVariable variable;
    std::map<SchemeId, BiasVerdict> verdicts;
    std::vector<std::string> over_regions;
    std::vector<std::string> under_regions;
    std::vector<MetricSample> metrics;
    std::array<std::string, 8> raw_answers{};

    std::set<SchemeId> named_schemes() const {
        std::set<SchemeId> out;
        for (const auto& c : configs) {
            if (c.microphysics.value != Scheme::None) out.insert(c.microphysics);
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// Answer splitting

// Split a single completion into the eight numbered answers. Markers are
// lines beginning "1." .. "8." (also "1)" / "1:"), in order.
inline std::array<std::string, 8> split_extraction_answers(const std::string& response) {
    struct Marker {
        size_t line_start;
        size_t text_start;
    };
    std::vector<Marker> markers;
    int expected = 1;
    size_t pos = 0;
    while (pos <= response.size() && expected <= 8) {
        size_t line_end = response.find('\n', pos);
        if (line_end == std::string::npos) line_end = response.size();
        size_t p = pos;
        while (p < line_end && is_ascii_space(response[p])) ++p;
        if (p < line_end && response[p] == ('0' + expected)) {
            size_t q = p + 1;
            if (q < line_end && (response[q] == '.' || response[q] == ')' || response[q] == ':')) {
                ++q;
                if (q >= line_end || is_ascii_space(response[q])) {
                    while (q < line_end && is_ascii_space(response[q])) ++q;
                    markers.push_back({pos, q});
                    ++expected;
                }
            }
        }
        if (line_end == response.size()) break;
        pos = line_end + 1;
    }
    if (markers.size() != 8) {
        throw Error("SplitFailure", "found " + std::to_string(markers.size()) +
                                        " of 8 numbered answer markers");
    }
    std::array<std::string, 8> answers;
    for (size_t i = 0; i < 8; ++i) {
        size_t begin = markers[i].text_start;
        size_t end = i + 1 < 8 ? markers[i + 1].line_start : response.size();
        answers[i] = trim(response.substr(begin, end - begin));
    }
    return answers;
}

// ---------------------------------------------------------------------------
// Question 1: configurations

namespace detail {

struct SlotScan {
    std::string slot;
    AliasMatch match;
};

// Scan the five slots over the answer text, resolving overlaps globally so
// e.g. "CAM-MG" (microphysics) beats the "CAM" radiation alias on the same
// span. Microphysics matches immediately followed by a radiation word are
// dropped ("Goddard shortwave radiation" is not the GCE scheme).
inline std::vector<SlotScan> scan_config_slots(const std::string& text, const AliasTable& table) {
    std::string lower = to_lower(text);
    std::vector<SlotScan> candidates;
    for (const auto& slot : AliasTable::slot_names()) {
        for (const auto& m : table.scan(slot, text)) {
            if (table.slot(slot).at(lower.substr(m.pos, m.len)) == "None") continue;
            candidates.push_back({slot, m});
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const SlotScan& a, const SlotScan& b) {
        if (a.match.len != b.match.len) return a.match.len > b.match.len;
        if (a.match.pos != b.match.pos) return a.match.pos < b.match.pos;
        return a.slot < b.slot;
    });
    std::vector<SlotScan> accepted;
    for (const auto& c : candidates) {
        bool overlaps = false;
        for (const auto& a : accepted) {
            if (c.match.pos < a.match.pos + a.match.len && a.match.pos < c.match.pos + c.match.len) {
                overlaps = true;
                break;
            }
        }
        if (overlaps) continue;
        if (c.slot == "microphysics") {
            std::string after = lower.substr(c.match.pos + c.match.len,
                                             std::min<size_t>(24, lower.size()));
            if (after.find("radiation") != std::string::npos ||
                after.find("shortwave") != std::string::npos ||
                after.find("longwave") != std::string::npos) {
                continue;
            }
        }
        accepted.push_back(c);
    }
    std::sort(accepted.begin(), accepted.end(),
              [](const SlotScan& a, const SlotScan& b) { return a.match.pos < b.match.pos; });
    return accepted;
}

}  // namespace detail

// One ConfigRecord per distinct microphysics scheme mentioned. A slot with a
// single distinct value is shared across all configurations; with several
// values, each scheme's text segment supplies its own ("WSM6 with KF ...;
// Thompson with BMJ ...").
inline std::vector<ConfigRecord> parse_config_answer(const std::string& text,
                                                     const AliasTable& table) {
    auto scans = detail::scan_config_slots(text, table);

    struct SchemeMention {
        SchemeId id;
        size_t pos;
    };
    std::vector<SchemeMention> mentions;
    for (const auto& s : scans) {
        if (s.slot != "microphysics") continue;
        SchemeId id = scheme_from_string(s.match.canonical);
        bool seen = false;
        for (const auto& m : mentions) {
            if (m.id == id) { seen = true; break; }
        }
        if (!seen) mentions.push_back({id, s.match.pos});
    }

    size_t n_configs = std::max<size_t>(mentions.size(), 1);
    std::vector<ConfigRecord> configs(n_configs);
    for (size_t i = 0; i < mentions.size(); ++i) configs[i].microphysics = mentions[i].id;

    auto segment_of = [&](size_t pos) -> std::optional<size_t> {
        if (mentions.empty() || pos < mentions.front().pos) return std::nullopt;  // preamble
        size_t seg = 0;
        for (size_t i = 0; i < mentions.size(); ++i) {
            if (pos >= mentions[i].pos) seg = i;
        }
        return seg;
    };

    for (const auto& slot : {"radiation", "cumulus", "pbl", "land_surface"}) {
        std::vector<std::string> distinct;
        for (const auto& s : scans) {
            if (s.slot != slot) continue;
            if (std::find(distinct.begin(), distinct.end(), s.match.canonical) == distinct.end()) {
                distinct.push_back(s.match.canonical);
            }
        }
        auto assign = [&](ConfigRecord& c, const std::string& canonical, const std::string& raw) {
            SlotValue v = canonical == "Other" ? SlotValue{"Other", raw} : SlotValue{canonical, ""};
            if (std::string(slot) == "radiation") c.radiation = v;
            else if (std::string(slot) == "cumulus") c.cumulus = v;
            else if (std::string(slot) == "pbl") c.pbl = v;
            else c.land_surface = v;
        };
        if (distinct.empty()) continue;
        if (distinct.size() == 1) {
            for (auto& c : configs) assign(c, distinct.front(), "");
            continue;
        }
        std::optional<std::string> preamble_value;
        std::vector<std::optional<std::string>> segment_value(n_configs);
        for (const auto& s : scans) {
            if (s.slot != slot) continue;
            auto seg = segment_of(s.match.pos);
            if (!seg) {
                if (!preamble_value) preamble_value = s.match.canonical;
            } else if (*seg < n_configs && !segment_value[*seg]) {
                segment_value[*seg] = s.match.canonical;
            }
        }
        for (size_t i = 0; i < n_configs; ++i) {
            if (segment_value[i]) assign(configs[i], *segment_value[i], "");
            else if (preamble_value) assign(configs[i], *preamble_value, "");
        }
    }
    return configs;
}

// ---------------------------------------------------------------------------
// Question 4/5/6: bias classification

namespace detail {

struct SynonymHit {
    size_t pos;
    bool over;
};

inline const std::vector<std::string>& over_phrases() {
    // Question 4/5 synonym list from the extraction prompt, plus
    // precipitation-word variants.
    static const std::vector<std::string> phrases = {
        "wet bias", "positive bias", "more intense", "heavier", "larger", "higher",
        "wetter", "stronger", "exceeds", "excess of rainfall", "excess of precipitation",
        "excess of rain", "produce too much precipitation", "too much precipitation",
        "too much rainfall", "too much rain", "more",
    };
    return phrases;
}

inline const std::vector<std::string>& under_phrases() {
    static const std::vector<std::string> phrases = {
        "dry bias", "negative bias", "less intense", "weaker", "smaller", "lower", "drier",
        "generate too little precipitation", "too little precipitation", "too little rainfall",
        "too little rain", "fail to simulate", "fails to simulate", "failed to simulate",
        "cannot simulate", "could not simulate", "less",
    };
    return phrases;
}

inline const std::vector<std::string>& over_stems() {
    static const std::vector<std::string> stems = {"overestimat", "over-estimat", "overpredict",
                                                   "over-predict"};
    return stems;
}

inline const std::vector<std::string>& under_stems() {
    static const std::vector<std::string> stems = {"underestimat", "under-estimat", "underpredict",
                                                   "under-predict"};
    return stems;
}

// Up to `count` word tokens immediately before `pos`.
inline std::vector<std::string> preceding_words(const std::string& lower, size_t pos, int count) {
    std::vector<std::string> words;
    size_t i = pos;
    while (static_cast<int>(words.size()) < count && i > 0) {
        while (i > 0 && !is_word_char(lower[i - 1])) --i;
        size_t end = i;
        while (i > 0 && is_word_char(lower[i - 1])) --i;
        if (end == i) break;
        words.push_back(lower.substr(i, end - i));
    }
    return words;
}

inline bool negated(const std::string& lower, size_t pos) {
    for (const auto& w : preceding_words(lower, pos, 2)) {
        if (w == "not" || w == "never" || w == "no" || w == "neither" || w == "nor") return true;
    }
    return false;
}

inline std::vector<SynonymHit> bias_hits(const std::string& text) {
    std::string lower = to_lower(text);
    std::vector<SynonymHit> hits;
    auto add_phrases = [&](const std::vector<std::string>& phrases, bool over) {
        for (const auto& phrase : phrases) {
            size_t pos = 0;
            while ((pos = find_word_bounded(lower, phrase, pos)) != std::string::npos) {
                hits.push_back({pos, negated(lower, pos) ? !over : over});
                pos += phrase.size();
            }
        }
    };
    auto add_stems = [&](const std::vector<std::string>& stems, bool over) {
        for (const auto& stem : stems) {
            size_t pos = 0;
            while ((pos = find_word_prefix(lower, stem, pos)) != std::string::npos) {
                hits.push_back({pos, negated(lower, pos) ? !over : over});
                pos += stem.size();
            }
        }
    };
    add_phrases(over_phrases(), true);
    add_stems(over_stems(), true);
    add_phrases(under_phrases(), false);
    add_stems(under_stems(), false);
    return hits;
}

inline BiasVerdict verdict_from_hits(const std::vector<SynonymHit>& hits) {
    bool over = false, under = false;
    for (const auto& h : hits) (h.over ? over : under) = true;
    if (over && under) return BiasVerdict::Mix;
    if (over) return BiasVerdict::Overestimation;
    if (under) return BiasVerdict::Underestimation;
    return BiasVerdict::NoAnswer;
}

}  // namespace detail

// Four-way verdict from the over/under synonym lists. "Nah" and texts with
// no synonym hit are NoAnswer; hits on both sides are Mix. "not
// overestimated" counts for the opposite side.
inline BiasVerdict classify_bias(const std::string& text) {
    std::string t = to_lower(trim(text));
    while (!t.empty() && (t.back() == '.' || t.back() == '!')) t.pop_back();
    if (t == "nah") return BiasVerdict::NoAnswer;
    return detail::verdict_from_hits(detail::bias_hits(text));
}

inline BiasVerdict merge_verdicts(BiasVerdict a, BiasVerdict b) {
    if (a == BiasVerdict::NoAnswer) return b;
    if (b == BiasVerdict::NoAnswer) return a;
    if (a == b) return a;
    return BiasVerdict::Mix;
}

// Per-scheme verdict attribution for question 4. When the answer names
// schemes from the record, each named scheme is judged on its own text
// segment; otherwise the whole-text verdict applies to every scheme.
inline std::map<SchemeId, BiasVerdict> attribute_bias(const std::string& text,
                                                      const std::set<SchemeId>& record_schemes,
                                                      const AliasTable& table) {
    std::map<SchemeId, BiasVerdict> out;
    if (record_schemes.empty()) return out;

    struct Mention {
        SchemeId id;
        size_t pos;
    };
    std::vector<Mention> mentions;
    for (const auto& m : table.scan("microphysics", text)) {
        if (m.canonical == "None") continue;
        SchemeId id = scheme_from_string(m.canonical);
        if (record_schemes.count(id)) mentions.push_back({id, m.pos});
    }
    std::sort(mentions.begin(), mentions.end(),
              [](const Mention& a, const Mention& b) { return a.pos < b.pos; });

    if (mentions.empty()) {
        BiasVerdict v = classify_bias(text);
        for (const auto& s : record_schemes) out[s] = v;
        return out;
    }

    for (const auto& s : record_schemes) out[s] = BiasVerdict::NoAnswer;
    for (size_t i = 0; i < mentions.size(); ++i) {
        size_t begin = mentions[i].pos;
        size_t end = i + 1 < mentions.size() ? mentions[i + 1].pos : text.size();
        BiasVerdict v = classify_bias(text.substr(begin, end - begin));
        out[mentions[i].id] = merge_verdicts(out[mentions[i].id], v);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Question 3: evaluated variable

namespace detail {

inline std::optional<double> parse_accumulation_hours(const std::string& lower) {
    if (contains_word_bounded(lower, "daily")) return 24.0;
    if (contains_word_bounded(lower, "hourly")) return 1.0;
    if (contains_word_bounded(lower, "weekly")) return 168.0;
    if (contains_word_bounded(lower, "monthly")) return 720.0;

    // numeric forms: "24-h", "24 h", "3-hour", "72 hr", "2-day", "1 d"
    for (size_t i = 0; i < lower.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(lower[i]))) continue;
        if (i > 0 && is_word_char(lower[i - 1])) continue;
        size_t j = i;
        while (j < lower.size() &&
               (std::isdigit(static_cast<unsigned char>(lower[j])) || lower[j] == '.')) {
            ++j;
        }
        double value = std::stod(lower.substr(i, j - i));
        size_t k = j;
        while (k < lower.size() && (lower[k] == ' ' || lower[k] == '-')) ++k;
        size_t unit_end = k;
        while (unit_end < lower.size() && std::isalpha(static_cast<unsigned char>(lower[unit_end]))) {
            ++unit_end;
        }
        std::string unit = lower.substr(k, unit_end - k);
        if (unit == "h" || unit == "hr" || unit == "hrs" || unit == "hour" || unit == "hours") {
            return value;
        }
        if (unit == "d" || unit == "day" || unit == "days") return value * 24.0;
        i = j;
    }
    return std::nullopt;
}

}  // namespace detail

// Keyword classification of the evaluated precipitation variable; falls
// back to Unstated. Accumulation periods parse from "24-h", "daily", ...
inline PrecipVariable parse_variable_answer(const std::string& text) {
    std::string lower = to_lower(text);
    PrecipVariable v;
    if (lower.find("reflectivity") != std::string::npos) {
        v.kind = PrecipKind::Reflectivity;
        return v;
    }
    bool accumulated = lower.find("accumulat") != std::string::npos ||
                       contains_word_bounded(lower, "amount") ||
                       contains_word_bounded(lower, "total precipitation") ||
                       contains_word_bounded(lower, "total rainfall");
    if (accumulated) {
        v.kind = PrecipKind::AccumulatedAmount;
        v.accumulation_hours = detail::parse_accumulation_hours(lower);
        return v;
    }
    if (contains_word_bounded(lower, "rate") || lower.find("instantaneous") != std::string::npos ||
        contains_word_bounded(lower, "intensity")) {
        v.kind = PrecipKind::Rate;
        return v;
    }
    return v;
}

// ---------------------------------------------------------------------------
// Question 2 helper and questions 5/6: free-text lists

inline std::string parse_domain_answer(const std::string& text) {
    std::string first_line = text;
    if (size_t nl = first_line.find('\n'); nl != std::string::npos) {
        first_line = first_line.substr(0, nl);
    }
    std::string t = collapse_whitespace(first_line);
    while (!t.empty() && (t.back() == '.' || t.back() == '!')) t.pop_back();
    std::string lower = to_lower(t);
    if (lower == "nah" || lower == "no" || lower == "none" || lower == "n/a") return "";
    return t;
}

// Region strings are stored verbatim per item; the artifact never geocodes
// them (the difference maps use the simulation-domain boxes instead).
inline std::vector<std::string> parse_region_answer(const std::string& text) {
    std::string t = trim(text);
    std::string lower = to_lower(t);
    while (!lower.empty() && (lower.back() == '.' || lower.back() == '!')) lower.pop_back();
    if (lower.empty() || lower == "nah" || lower == "no" || lower == "none" || lower == "n/a") {
        return {};
    }

    // split on newlines and semicolons first, then commas and " and "
    std::vector<std::string> coarse;
    for (const auto& line : split(t, '\n')) {
        for (const auto& piece : split(line, ';')) coarse.push_back(piece);
    }
    std::vector<std::string> out;
    for (const auto& piece : coarse) {
        for (auto& item : split(piece, ',')) {
            size_t pos;
            std::string work = item;
            while ((pos = to_lower(work).find(" and ")) != std::string::npos) {
                out.push_back(work.substr(0, pos));
                work = work.substr(pos + 5);
            }
            out.push_back(work);
        }
    }
    std::vector<std::string> cleaned;
    for (auto& item : out) {
        std::string s = collapse_whitespace(item);
        // strip leading bullets / numbering
        while (!s.empty() && (s.front() == '-' || s.front() == '*' || s.front() == '+')) {
            s = trim(s.substr(1));
        }
        if (s.size() >= 2 && std::isdigit(static_cast<unsigned char>(s[0])) &&
            (s[1] == '.' || s[1] == ')')) {
            s = trim(s.substr(2));
        }
        while (!s.empty() && (s.back() == '.' || s.back() == '!')) s.pop_back();
        std::string lw = to_lower(s);
        if (s.empty() || lw == "nah" || lw == "no" || lw == "none" || lw == "and") continue;
        cleaned.push_back(s);
    }
    return cleaned;
}

// ---------------------------------------------------------------------------
// Geocoding

namespace detail {

inline std::string normalize_degrees_text(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (size_t i = 0; i < text.size(); ++i) {
        unsigned char c = text[i];
        if (c == 0xE2 && i + 2 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0x88 &&
            static_cast<unsigned char>(text[i + 2]) == 0x92) {
            out.push_back('-');  // U+2212 minus sign
            i += 2;
        } else if (c == 0xC2 && i + 1 < text.size() &&
                   static_cast<unsigned char>(text[i + 1]) == 0xB0) {
            out.push_back(' ');  // degree sign
            i += 1;
        } else {
            out.push_back(text[i]);
        }
    }
    return out;
}

inline bool direction_label_at(const std::string& lower, size_t pos, const std::string& skip) {
    for (const char* label : {"north", "south", "west", "east"}) {
        if (label == skip) continue;
        if (lower.compare(pos, std::strlen(label), label) == 0 &&
            (pos == 0 || !is_word_char(lower[pos - 1]))) {
            return true;
        }
    }
    return false;
}

// Signed decimal following a direction label, stopping at the next label so
// "north, south: 25" never assigns 25 to north.
inline std::optional<double> labeled_value(const std::string& lower, const std::string& label) {
    size_t pos = 0;
    while ((pos = find_word_prefix(lower, label, pos)) != std::string::npos) {
        size_t scan_end = std::min(lower.size(), pos + label.size() + 40);
        for (size_t i = pos + label.size(); i < scan_end; ++i) {
            if (direction_label_at(lower, i, label)) break;
            char c = lower[i];
            bool number_start =
                std::isdigit(static_cast<unsigned char>(c)) ||
                (c == '-' && i + 1 < lower.size() &&
                 std::isdigit(static_cast<unsigned char>(lower[i + 1])));
            if (number_start) {
                size_t j = i;
                if (lower[j] == '-') ++j;
                while (j < lower.size() &&
                       (std::isdigit(static_cast<unsigned char>(lower[j])) || lower[j] == '.')) {
                    ++j;
                }
                try {
                    return std::stod(lower.substr(i, j - i));
                } catch (...) {
                    return std::nullopt;
                }
            }
        }
        pos += label.size();
    }
    return std::nullopt;
}

}  // namespace detail

// Parse "north: 35, south: 25, west: 100, east: 110" style responses into a
// validated GeoBox. Throws GeocodeParseFailure / GeocodeInvalid.
inline GeoBox parse_geocode_response(const std::string& response) {
    std::string lower = to_lower(detail::normalize_degrees_text(response));
    auto north = detail::labeled_value(lower, "north");
    auto south = detail::labeled_value(lower, "south");
    auto west = detail::labeled_value(lower, "west");
    auto east = detail::labeled_value(lower, "east");
    if (!north || !south || !west || !east) {
        throw Error("GeocodeParseFailure", "response lacks four labeled decimal degrees");
    }
    GeoBox box{*north, *south, *west, *east, *west > *east};
    box.validate();
    return box;
}

// Gateway-backed geocoder with a per-domain cache: two records with the
// same domain name cost at most one live call.
class Geocoder {
public:
    explicit Geocoder(llm::Gateway& gateway) : gateway_(gateway) {}

    GeoBox geocode(const std::string& domain_name, const std::string& record_id = {}) {
        std::string key = to_lower(collapse_whitespace(domain_name));
        if (key.empty()) throw Error("EmptyDomainName", "domain name is empty");
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = cache_.find(key);
            if (it != cache_.end()) return it->second;
        }
        std::string prompt = llm::geocode_prompt(domain_name);
        std::string response = gateway_.complete(record_id, llm::PromptId::Geocode, "geocode",
                                                 fnv1a64(key), "", prompt);
        GeoBox box = parse_geocode_response(response);
        std::lock_guard<std::mutex> lock(mutex_);
        cache_.emplace(key, box);
        return box;
    }

private:
    llm::Gateway& gateway_;
    std::mutex mutex_;
    std::map<std::string, GeoBox> cache_;
};

inline GeoBox geocode_domain(const std::string& domain_name, llm::Gateway& gateway) {
    Geocoder geocoder(gateway);
    return geocoder.geocode(domain_name);
}

// ---------------------------------------------------------------------------
// Questions 7/8: metric extraction

struct MetricParse {
    std::vector<MetricSample> samples;
    std::vector<std::string> warnings;
};

namespace detail {

// Canonical RMSE units recognized next to a value. Longest first.
inline const std::vector<std::pair<std::string, std::string>>& unit_patterns() {
    static const std::vector<std::pair<std::string, std::string>> patterns = {
        {"mm per day", "mm/day"}, {"mm day-1", "mm/day"}, {"mm/day", "mm/day"},
        {"mm d-1", "mm/day"},     {"mm/d", "mm/day"},
        {"mm per hour", "mm/h"},  {"mm hr-1", "mm/h"},    {"mm h-1", "mm/h"},
        {"mm/hr", "mm/h"},        {"mm/h", "mm/h"},
        {"mm/3hr", "mm/3h"},      {"mm/3 h", "mm/3h"},    {"mm/3h", "mm/3h"},
        {"mm 3h-1", "mm/3h"},
        {"mm/6hr", "mm/6h"},      {"mm/6 h", "mm/6h"},    {"mm/6h", "mm/6h"},
        {"mm 6h-1", "mm/6h"},
        {"cm per day", "cm/day"}, {"cm day-1", "cm/day"}, {"cm/day", "cm/day"},
        {"cm d-1", "cm/day"},     {"cm/d", "cm/day"},
        {"inches/day", "in/day"}, {"inch/day", "in/day"}, {"in/day", "in/day"},
        {"in day-1", "in/day"},   {"in d-1", "in/day"},
        {"kg m-2", "mm"},         {"kg/m2", "mm"},        {"kg/m^2", "mm"},
        {"millimeters", "mm"},    {"millimetres", "mm"},  {"mm", "mm"},
    };
    return patterns;
}

inline std::optional<std::string> unit_after(const std::string& lower, size_t pos) {
    size_t start = pos;
    while (start < lower.size() && lower[start] == ' ') ++start;
    std::string window = lower.substr(start, 14);
    // normalize "^-1" and exponent carets away so "mm day^-1" matches
    std::string flat;
    for (char c : window) {
        if (c == '^') continue;
        flat.push_back(c);
    }
    for (const auto& [pattern, canonical] : unit_patterns()) {
        if (flat.rfind(pattern, 0) == 0) {
            size_t end = pattern.size();
            if (end < flat.size() && is_word_char(flat[end]) &&
                is_word_char(pattern.back())) {
                continue;  // "mm" must not match inside "mmx"
            }
            return canonical;
        }
    }
    return std::nullopt;
}

struct NumberToken {
    size_t pos = 0;
    size_t end = 0;
    double value = 0;
};

inline std::vector<NumberToken> scan_numbers(const std::string& text) {
    std::vector<NumberToken> out;
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        bool sign = (c == '-' || c == '+') && i + 1 < text.size() &&
                    std::isdigit(static_cast<unsigned char>(text[i + 1]));
        if (!sign && !std::isdigit(static_cast<unsigned char>(c))) continue;
        if (i > 0) {
            char prev = text[i - 1];
            // numbers glued to letters or '/' are unit fragments ("mm/3h",
            // "day-1"); require a clean left context
            if (is_word_char(prev) || prev == '/' || prev == '.' || prev == '-' || prev == '^') {
                while (i + 1 < text.size() &&
                       (std::isdigit(static_cast<unsigned char>(text[i + 1])) || text[i + 1] == '.')) {
                    ++i;
                }
                continue;
            }
        }
        size_t j = i;
        if (text[j] == '-' || text[j] == '+') ++j;
        size_t digits_start = j;
        bool saw_dot = false;
        while (j < text.size() &&
               (std::isdigit(static_cast<unsigned char>(text[j])) || (text[j] == '.' && !saw_dot))) {
            if (text[j] == '.') {
                if (j + 1 >= text.size() || !std::isdigit(static_cast<unsigned char>(text[j + 1]))) {
                    break;  // sentence-ending period
                }
                saw_dot = true;
            }
            ++j;
        }
        if (j == digits_start) continue;
        NumberToken tok;
        tok.pos = i;
        tok.end = j;
        try {
            tok.value = std::stod(text.substr(i, j - i));
        } catch (...) {
            i = j;
            continue;
        }
        out.push_back(tok);
        i = j - 1;
    }
    return out;
}

inline std::optional<SchemeId> scheme_in_span(const std::string& text, size_t begin, size_t end,
                                              const AliasTable& table, bool take_last) {
    if (begin >= end || begin >= text.size()) return std::nullopt;
    std::string span = text.substr(begin, std::min(end, text.size()) - begin);
    auto matches = table.scan("microphysics", span);
    std::optional<SchemeId> found;
    for (const auto& m : matches) {
        if (m.canonical == "None") continue;
        found = scheme_from_string(m.canonical);
        if (!take_last) return found;
    }
    return found;
}

}  // namespace detail

// Extract metric samples from a question 7/8 answer. The leading yes/no is
// consumed ("No" short-circuits to an empty list). RMSE values pick up an
// adjacent unit; both kinds pick up a scheme attribution from a following
// parenthetical or the preceding clause. CC values outside [-1, 1] and
// negative RMSE values are dropped with a warning.
inline MetricParse parse_metric_answer(const std::string& text, MetricKind kind,
                                       const AliasTable& table) {
    MetricParse result;
    std::string lower = to_lower(text);

    // leading yes/no
    size_t body_start = 0;
    {
        size_t i = 0;
        while (i < text.size() && !is_word_char(text[i])) ++i;
        size_t j = i;
        while (j < text.size() && is_word_char(text[j])) ++j;
        std::string first = to_lower(text.substr(i, j - i));
        if (first == "no") return result;
        if (first == "yes") body_start = j;
    }

    auto numbers = detail::scan_numbers(text);
    size_t prev_end = body_start;
    for (size_t n = 0; n < numbers.size(); ++n) {
        const auto& tok = numbers[n];
        if (tok.pos < body_start) continue;
        size_t next_start = n + 1 < numbers.size() ? numbers[n + 1].pos : text.size();

        // percentages are a different metric; skip
        size_t after = tok.end;
        while (after < text.size() && text[after] == ' ') ++after;
        if (after < text.size() && text[after] == '%') {
            prev_end = tok.end;
            continue;
        }

        MetricSample sample;
        sample.kind = kind;
        sample.value = tok.value;

        if (kind == MetricKind::RMSE) {
            sample.unit = detail::unit_after(lower, tok.end);
            if (sample.value < 0) {
                result.warnings.push_back("negative RMSE value dropped: " +
                                          format_trimmed(sample.value, 4));
                prev_end = tok.end;
                continue;
            }
        } else {
            if (sample.value < -1.0 || sample.value > 1.0) {
                result.warnings.push_back("CC value outside [-1, 1] dropped: " +
                                          format_trimmed(sample.value, 4));
                prev_end = tok.end;
                continue;
            }
        }

        // scheme attribution: parenthetical right after the value wins,
        // else the clause before it
        std::optional<SchemeId> scheme;
        size_t paren_scan = tok.end;
        while (paren_scan < text.size() && paren_scan < tok.end + 20 && text[paren_scan] != '(' &&
               text[paren_scan] != ',' && text[paren_scan] != ';' && text[paren_scan] != '\n') {
            ++paren_scan;
        }
        if (paren_scan < text.size() && text[paren_scan] == '(') {
            size_t close = text.find(')', paren_scan);
            if (close != std::string::npos && close < next_start + 40) {
                scheme = detail::scheme_in_span(text, paren_scan, close + 1, table, false);
            }
        }
        if (!scheme) scheme = detail::scheme_in_span(text, prev_end, tok.pos, table, true);
        sample.scheme = scheme;

        result.samples.push_back(std::move(sample));
        prev_end = tok.end;
    }
    return result;
}

// Unit normalization to mm/day. Bare "mm" needs the record's accumulation
// period; inconvertible units leave unit_normalized absent.
inline MetricSample normalize_rmse(MetricSample sample,
                                   std::optional<double> accumulation_hours = std::nullopt) {
    if (sample.kind != MetricKind::RMSE) {
        throw Error("BadMetric", "normalize_rmse expects an RMSE sample");
    }
    sample.unit_normalized.reset();
    if (!sample.unit) return sample;
    const std::string& u = *sample.unit;
    if (u == "mm/day") sample.unit_normalized = sample.value;
    else if (u == "mm/h") sample.unit_normalized = sample.value * 24.0;
    else if (u == "mm/3h") sample.unit_normalized = sample.value * 8.0;
    else if (u == "mm/6h") sample.unit_normalized = sample.value * 4.0;
    else if (u == "cm/day") sample.unit_normalized = sample.value * 10.0;
    else if (u == "in/day") sample.unit_normalized = sample.value * 25.4;
    else if (u == "mm" && accumulation_hours && *accumulation_hours > 0) {
        sample.unit_normalized = sample.value * 24.0 / *accumulation_hours;
    }
    return sample;
}

// ---------------------------------------------------------------------------
// Gateway-driven extraction

enum class ExtractionCallMode { SingleCall, PerQuestion };

namespace detail {

inline std::string strip_leading_marker(const std::string& response, int question) {
    std::string t = trim(response);
    if (t.size() >= 2 && t[0] == static_cast<char>('0' + question) &&
        (t[1] == '.' || t[1] == ')' || t[1] == ':')) {
        return trim(t.substr(2));
    }
    return t;
}

}  // namespace detail

// Ask the eight questions about one document. Single-call mode sends the
// whole prompt and splits the completion on its numbered markers
// (SplitFailure when they cannot be aligned); per-question mode issues
// eight separate calls keyed "extraction_q1".."extraction_q8".
inline std::array<std::string, 8> run_extraction(const doc::ContextWindow& window,
                                                 uint64_t content_hash, llm::Gateway& gateway,
                                                 ExtractionCallMode mode =
                                                     ExtractionCallMode::SingleCall) {
    std::array<std::string, 8> answers;
    if (mode == ExtractionCallMode::SingleCall) {
        std::string response =
            gateway.complete(window.record_id, llm::PromptId::Extraction, "extraction",
                             content_hash, window.joined(), llm::extraction_prompt());
        return split_extraction_answers(response);
    }
    for (int q = 1; q <= 8; ++q) {
        std::string prompt = llm::extraction_preamble() + "\n\n" + llm::extraction_question(q);
        std::string response = gateway.complete(window.record_id, llm::PromptId::Extraction,
                                                "extraction_q" + std::to_string(q), content_hash,
                                                window.joined(), prompt);
        answers[static_cast<size_t>(q - 1)] = detail::strip_leading_marker(response, q);
    }
    return answers;
}

inline std::array<std::string, 8> run_extraction(const doc::DocText& text, llm::Gateway& gateway,
                                                 size_t context_budget_tokens,
                                                 ExtractionCallMode mode =
                                                     ExtractionCallMode::SingleCall) {
    doc::ContextWindow window = doc::build_context(text, context_budget_tokens);
    return run_extraction(window, text.content_hash, gateway, mode);
}

// ---------------------------------------------------------------------------
// Record assembly and serialization

// Build the typed record from the eight raw answers.
inline ExtractionRecord assemble_extraction(const std::string& record_id,
                                            const std::array<std::string, 8>& answers,
                                            const AliasTable& table) {
    ExtractionRecord rec;
    rec.record_id = record_id;
    rec.raw_answers = answers;
    rec.configs = parse_config_answer(answers[0], table);
    rec.domain_name = parse_domain_answer(answers[1]);
    rec.variable = parse_variable_answer(answers[2]);
    rec.verdicts = attribute_bias(answers[3], rec.named_schemes(), table);
    rec.over_regions = parse_region_answer(answers[4]);
    rec.under_regions = parse_region_answer(answers[5]);

    auto rmse = parse_metric_answer(answers[6], MetricKind::RMSE, table);
    for (auto& s : rmse.samples) {
        s = normalize_rmse(std::move(s), rec.variable.accumulation_hours);
        s.record_id = record_id;
        rec.metrics.push_back(std::move(s));
    }
    auto cc = parse_metric_answer(answers[7], MetricKind::CC, table);
    for (auto& s : cc.samples) {
        s.record_id = record_id;
        rec.metrics.push_back(std::move(s));
    }
    return rec;
}

inline nlohmann::json to_json(const ConfigRecord& c) {
    return {{"microphysics", to_string(c.microphysics)},
            {"radiation", c.radiation.display()},
            {"cumulus", c.cumulus.display()},
            {"pbl", c.pbl.display()},
            {"land_surface", c.land_surface.display()}};
}

inline ConfigRecord config_from_json(const nlohmann::json& j) {
    ConfigRecord c;
    c.microphysics = scheme_from_string(j.at("microphysics").get<std::string>());
    c.radiation = SlotValue::from_display(j.at("radiation").get<std::string>());
    c.cumulus = SlotValue::from_display(j.at("cumulus").get<std::string>());
    c.pbl = SlotValue::from_display(j.at("pbl").get<std::string>());
    c.land_surface = SlotValue::from_display(j.at("land_surface").get<std::string>());
    return c;
}

inline nlohmann::json to_json(const MetricSample& s) {
    nlohmann::json j;
    j["kind"] = to_string(s.kind);
    j["value"] = s.value;
    if (s.unit) j["unit"] = *s.unit;
    if (s.unit_normalized) j["unit_normalized"] = *s.unit_normalized;
    if (s.scheme) j["scheme"] = to_string(*s.scheme);
    return j;
}

inline MetricSample metric_from_json(const nlohmann::json& j, const std::string& record_id) {
    MetricSample s;
    s.kind = j.at("kind").get<std::string>() == "RMSE" ? MetricKind::RMSE : MetricKind::CC;
    s.value = j.at("value").get<double>();
    if (j.contains("unit")) s.unit = j.at("unit").get<std::string>();
    if (j.contains("unit_normalized")) s.unit_normalized = j.at("unit_normalized").get<double>();
    if (j.contains("scheme")) s.scheme = scheme_from_string(j.at("scheme").get<std::string>());
    s.record_id = record_id;
    return s;
}

inline nlohmann::json to_json(const ExtractionRecord& rec) {
    nlohmann::json j;
    j["schema_version"] = kExtractionSchemaVersion;
    j["record_id"] = rec.record_id;
    nlohmann::json configs = nlohmann::json::array();
    for (const auto& c : rec.configs) configs.push_back(to_json(c));
    j["configs"] = std::move(configs);
    j["domain_name"] = rec.domain_name;
    if (rec.geo_box) j["geo_box"] = rec.geo_box->to_json();
    nlohmann::json variable;
    variable["kind"] = to_string(rec.variable.kind);
    if (rec.variable.accumulation_hours) {
        variable["accumulation_hours"] = *rec.variable.accumulation_hours;
    }
    j["variable"] = std::move(variable);
    nlohmann::json verdicts;
    for (const auto& [scheme, verdict] : rec.verdicts) {
        verdicts[to_string(scheme)] = to_string(verdict);
    }
    j["verdicts"] = std::move(verdicts);
    j["over_regions"] = rec.over_regions;
    j["under_regions"] = rec.under_regions;
    nlohmann::json metrics = nlohmann::json::array();
    for (const auto& m : rec.metrics) metrics.push_back(to_json(m));
    j["metrics"] = std::move(metrics);
    j["raw_answers"] = rec.raw_answers;
    return j;
}

inline ExtractionRecord extraction_from_json(const nlohmann::json& j) {
    ExtractionRecord rec;
    rec.record_id = j.at("record_id").get<std::string>();
    for (const auto& c : j.value("configs", nlohmann::json::array())) {
        rec.configs.push_back(config_from_json(c));
    }
    rec.domain_name = j.value("domain_name", "");
    if (j.contains("geo_box")) rec.geo_box = GeoBox::from_json(j.at("geo_box"));
    if (j.contains("variable")) {
        const auto& v = j.at("variable");
        rec.variable.kind = precip_kind_from_string(v.value("kind", "Unstated"));
        if (v.contains("accumulation_hours")) {
            rec.variable.accumulation_hours = v.at("accumulation_hours").get<double>();
        }
    }
    if (j.contains("verdicts")) {
        for (const auto& [scheme, verdict] : j.at("verdicts").items()) {
            rec.verdicts[scheme_from_string(scheme)] =
                bias_verdict_from_string(verdict.get<std::string>());
        }
    }
    rec.over_regions = j.value("over_regions", std::vector<std::string>{});
    rec.under_regions = j.value("under_regions", std::vector<std::string>{});
    for (const auto& m : j.value("metrics", nlohmann::json::array())) {
        rec.metrics.push_back(metric_from_json(m, rec.record_id));
    }
    if (j.contains("raw_answers")) {
        auto raw = j.at("raw_answers").get<std::vector<std::string>>();
        for (size_t i = 0; i < raw.size() && i < 8; ++i) rec.raw_answers[i] = raw[i];
    }
    return rec;
}

inline std::string extractions_to_jsonl(const std::vector<ExtractionRecord>& records) {
    std::string out;
    for (const auto& rec : records) {
        out += to_json(rec).dump();
        out.push_back('\n');
    }
    return out;
}

inline std::vector<ExtractionRecord> extractions_from_jsonl(std::string_view text) {
    std::vector<ExtractionRecord> out;
    for (const auto& line : split(text, '\n')) {
        std::string t = trim(line);
        if (t.empty()) continue;
        out.push_back(extraction_from_json(nlohmann::json::parse(t)));
    }
    return out;
}

}  // namespace litmeta::extraction
