#pragma once

#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "litmeta/common.hpp"

namespace litmeta::extraction {

// Canonical microphysics parameterizations. Other preserves the raw surface
// string; None marks a configuration whose microphysics was never mentioned.
enum class Scheme {
    Lin, Ferrier, WSM3, WSM5, WSM6, GCE, Thompson, Morrison, WDM,
    MY, Kessler, NSSL, SBULin, P3, CAM_MG, Bin, None, Other,
};

struct SchemeId {
    Scheme value = Scheme::None;
    std::string other_text;  // only for Scheme::Other

    bool operator==(const SchemeId&) const = default;
    auto operator<=>(const SchemeId&) const = default;

    bool is_named() const { return value != Scheme::None && value != Scheme::Other; }
};

inline const std::vector<std::pair<Scheme, std::string>>& scheme_names() {
    static const std::vector<std::pair<Scheme, std::string>> names = {
        {Scheme::Lin, "Lin"},           {Scheme::Ferrier, "Ferrier"},
        {Scheme::WSM3, "WSM3"},         {Scheme::WSM5, "WSM5"},
        {Scheme::WSM6, "WSM6"},         {Scheme::GCE, "GCE"},
        {Scheme::Thompson, "Thompson"}, {Scheme::Morrison, "Morrison"},
        {Scheme::WDM, "WDM"},           {Scheme::MY, "MY"},
        {Scheme::Kessler, "Kessler"},   {Scheme::NSSL, "NSSL"},
        {Scheme::SBULin, "SBU-Lin"},    {Scheme::P3, "P3"},
        {Scheme::CAM_MG, "CAM-MG"},     {Scheme::Bin, "Bin"},
        {Scheme::None, "None"},
    };
    return names;
}

inline std::string to_string(const SchemeId& id) {
    if (id.value == Scheme::Other) return "other:" + id.other_text;
    for (const auto& [scheme, name] : scheme_names()) {
        if (scheme == id.value) return name;
    }
    return "None";
}

inline SchemeId scheme_from_string(const std::string& s) {
    if (s.rfind("other:", 0) == 0) return {Scheme::Other, s.substr(6)};
    for (const auto& [scheme, name] : scheme_names()) {
        if (name == s) return {scheme};
    }
    throw Error("BadEnum", "unknown scheme '" + s + "'");
}

// The nine bulk schemes tracked throughout the analytics.
inline const std::vector<Scheme>& main_schemes() {
    static const std::vector<Scheme> schemes = {
        Scheme::Lin,  Scheme::Ferrier,  Scheme::GCE,      Scheme::WSM3, Scheme::WSM5,
        Scheme::WSM6, Scheme::Thompson, Scheme::Morrison, Scheme::WDM,
    };
    return schemes;
}

enum class MomentClass { SingleMoment, DoubleMoment, MixedMoment, Bin };

inline std::string to_string(MomentClass m) {
    switch (m) {
        case MomentClass::SingleMoment: return "SingleMoment";
        case MomentClass::DoubleMoment: return "DoubleMoment";
        case MomentClass::MixedMoment: return "MixedMoment";
        case MomentClass::Bin: return "Bin";
    }
    return "SingleMoment";
}

inline MomentClass moment_class_from_string(const std::string& s) {
    if (s == "SingleMoment") return MomentClass::SingleMoment;
    if (s == "DoubleMoment") return MomentClass::DoubleMoment;
    if (s == "MixedMoment") return MomentClass::MixedMoment;
    if (s == "Bin") return MomentClass::Bin;
    throw Error("BadEnum", "unknown moment class '" + s + "'");
}

struct SchemeMeta {
    SchemeId scheme;
    MomentClass moment_class = MomentClass::SingleMoment;
    std::optional<int> wrf_code_year;
};

class SchemeMetaTable {
public:
    static SchemeMetaTable defaults() {
        SchemeMetaTable t;
        auto add = [&](Scheme s, MomentClass m, std::optional<int> year) {
            t.rows_.push_back({{s}, m, year});
        };
        add(Scheme::Kessler, MomentClass::SingleMoment, 2000);
        add(Scheme::Lin, MomentClass::SingleMoment, 2000);
        add(Scheme::Ferrier, MomentClass::SingleMoment, 2001);
        add(Scheme::GCE, MomentClass::SingleMoment, 2003);
        add(Scheme::WSM3, MomentClass::SingleMoment, 2004);
        add(Scheme::WSM5, MomentClass::SingleMoment, 2004);
        add(Scheme::WSM6, MomentClass::SingleMoment, 2004);
        add(Scheme::MY, MomentClass::DoubleMoment, 2006);
        add(Scheme::Morrison, MomentClass::DoubleMoment, 2008);
        add(Scheme::Thompson, MomentClass::DoubleMoment, 2009);
        add(Scheme::SBULin, MomentClass::SingleMoment, 2009);
        add(Scheme::WDM, MomentClass::DoubleMoment, 2010);
        add(Scheme::CAM_MG, MomentClass::DoubleMoment, 2010);
        add(Scheme::NSSL, MomentClass::MixedMoment, 2012);
        add(Scheme::P3, MomentClass::DoubleMoment, 2015);
        add(Scheme::Bin, MomentClass::Bin, std::nullopt);
        return t;
    }

    static SchemeMetaTable from_json(const nlohmann::json& j) {
        SchemeMetaTable t;
        for (const auto& row : j) {
            SchemeMeta m;
            m.scheme = scheme_from_string(row.at("scheme").get<std::string>());
            m.moment_class = moment_class_from_string(row.at("moment_class").get<std::string>());
            if (row.contains("wrf_code_year") && !row.at("wrf_code_year").is_null()) {
                m.wrf_code_year = row.at("wrf_code_year").get<int>();
            }
            t.rows_.push_back(std::move(m));
        }
        return t;
    }

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& row : rows_) {
            nlohmann::json r;
            r["scheme"] = to_string(row.scheme);
            r["moment_class"] = to_string(row.moment_class);
            if (row.wrf_code_year) r["wrf_code_year"] = *row.wrf_code_year;
            else r["wrf_code_year"] = nullptr;
            j.push_back(std::move(r));
        }
        return j;
    }

    const SchemeMeta* find(const SchemeId& id) const {
        for (const auto& row : rows_) {
            if (row.scheme == id) return &row;
        }
        return nullptr;
    }

    const std::vector<SchemeMeta>& rows() const { return rows_; }

private:
    std::vector<SchemeMeta> rows_;
};

// Configuration slot value for the four non-microphysics slots. The
// vocabulary per slot ships as editable data, so the canonical value is a
// validated string rather than a hard enum. "None" means not used or not
// mentioned; "Other" preserves the surface string.
struct SlotValue {
    std::string canonical = "None";
    std::string other_text;

    bool operator==(const SlotValue&) const = default;
    auto operator<=>(const SlotValue&) const = default;

    bool is_none() const { return canonical == "None"; }
    bool is_other() const { return canonical == "Other"; }

    std::string display() const { return is_other() ? "other:" + other_text : canonical; }

    static SlotValue from_display(const std::string& s) {
        if (s.rfind("other:", 0) == 0) return {"Other", s.substr(6)};
        return {s, ""};
    }
};

struct AliasMatch {
    size_t pos = 0;
    size_t len = 0;
    std::string canonical;
};

// Alias table mapping lowercase surface forms to canonical names, one map
// per configuration slot. Ships as editable JSON (data/alias_table.json).
class AliasTable {
public:
    using SlotMap = std::map<std::string, std::string>;

    static const std::vector<std::string>& slot_names() {
        static const std::vector<std::string> names = {"microphysics", "radiation", "cumulus",
                                                       "pbl", "land_surface"};
        return names;
    }

    static AliasTable defaults();

    static AliasTable from_json(const nlohmann::json& j) {
        AliasTable t;
        for (const auto& slot : slot_names()) {
            if (!j.contains(slot)) continue;
            for (const auto& [alias, canonical] : j.at(slot).items()) {
                t.slots_[slot][to_lower(alias)] = canonical.get<std::string>();
            }
        }
        return t;
    }

    static AliasTable from_file(const std::filesystem::path& path) {
        return from_json(nlohmann::json::parse(read_file(path)));
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        for (const auto& [slot, table] : slots_) {
            nlohmann::json m;
            for (const auto& [alias, canonical] : table) m[alias] = canonical;
            j[slot] = std::move(m);
        }
        return j;
    }

    bool operator==(const AliasTable& other) const { return slots_ == other.slots_; }

    const SlotMap& slot(const std::string& name) const {
        auto it = slots_.find(name);
        if (it == slots_.end()) throw Error("BadSlot", "unknown slot '" + name + "'");
        return it->second;
    }

    // Single-surface canonicalization: exact alias match first, then the
    // longest alias contained in the surface (word-bounded), else Other.
    std::string canonicalize(const std::string& slot_name, const std::string& surface) const {
        const SlotMap& table = slot(slot_name);
        std::string lower = to_lower(collapse_whitespace(surface));
        auto exact = table.find(lower);
        if (exact != table.end()) return exact->second;

        const std::string* best = nullptr;
        size_t best_len = 0;
        for (const auto& [alias, canonical] : table) {
            if (alias.size() > best_len && contains_word_bounded(lower, alias)) {
                best = &canonical;
                best_len = alias.size();
            }
        }
        return best ? *best : std::string("Other");
    }

    // Aliases that collide with ordinary prose ("my" the pronoun, bare "g")
    // are matched only by exact canonicalization, never by free-text scan.
    static bool scan_excluded(const std::string& alias) {
        static const std::set<std::string> stoplist = {"my", "g"};
        return alias.size() < 2 || stoplist.count(alias) > 0;
    }

    // Free-text scan: all word-bounded alias occurrences, longest match
    // winning on overlap.
    std::vector<AliasMatch> scan(const std::string& slot_name, const std::string& text) const {
        const SlotMap& table = slot(slot_name);
        std::string lower = to_lower(text);
        std::vector<AliasMatch> candidates;
        for (const auto& [alias, canonical] : table) {
            if (scan_excluded(alias)) continue;
            size_t pos = 0;
            while ((pos = find_word_bounded(lower, alias, pos)) != std::string::npos) {
                candidates.push_back({pos, alias.size(), canonical});
                pos += 1;
            }
        }
        std::sort(candidates.begin(), candidates.end(), [](const AliasMatch& a, const AliasMatch& b) {
            if (a.len != b.len) return a.len > b.len;
            return a.pos < b.pos;
        });
        std::vector<AliasMatch> accepted;
        for (const auto& c : candidates) {
            bool overlaps = false;
            for (const auto& a : accepted) {
                if (c.pos < a.pos + a.len && a.pos < c.pos + c.len) {
                    overlaps = true;
                    break;
                }
            }
            if (!overlaps) accepted.push_back(c);
        }
        std::sort(accepted.begin(), accepted.end(),
                  [](const AliasMatch& a, const AliasMatch& b) { return a.pos < b.pos; });
        return accepted;
    }

    // Distinct canonical names in order of first appearance.
    std::vector<std::string> scan_distinct(const std::string& slot_name,
                                           const std::string& text) const {
        std::vector<std::string> out;
        for (const auto& m : scan(slot_name, text)) {
            if (std::find(out.begin(), out.end(), m.canonical) == out.end()) {
                out.push_back(m.canonical);
            }
        }
        return out;
    }

private:
    std::map<std::string, SlotMap> slots_;

    friend AliasTable make_default_alias_table();
};

inline AliasTable make_default_alias_table() {
    AliasTable t;
    auto& micro = t.slots_["microphysics"];
    micro = {
        {"lin", "Lin"}, {"purdue lin", "Lin"}, {"purdue-lin", "Lin"},
        {"ferrier", "Ferrier"}, {"eta ferrier", "Ferrier"}, {"ferrier-aligo", "Ferrier"},
        {"wsm3", "WSM3"}, {"wsm-3", "WSM3"}, {"wsm 3", "WSM3"},
        {"wrf single-moment 3-class", "WSM3"}, {"wrf single moment 3-class", "WSM3"},
        {"wrf single-moment 3 class", "WSM3"},
        {"wsm5", "WSM5"}, {"wsm-5", "WSM5"}, {"wsm 5", "WSM5"},
        {"wrf single-moment 5-class", "WSM5"}, {"wrf single moment 5-class", "WSM5"},
        {"wrf single-moment 5 class", "WSM5"},
        {"wsm6", "WSM6"}, {"wsm-6", "WSM6"}, {"wsm 6", "WSM6"},
        {"wrf single-moment 6-class", "WSM6"}, {"wrf single moment 6-class", "WSM6"},
        {"wrf single-moment 6 class", "WSM6"},
        {"gce", "GCE"}, {"goddard", "GCE"}, {"goddard cumulus ensemble", "GCE"},
        {"thompson", "Thompson"}, {"thompson aerosol-aware", "Thompson"},
        {"aerosol-aware thompson", "Thompson"},
        {"morrison", "Morrison"}, {"morrison 2-moment", "Morrison"},
        {"morrison two-moment", "Morrison"}, {"morrison double-moment", "Morrison"},
        {"wdm", "WDM"}, {"wdm5", "WDM"}, {"wdm6", "WDM"}, {"wdm7", "WDM"},
        {"wdm-5", "WDM"}, {"wdm-6", "WDM"}, {"wdm-7", "WDM"},
        {"wrf double-moment", "WDM"}, {"wrf double-moment 5-class", "WDM"},
        {"wrf double-moment 6-class", "WDM"}, {"wrf double-moment 7-class", "WDM"},
        {"my", "MY"}, {"milbrandt", "MY"}, {"milbrandt-yau", "MY"}, {"milbrandt yau", "MY"},
        {"kessler", "Kessler"},
        {"nssl", "NSSL"}, {"national severe storms laboratory", "NSSL"},
        {"sbu-lin", "SBU-Lin"}, {"sbu lin", "SBU-Lin"}, {"sbulin", "SBU-Lin"},
        {"stony brook", "SBU-Lin"}, {"lin-colle", "SBU-Lin"},
        {"p3", "P3"}, {"predicted particle properties", "P3"},
        {"cam-mg", "CAM-MG"}, {"cam mg", "CAM-MG"}, {"morrison-gettelman", "CAM-MG"},
        {"morrison gettelman", "CAM-MG"},
        {"bin", "Bin"}, {"spectral bin", "Bin"}, {"spectral-bin", "Bin"}, {"sbm", "Bin"},
        {"hujisbm", "Bin"},
        {"none", "None"},
    };
    auto& rad = t.slots_["radiation"];
    rad = {
        {"rrtm", "RRTM/Dudhia"}, {"dudhia", "RRTM/Dudhia"}, {"rrtm/dudhia", "RRTM/Dudhia"},
        {"rrtm-dudhia", "RRTM/Dudhia"}, {"rrtm and dudhia", "RRTM/Dudhia"},
        {"rapid radiative transfer model", "RRTM/Dudhia"},
        {"rrtmg", "RRTMG"}, {"rapid radiative transfer model for gcms", "RRTMG"},
        {"cam", "CAM"}, {"community atmosphere model", "CAM"},
        {"ncar community atmosphere model", "CAM"},
        {"none", "None"},
    };
    auto& cu = t.slots_["cumulus"];
    cu = {
        {"kf", "KF"}, {"kain-fritsch", "KF"}, {"kain fritsch", "KF"},
        {"g", "G"}, {"grell", "G"}, {"grell-devenyi", "G"}, {"grell devenyi", "G"},
        {"grell-freitas", "G"}, {"grell freitas", "G"}, {"grell-3", "G"}, {"grell 3", "G"},
        {"grell-3d", "G"}, {"gd", "G"}, {"gf", "G"}, {"g3", "G"},
        {"bmj", "BMJ"}, {"betts-miller-janjic", "BMJ"}, {"betts miller janjic", "BMJ"},
        {"betts-miller", "BMJ"},
        {"none", "None"},
    };
    auto& pbl = t.slots_["pbl"];
    pbl = {
        {"ysu", "YSU"}, {"yonsei university", "YSU"}, {"yonsei", "YSU"},
        {"myj", "MYJ"}, {"mellor-yamada-janjic", "MYJ"}, {"mellor yamada janjic", "MYJ"},
        {"mynn", "MYNN"}, {"mellor-yamada-nakanishi-niino", "MYNN"},
        {"mellor yamada nakanishi niino", "MYNN"},
        {"none", "None"},
    };
    auto& land = t.slots_["land_surface"];
    land = {
        {"noah", "Noah"}, {"noah-mp", "Noah"}, {"noah mp", "Noah"}, {"unified noah", "Noah"},
        {"noah lsm", "Noah"},
        {"ruc", "RUC"},
        {"none", "None"},
    };
    return t;
}

inline AliasTable AliasTable::defaults() { return make_default_alias_table(); }

// canonicalize_scheme: alias lookup for a microphysics surface string.
// Unknown surfaces become Other with the raw text preserved.
inline SchemeId canonicalize_scheme(const std::string& surface, const AliasTable& table) {
    std::string canonical = table.canonicalize("microphysics", surface);
    if (canonical == "Other") return {Scheme::Other, trim(surface)};
    return scheme_from_string(canonical);
}

inline SchemeId canonicalize_scheme(const std::string& surface) {
    static const AliasTable table = AliasTable::defaults();
    return canonicalize_scheme(surface, table);
}

}  // namespace litmeta::extraction
