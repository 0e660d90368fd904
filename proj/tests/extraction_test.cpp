#include <catch2/catch_amalgamated.hpp>

#include "litmeta/analytics.hpp"
#include "litmeta/extraction.hpp"

using namespace litmeta;
using namespace litmeta::extraction;

namespace {

const AliasTable& table() {
    static const AliasTable t = AliasTable::defaults();
    return t;
}

llm::GatewayOptions quiet_options() {
    llm::GatewayOptions options;
    options.sleeper = [](std::chrono::milliseconds) {};
    options.clock = [] { return std::string("2026-01-01T00:00:00Z"); };
    return options;
}

}  // namespace

TEST_CASE("shipped data files match the built-in defaults") {
    auto shipped = AliasTable::from_file(std::string(LITMETA_SOURCE_DIR) +
                                         "/data/alias_table.json");
    CHECK(shipped == AliasTable::defaults());

    auto meta = SchemeMetaTable::from_json(nlohmann::json::parse(
        read_file(std::string(LITMETA_SOURCE_DIR) + "/data/scheme_meta.json")));
    CHECK(meta.to_json() == SchemeMetaTable::defaults().to_json());

    auto continents = analytics::ContinentTable::from_json(nlohmann::json::parse(
        read_file(std::string(LITMETA_SOURCE_DIR) + "/data/continents.json")));
    CHECK(continents.to_json() == analytics::ContinentTable::defaults().to_json());
}

TEST_CASE("canonicalize_scheme resolves published aliases") {
    CHECK(canonicalize_scheme("WRF Single-Moment 6-class").value == Scheme::WSM6);
    CHECK(canonicalize_scheme("WSM6").value == Scheme::WSM6);
    CHECK(canonicalize_scheme("wsm-6").value == Scheme::WSM6);
    CHECK(canonicalize_scheme("WDM6").value == Scheme::WDM);
    CHECK(canonicalize_scheme("WDM5").value == Scheme::WDM);
    CHECK(canonicalize_scheme("WDM7").value == Scheme::WDM);
    CHECK(canonicalize_scheme("Purdue Lin").value == Scheme::Lin);
    CHECK(canonicalize_scheme("lin").value == Scheme::Lin);
    CHECK(canonicalize_scheme("goddard").value == Scheme::GCE);
    CHECK(canonicalize_scheme("Goddard Cumulus Ensemble").value == Scheme::GCE);
    CHECK(canonicalize_scheme("Milbrandt-Yau").value == Scheme::MY);
    CHECK(canonicalize_scheme("MY").value == Scheme::MY);

    auto other = canonicalize_scheme("SuperNewScheme2042");
    CHECK(other.value == Scheme::Other);
    CHECK(other.other_text == "SuperNewScheme2042");
}

TEST_CASE("canonicalization is idempotent on canonical names") {
    for (const auto& [scheme, name] : scheme_names()) {
        INFO(name);
        CHECK(canonicalize_scheme(name).value == scheme);
    }
}

TEST_CASE("parse_config_answer builds one fully populated record") {
    auto configs = parse_config_answer(
        "WSM6 microphysics, RRTM/Dudhia radiation, KF cumulus, YSU PBL, Noah LSM", table());
    REQUIRE(configs.size() == 1);
    const auto& c = configs[0];
    CHECK(c.microphysics.value == Scheme::WSM6);
    CHECK(c.radiation.canonical == "RRTM/Dudhia");
    CHECK(c.cumulus.canonical == "KF");
    CHECK(c.pbl.canonical == "YSU");
    CHECK(c.land_surface.canonical == "Noah");
}

TEST_CASE("parse_config_answer shares single-valued slots across experiments") {
    auto configs = parse_config_answer(
        "Three experiments with Lin, WSM6, and Thompson microphysics; all use YSU and Noah",
        table());
    REQUIRE(configs.size() == 3);
    CHECK(configs[0].microphysics.value == Scheme::Lin);
    CHECK(configs[1].microphysics.value == Scheme::WSM6);
    CHECK(configs[2].microphysics.value == Scheme::Thompson);
    for (const auto& c : configs) {
        CHECK(c.pbl.canonical == "YSU");
        CHECK(c.land_surface.canonical == "Noah");
        CHECK(c.radiation.is_none());
        CHECK(c.cumulus.is_none());
    }
}

TEST_CASE("parse_config_answer pairs segmented slot values") {
    auto configs = parse_config_answer(
        "Run 1 used WSM6 with the KF cumulus scheme; run 2 used Thompson with BMJ.", table());
    REQUIRE(configs.size() == 2);
    CHECK(configs[0].microphysics.value == Scheme::WSM6);
    CHECK(configs[0].cumulus.canonical == "KF");
    CHECK(configs[1].microphysics.value == Scheme::Thompson);
    CHECK(configs[1].cumulus.canonical == "BMJ");
}

TEST_CASE("parse_config_answer of Nah is a single all-None record") {
    auto configs = parse_config_answer("Nah", table());
    REQUIRE(configs.size() == 1);
    CHECK(configs[0].microphysics.value == Scheme::None);
    CHECK(configs[0].radiation.is_none());
    CHECK(configs[0].cumulus.is_none());
    CHECK(configs[0].pbl.is_none());
    CHECK(configs[0].land_surface.is_none());
}

TEST_CASE("goddard radiation mentions do not create a GCE config") {
    auto configs = parse_config_answer(
        "Thompson microphysics with the Goddard shortwave radiation scheme and Noah LSM",
        table());
    REQUIRE(configs.size() == 1);
    CHECK(configs[0].microphysics.value == Scheme::Thompson);
}

TEST_CASE("CAM-MG microphysics does not double as CAM radiation") {
    auto configs = parse_config_answer("CAM-MG microphysics with RRTMG radiation", table());
    REQUIRE(configs.size() == 1);
    CHECK(configs[0].microphysics.value == Scheme::CAM_MG);
    CHECK(configs[0].radiation.canonical == "RRTMG");
}

TEST_CASE("classify_bias resolves the published synonym examples") {
    CHECK(classify_bias("a pronounced wet bias over the Sichuan Basin") ==
          BiasVerdict::Overestimation);
    CHECK(classify_bias("dry bias in 24-h accumulations") == BiasVerdict::Underestimation);
    CHECK(classify_bias("overestimated in the north but underestimated in the south") ==
          BiasVerdict::Mix);
    CHECK(classify_bias("Nah") == BiasVerdict::NoAnswer);
    CHECK(classify_bias("The study reports seasonal precipitation totals.") ==
          BiasVerdict::NoAnswer);
}

TEST_CASE("every published over-synonym classifies as overestimation") {
    for (const char* phrase :
         {"wet bias", "positive bias", "more", "more intense", "heavier", "larger", "higher",
          "wetter", "stronger", "exceeds", "produce an excess of rainfall",
          "produce too much precipitation", "overestimated"}) {
        INFO(phrase);
        CHECK(classify_bias(phrase) == BiasVerdict::Overestimation);
    }
}

TEST_CASE("every published under-synonym classifies as underestimation") {
    for (const char* phrase :
         {"dry bias", "negative bias", "less", "less intense", "weaker", "smaller", "lower",
          "drier", "generate too little precipitation", "fail to simulate precipitation",
          "cannot simulate precipitation", "underestimated"}) {
        INFO(phrase);
        CHECK(classify_bias(phrase) == BiasVerdict::Underestimation);
    }
}

TEST_CASE("negation flips the matched side") {
    CHECK(classify_bias("precipitation was not overestimated") == BiasVerdict::Underestimation);
    CHECK(classify_bias("the model never underestimated rainfall") == BiasVerdict::Overestimation);
}

TEST_CASE("adding an over-synonym to an under text yields Mix") {
    std::string under = "a dry bias over the plains";
    REQUIRE(classify_bias(under) == BiasVerdict::Underestimation);
    CHECK(classify_bias(under + " but a wet bias along the coast") == BiasVerdict::Mix);
}

TEST_CASE("word boundaries stop substring false positives") {
    CHECK(classify_bias("furthermore, the flower bloomed") == BiasVerdict::NoAnswer);
    CHECK(classify_bias("regardless of the blessed weather") == BiasVerdict::NoAnswer);
}

TEST_CASE("attribute_bias assigns per-scheme verdicts when schemes are named") {
    std::set<SchemeId> schemes = {{Scheme::WSM6}, {Scheme::Thompson}};
    auto verdicts = attribute_bias(
        "WSM6 overestimated precipitation over the basin; Thompson showed a dry bias.", schemes,
        table());
    REQUIRE(verdicts.size() == 2);
    CHECK(verdicts.at({Scheme::WSM6}) == BiasVerdict::Overestimation);
    CHECK(verdicts.at({Scheme::Thompson}) == BiasVerdict::Underestimation);
}

TEST_CASE("attribute_bias applies a single verdict to every scheme otherwise") {
    std::set<SchemeId> schemes = {{Scheme::WSM6}, {Scheme::Thompson}};
    auto verdicts = attribute_bias("the simulated rainfall was overestimated", schemes, table());
    CHECK(verdicts.at({Scheme::WSM6}) == BiasVerdict::Overestimation);
    CHECK(verdicts.at({Scheme::Thompson}) == BiasVerdict::Overestimation);
}

TEST_CASE("parse_variable_answer classifies the three kinds") {
    auto acc = parse_variable_answer("24-h accumulated precipitation");
    CHECK(acc.kind == PrecipKind::AccumulatedAmount);
    CHECK(acc.accumulation_hours == 24.0);

    CHECK(parse_variable_answer("radar reflectivity").kind == PrecipKind::Reflectivity);
    CHECK(parse_variable_answer("rainfall was discussed").kind == PrecipKind::Unstated);
    CHECK(parse_variable_answer("instantaneous rainfall rate").kind == PrecipKind::Rate);

    auto daily = parse_variable_answer("daily accumulated rainfall amount");
    CHECK(daily.kind == PrecipKind::AccumulatedAmount);
    CHECK(daily.accumulation_hours == 24.0);

    auto three_hour = parse_variable_answer("3-hour accumulated precipitation");
    CHECK(three_hour.accumulation_hours == 3.0);
}

TEST_CASE("parse_geocode_response reads labeled signed decimals") {
    auto box = parse_geocode_response("north: 35, south: 25, west: 100, east: 110");
    CHECK(box.north == 35.0);
    CHECK(box.south == 25.0);
    CHECK(box.west == 100.0);
    CHECK(box.east == 110.0);
    CHECK_FALSE(box.wrapped);

    auto verbose = parse_geocode_response(
        "The northern latitude is 42.5 degrees, the southern latitude -10.25, "
        "the western longitude -75, and the eastern longitude -30.");
    CHECK(verbose.north == 42.5);
    CHECK(verbose.south == -10.25);
    CHECK(verbose.west == -75.0);
    CHECK(verbose.east == -30.0);
}

TEST_CASE("invalid geocode responses raise the right errors") {
    CHECK_THROWS_MATCHES(parse_geocode_response("north: 10, south: 40, west: 0, east: 10"), Error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("GeocodeInvalid")));
    CHECK_THROWS_MATCHES(parse_geocode_response("north: 10, south: 0"), Error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("GeocodeParseFailure")));
    CHECK_THROWS_AS(parse_geocode_response("north: 5, south: -5, west: 20, east: 20"), Error);
}

TEST_CASE("antimeridian boxes are accepted and flagged") {
    auto fiji = parse_geocode_response("north: -12, south: -22, west: 175, east: -175");
    CHECK(fiji.wrapped);
    CHECK(fiji.west == 175.0);
    CHECK(fiji.east == -175.0);
}

TEST_CASE("geocoder caches per domain name") {
    auto mock = std::make_shared<llm::MockBackend>();
    mock->add(fnv1a64("sichuan basin"), "geocode", "north: 33, south: 28, west: 103, east: 108");
    llm::Gateway gateway(llm::LlmConfig{}, mock, quiet_options());
    Geocoder geocoder(gateway);

    auto a = geocoder.geocode("Sichuan Basin");
    auto b = geocoder.geocode("  sichuan   BASIN ");
    CHECK(a == b);
    CHECK(mock->calls() == 1);
}

TEST_CASE("parse_metric_answer extracts values, units and schemes") {
    auto parsed = parse_metric_answer("Yes. RMSE = 2.19 mm/day (Ferrier), 8.25 mm/day (Lin)",
                                      MetricKind::RMSE, table());
    REQUIRE(parsed.samples.size() == 2);
    CHECK(parsed.warnings.empty());
    CHECK(parsed.samples[0].value == 2.19);
    CHECK(parsed.samples[0].unit == "mm/day");
    REQUIRE(parsed.samples[0].scheme.has_value());
    CHECK(parsed.samples[0].scheme->value == Scheme::Ferrier);
    CHECK(parsed.samples[1].value == 8.25);
    REQUIRE(parsed.samples[1].scheme.has_value());
    CHECK(parsed.samples[1].scheme->value == Scheme::Lin);
}

TEST_CASE("parse_metric_answer returns empty on no") {
    auto parsed = parse_metric_answer("No", MetricKind::RMSE, table());
    CHECK(parsed.samples.empty());
    CHECK(parsed.warnings.empty());
}

TEST_CASE("CC values outside [-1,1] are dropped with a warning") {
    auto parsed = parse_metric_answer("Yes: CC 0.83 and 1.7", MetricKind::CC, table());
    REQUIRE(parsed.samples.size() == 1);
    CHECK(parsed.samples[0].value == 0.83);
    REQUIRE(parsed.warnings.size() == 1);
    CHECK(parsed.warnings[0].find("1.7") != std::string::npos);
}

TEST_CASE("scheme attribution also reads the preceding clause") {
    auto parsed =
        parse_metric_answer("Yes. For WSM6: 3.2 mm/day; for Thompson: 4.1 mm/day",
                            MetricKind::RMSE, table());
    REQUIRE(parsed.samples.size() == 2);
    CHECK(parsed.samples[0].scheme->value == Scheme::WSM6);
    CHECK(parsed.samples[1].scheme->value == Scheme::Thompson);
}

TEST_CASE("unit fragments and percentages are not misread as values") {
    auto parsed = parse_metric_answer("Yes, RMSE was 4 mm/3h and the error grew by 12%",
                                      MetricKind::RMSE, table());
    REQUIRE(parsed.samples.size() == 1);
    CHECK(parsed.samples[0].value == 4.0);
    CHECK(parsed.samples[0].unit == "mm/3h");
}

TEST_CASE("exponent-style units normalize") {
    auto parsed = parse_metric_answer("Yes: 2.19 mm day^-1", MetricKind::RMSE, table());
    REQUIRE(parsed.samples.size() == 1);
    CHECK(parsed.samples[0].unit == "mm/day");
}

TEST_CASE("normalize_rmse converts published units to mm/day") {
    auto make = [](double value, const char* unit) {
        MetricSample s;
        s.kind = MetricKind::RMSE;
        s.value = value;
        s.unit = unit;
        return s;
    };
    CHECK(normalize_rmse(make(0.5, "mm/h")).unit_normalized == 12.0);
    CHECK(normalize_rmse(make(2.19, "mm/day")).unit_normalized == 2.19);
    CHECK(normalize_rmse(make(6.0, "mm"), 72.0).unit_normalized == 2.0);
    CHECK(normalize_rmse(make(1.5, "mm/3h")).unit_normalized == 12.0);
    CHECK(normalize_rmse(make(3.0, "mm/6h")).unit_normalized == 12.0);
    CHECK(normalize_rmse(make(1.2, "cm/day")).unit_normalized == 12.0);
    CHECK(normalize_rmse(make(1.0, "in/day")).unit_normalized == 25.4);
    CHECK_FALSE(normalize_rmse(make(6.0, "mm")).unit_normalized.has_value());

    MetricSample unknown;
    unknown.kind = MetricKind::RMSE;
    unknown.value = 3.0;
    CHECK_FALSE(normalize_rmse(unknown).unit_normalized.has_value());
}

TEST_CASE("split_extraction_answers aligns eight numbered markers") {
    std::string response;
    for (int q = 1; q <= 8; ++q) {
        response += std::to_string(q) + ". answer " + std::to_string(q) + "\n";
    }
    auto answers = split_extraction_answers(response);
    CHECK(answers[0] == "answer 1");
    CHECK(answers[7] == "answer 8");
}

TEST_CASE("seven markers is a SplitFailure") {
    std::string response;
    for (int q = 1; q <= 7; ++q) response += std::to_string(q) + ". answer\n";
    CHECK_THROWS_MATCHES(split_extraction_answers(response), Error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("SplitFailure")));
}

TEST_CASE("multi-line answers stay attached to their marker") {
    std::string response =
        "1. WSM6 microphysics\nwith Noah LSM\n2. Sichuan Basin\n3. Nah\n4. Nah\n5. Nah\n"
        "6. Nah\n7. No\n8. No\n";
    auto answers = split_extraction_answers(response);
    CHECK(answers[0] == "WSM6 microphysics\nwith Noah LSM");
    CHECK(answers[1] == "Sichuan Basin");
}

TEST_CASE("assemble_extraction builds the full typed record") {
    std::array<std::string, 8> answers = {
        "WSM6 microphysics, RRTM/Dudhia radiation, KF cumulus, YSU PBL, Noah LSM",
        "Sichuan Basin",
        "24-h accumulated precipitation",
        "The simulated precipitation was overestimated compared to observations.",
        "Sichuan Basin, southern China",
        "Nah",
        "Yes. RMSE = 2.19 mm/day and 0.5 mm/h",
        "Yes: CC 0.83",
    };
    auto rec = assemble_extraction("wos-0001", answers, table());
    CHECK(rec.record_id == "wos-0001");
    REQUIRE(rec.configs.size() == 1);
    CHECK(rec.domain_name == "Sichuan Basin");
    CHECK(rec.variable.kind == PrecipKind::AccumulatedAmount);
    CHECK(rec.verdicts.at({Scheme::WSM6}) == BiasVerdict::Overestimation);
    CHECK(rec.over_regions == std::vector<std::string>{"Sichuan Basin", "southern China"});
    CHECK(rec.under_regions.empty());
    REQUIRE(rec.metrics.size() == 3);
    CHECK(rec.metrics[0].unit_normalized == 2.19);
    CHECK(rec.metrics[1].unit_normalized == 12.0);
    CHECK(rec.metrics[2].kind == MetricKind::CC);
    CHECK(rec.raw_answers[0] == answers[0]);
}

TEST_CASE("extraction records survive a JSONL round trip") {
    std::array<std::string, 8> answers = {
        "Lin and Thompson microphysics with Noah", "Fiji", "rain rate",
        "Lin overestimated; Thompson underestimated", "Fiji islands", "coastal areas",
        "Yes. 8.25 mm/day (Lin)", "No"};
    auto rec = assemble_extraction("r9", answers, table());
    rec.geo_box = GeoBox{-12, -22, 175, -175, true};

    auto parsed = extractions_from_jsonl(extractions_to_jsonl({rec}));
    REQUIRE(parsed.size() == 1);
    const auto& p = parsed[0];
    CHECK(p.record_id == rec.record_id);
    CHECK(p.configs == rec.configs);
    CHECK(p.domain_name == rec.domain_name);
    REQUIRE(p.geo_box.has_value());
    CHECK(p.geo_box->wrapped);
    CHECK(p.verdicts == rec.verdicts);
    CHECK(p.over_regions == rec.over_regions);
    CHECK(p.metrics.size() == rec.metrics.size());
    CHECK(p.raw_answers == rec.raw_answers);
}
