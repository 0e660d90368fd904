#include <catch2/catch_amalgamated.hpp>

#include "litmeta/validation.hpp"

using namespace litmeta;
using namespace litmeta::validation;
using namespace litmeta::extraction;

namespace {

ExtractionRecord base_record(const std::string& id) {
    ExtractionRecord rec;
    rec.record_id = id;
    ConfigRecord c;
    c.microphysics = {Scheme::WSM6};
    c.radiation = {"RRTM/Dudhia", ""};
    c.cumulus = {"KF", ""};
    c.pbl = {"YSU", ""};
    c.land_surface = {"Noah", ""};
    rec.configs = {c};
    rec.domain_name = "Sichuan Basin";
    rec.variable = {PrecipKind::AccumulatedAmount, 24.0};
    rec.verdicts[{Scheme::WSM6}] = BiasVerdict::Overestimation;
    rec.over_regions = {"Sichuan Basin"};
    rec.under_regions = {"coastal China"};
    MetricSample rmse1{MetricKind::RMSE, 2.19, "mm/day", 2.19, SchemeId{Scheme::WSM6}, id};
    MetricSample rmse2{MetricKind::RMSE, 3.4, "mm/day", 3.4, SchemeId{Scheme::WSM6}, id};
    MetricSample cc{MetricKind::CC, 0.83, std::nullopt, std::nullopt, SchemeId{Scheme::WSM6}, id};
    rec.metrics = {rmse1, rmse2, cc};
    return rec;
}

GoldAnnotation gold_for(const ExtractionRecord& rec) {
    GoldAnnotation gold;
    gold.record_id = rec.record_id;
    gold.values = rec;
    for (const auto& def : question_defs()) gold.judged.insert(def.id);
    return gold;
}

// Mutate one question's answer so it no longer matches gold.
void break_question(ExtractionRecord& rec, const std::string& question) {
    if (question == "q1_microphysics") rec.configs[0].microphysics = {Scheme::Thompson};
    else if (question == "q1_radiation") rec.configs[0].radiation = {"RRTMG", ""};
    else if (question == "q1_cumulus") rec.configs[0].cumulus = {"BMJ", ""};
    else if (question == "q1_pbl") rec.configs[0].pbl = {"MYJ", ""};
    else if (question == "q1_surface") rec.configs[0].land_surface = {"RUC", ""};
    else if (question == "q2") rec.domain_name = "Atacama Desert";
    else if (question == "q3") rec.variable = {PrecipKind::Rate, std::nullopt};
    else if (question == "q4") rec.verdicts[{Scheme::WSM6}] = BiasVerdict::Underestimation;
    else if (question == "q5") rec.over_regions.clear();
    else if (question == "q6") rec.under_regions.push_back("Norway");
    else if (question == "q7") rec.metrics.erase(rec.metrics.begin() + 1);  // drop one RMSE
    else if (question == "q8") rec.metrics.back().value = 0.9;
}

}  // namespace

TEST_CASE("identical answers score 1.000 on every row") {
    std::vector<ExtractionRecord> extractions;
    std::vector<GoldAnnotation> gold;
    for (int i = 0; i < 5; ++i) {
        auto rec = base_record("r" + std::to_string(i));
        extractions.push_back(rec);
        gold.push_back(gold_for(rec));
    }
    auto result = compare(extractions, gold);
    for (const auto& row : result.rows) {
        INFO(row.question_id);
        CHECK(row.total == 5);
        CHECK(row.matches == 5);
    }
    CHECK(result.average_accuracy() == 1.0);
    CHECK(result.disagreements.empty());
}

TEST_CASE("a 300-record fixture reproduces the published per-question accuracies") {
    // mismatch counts per question chosen to land exactly on the published
    // percentages out of 300
    const std::vector<std::pair<std::string, int>> mismatches = {
        {"q1_microphysics", 12}, {"q1_radiation", 6}, {"q1_cumulus", 6}, {"q1_pbl", 6},
        {"q1_surface", 6},       {"q2", 15},          {"q3", 18},        {"q4", 42},
        {"q5", 18},              {"q6", 21},          {"q7", 24},        {"q8", 30},
    };
    std::vector<ExtractionRecord> extractions;
    std::vector<GoldAnnotation> gold;
    for (int i = 0; i < 300; ++i) {
        auto rec = base_record("r" + std::to_string(1000 + i));
        gold.push_back(gold_for(rec));
        for (const auto& [question, count] : mismatches) {
            if (i < count) break_question(rec, question);
        }
        extractions.push_back(rec);
    }

    auto result = compare(extractions, gold);
    std::map<std::string, double> expected = {
        {"q1_microphysics", 0.96}, {"q1_radiation", 0.98}, {"q1_cumulus", 0.98},
        {"q1_pbl", 0.98},          {"q1_surface", 0.98},   {"q2", 0.95},
        {"q3", 0.94},              {"q4", 0.86},           {"q5", 0.94},
        {"q6", 0.93},              {"q7", 0.92},           {"q8", 0.90},
    };
    for (const auto& row : result.rows) {
        INFO(row.question_id);
        CHECK(row.total == 300);
        CHECK(row.accuracy() == Catch::Approx(expected.at(row.question_id)).epsilon(1e-12));
    }
    CHECK(result.average_accuracy() == Catch::Approx(0.94).margin(0.005));

    // every disagreement receives exactly one tag
    auto tags = tag_errors(result.disagreements);
    CHECK(tags.size() == result.disagreements.size());
}

TEST_CASE("tag_errors applies the two-way taxonomy") {
    auto rec = base_record("r1");
    auto gold = gold_for(rec);

    SECTION("missing one metric is Incomplete") {
        break_question(rec, "q7");
        auto result = compare({rec}, {gold});
        REQUIRE(result.disagreements.size() == 1);
        auto tags = tag_errors(result.disagreements);
        REQUIRE(tags.size() == 1);
        CHECK(tags[0].question_id == "q7");
        CHECK(tags[0].kind == ErrorKind::Incomplete);
    }
    SECTION("a Nah verdict against gold overestimation is IrrelevantOrMissing") {
        rec.verdicts[{Scheme::WSM6}] = BiasVerdict::NoAnswer;
        auto result = compare({rec}, {gold});
        REQUIRE(result.disagreements.size() == 1);
        auto tags = tag_errors(result.disagreements);
        CHECK(tags[0].question_id == "q4");
        CHECK(tags[0].kind == ErrorKind::IrrelevantOrMissing);
    }
    SECTION("a disjoint answer is IrrelevantOrMissing") {
        break_question(rec, "q2");
        auto result = compare({rec}, {gold});
        auto tags = tag_errors(result.disagreements);
        REQUIRE(tags.size() == 1);
        CHECK(tags[0].kind == ErrorKind::IrrelevantOrMissing);
    }
    SECTION("hallucinated extra regions are IrrelevantOrMissing") {
        break_question(rec, "q6");  // superset of gold
        auto result = compare({rec}, {gold});
        auto tags = tag_errors(result.disagreements);
        REQUIRE(tags.size() == 1);
        CHECK(tags[0].kind == ErrorKind::IrrelevantOrMissing);
    }
    SECTION("matching answers get no tag") {
        auto result = compare({rec}, {gold});
        CHECK(result.disagreements.empty());
        CHECK(tag_errors(result.disagreements).empty());
    }
}

TEST_CASE("scheme subsets are Incomplete") {
    auto rec = base_record("r1");
    ConfigRecord second;
    second.microphysics = {Scheme::Thompson};
    auto gold_rec = rec;
    gold_rec.configs.push_back(second);  // gold has {WSM6, Thompson}
    auto gold = gold_for(gold_rec);

    auto result = compare({rec}, {gold});
    bool found = false;
    for (const auto& d : result.disagreements) {
        if (d.question_id == "q1_microphysics") {
            found = true;
            auto tags = tag_errors({d});
            CHECK(tags[0].kind == ErrorKind::Incomplete);
        }
    }
    CHECK(found);
}

TEST_CASE("region matching ignores case and whitespace") {
    auto rec = base_record("r1");
    auto gold = gold_for(rec);
    rec.over_regions = {"  SICHUAN   basin "};
    auto result = compare({rec}, {gold});
    for (const auto& d : result.disagreements) CHECK(d.question_id != "q5");
}

TEST_CASE("metric matching tolerates 1e-9 noise") {
    auto rec = base_record("r1");
    auto gold = gold_for(rec);
    rec.metrics[0].value += 5e-10;
    auto result = compare({rec}, {gold});
    for (const auto& d : result.disagreements) CHECK(d.question_id != "q7");
}

TEST_CASE("accuracy is monotone under adding an agreeing record") {
    auto broken = base_record("r1");
    break_question(broken, "q4");
    auto gold1 = gold_for(base_record("r1"));
    auto result1 = compare({broken}, {gold1});

    auto agreeing = base_record("r2");
    auto result2 = compare({broken, agreeing}, {gold1, gold_for(agreeing)});
    for (size_t i = 0; i < result1.rows.size(); ++i) {
        CHECK(result2.rows[i].accuracy() >= result1.rows[i].accuracy());
        CHECK(result2.rows[i].matches <= result2.rows[i].total);
    }
}

TEST_CASE("gold for an unknown record raises MissingRecord") {
    auto gold = gold_for(base_record("r-unknown"));
    CHECK_THROWS_MATCHES(compare({}, {gold}), Error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("MissingRecord")));
}

TEST_CASE("empty gold raises EmptyGoldSet") {
    CHECK_THROWS_MATCHES(compare({}, {}), Error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("EmptyGoldSet")));
}

TEST_CASE("gold annotations judge only the fields present in the file") {
    nlohmann::json j;
    j["record_id"] = "r1";
    j["domain_name"] = "Sichuan Basin";
    auto gold = gold_from_json(j);
    CHECK(gold.judged == std::set<std::string>{"q2"});

    auto rec = base_record("r1");
    auto result = compare({rec}, {gold});
    for (const auto& row : result.rows) {
        if (row.question_id == "q2") CHECK(row.total == 1);
        else CHECK(row.total == 0);
    }
}

TEST_CASE("report CSV carries one row per question plus the average") {
    auto rec = base_record("r1");
    auto result = compare({rec}, {gold_for(rec)});
    std::string csv_text = report_csv(result);
    size_t lines = std::count(csv_text.begin(), csv_text.end(), '\n');
    CHECK(lines == 1 + 12 + 1);  // header + rows + average
    CHECK(csv_text.find("Microphysics parameterization") != std::string::npos);
    CHECK(csv_text.find("average") != std::string::npos);
}
