#include <catch2/catch_amalgamated.hpp>

#include "litmeta/screening.hpp"

using namespace litmeta;
using namespace litmeta::screening;

namespace {

corpus::BibRecord record_with_abstract(const std::string& id, const std::string& abstract,
                                       const std::string& title = "a title") {
    corpus::BibRecord rec;
    rec.record_id = id;
    rec.title = title;
    rec.abstract = abstract;
    rec.pub_date = {2018, std::nullopt, std::nullopt};
    rec.language = "English";
    rec.doc_type = corpus::DocType::JournalArticle;
    return rec;
}

llm::GatewayOptions quiet_options() {
    llm::GatewayOptions options;
    options.sleeper = [](std::chrono::milliseconds) {};
    options.clock = [] { return std::string("2026-01-01T00:00:00Z"); };
    return options;
}

}  // namespace

TEST_CASE("prefilter drops coupled-model abstracts") {
    auto chem = record_with_abstract("r1", "a coupled WRF-Chem simulation of aerosols");
    auto plain = record_with_abstract("r2", "the WRF model precipitation study");
    auto hydro_title = record_with_abstract("r3", "plain abstract", "Calibrating WRF-Hydro");

    auto result = coupled_model_prefilter({chem, plain, hydro_title});
    REQUIRE(result.kept.size() == 1);
    CHECK(result.kept[0].record_id == "r2");
    REQUIRE(result.dropped.size() == 2);
    CHECK(result.dropped[0].second == "wrf-chem");
    CHECK(result.dropped[1].second == "wrf-hydro");
}

TEST_CASE("prefilter mirrors the 3958 to 3559 reduction on a synthetic corpus") {
    std::vector<corpus::BibRecord> records;
    for (int i = 0; i < 3958; ++i) {
        std::string abstract = i < 399 ? "study involving WRF-CMAQ coupling"
                                       : "plain WRF precipitation simulation";
        records.push_back(record_with_abstract("r" + std::to_string(1000 + i), abstract));
    }
    auto result = coupled_model_prefilter(records);
    CHECK(result.kept.size() == 3559);
    CHECK(result.dropped.size() == 399);
}

TEST_CASE("parse_yes_no resolves bare and leading tokens") {
    CHECK(parse_yes_no("Yes") == Relevance::Relevant);
    CHECK(parse_yes_no("no.") == Relevance::NotRelevant);
    CHECK(parse_yes_no("  YES!  ") == Relevance::Relevant);
    CHECK(parse_yes_no("Yes, the study applies WRF.") == Relevance::Relevant);
    CHECK(parse_yes_no("No - it uses a different model") == Relevance::NotRelevant);
    CHECK(parse_yes_no("The study applies WRF to precipitation.") == Relevance::Unparseable);
    CHECK(parse_yes_no("") == Relevance::Unparseable);
}

TEST_CASE("strict mode only accepts the bare token") {
    CHECK(parse_yes_no("Yes.", true) == Relevance::Relevant);
    CHECK(parse_yes_no("Yes, the study applies WRF.", true) == Relevance::Unparseable);
}

TEST_CASE("screen produces one verdict per record from the mock table") {
    std::vector<corpus::BibRecord> records;
    auto mock = std::make_shared<llm::MockBackend>();
    for (int i = 0; i < 10; ++i) {
        std::string abstract = "abstract number " + std::to_string(i);
        records.push_back(record_with_abstract("r" + std::to_string(i), abstract));
        mock->add_text(abstract, "relevance", i < 7 ? "Yes" : "No");
    }
    llm::Gateway gateway(llm::LlmConfig{}, mock, quiet_options());
    auto result = screen(records, gateway);

    REQUIRE(result.verdicts.size() == 10);
    CHECK(result.errors.empty());
    long relevant = 0;
    for (const auto& v : result.verdicts) {
        if (v.verdict == Relevance::Relevant) ++relevant;
    }
    CHECK(relevant == 7);
}

TEST_CASE("screen records gateway errors and continues") {
    std::vector<corpus::BibRecord> records;
    auto mock = std::make_shared<llm::MockBackend>();
    for (int i = 0; i < 10; ++i) {
        std::string abstract = "abstract number " + std::to_string(i);
        records.push_back(record_with_abstract("r" + std::to_string(i), abstract));
        if (i != 4) mock->add_text(abstract, "relevance", "Yes");
    }
    llm::Gateway gateway(llm::LlmConfig{}, mock, quiet_options());
    auto result = screen(records, gateway);

    CHECK(result.verdicts.size() == 9);
    REQUIRE(result.errors.size() == 1);
    CHECK(result.errors[0].first == "r4");
}

TEST_CASE("unparseable responses are retried once and stand") {
    auto mock = std::make_shared<llm::MockBackend>();
    mock->add_text("odd abstract", "relevance", "The study indeed applies WRF");
    std::vector<corpus::BibRecord> records = {record_with_abstract("r1", "odd abstract")};
    llm::Gateway gateway(llm::LlmConfig{}, mock, quiet_options());
    auto result = screen(records, gateway);
    REQUIRE(result.verdicts.size() == 1);
    CHECK(result.verdicts[0].verdict == Relevance::Unparseable);
    CHECK_FALSE(result.verdicts[0].raw_response.empty());
    CHECK(mock->calls() == 2);  // retry bypasses the cache
}

TEST_CASE("empty record list screens to empty output") {
    auto mock = std::make_shared<llm::MockBackend>();
    llm::Gateway gateway(llm::LlmConfig{}, mock, quiet_options());
    auto result = screen({}, gateway);
    CHECK(result.verdicts.empty());
    CHECK(result.errors.empty());
}

TEST_CASE("screening accuracy reproduces the published arithmetic") {
    // 897 gold labels; 660 true-relevant agreements + 150 true-irrelevant
    // agreements = 810 matches; 712 gold yes, 695 predicted yes.
    std::vector<RelevanceVerdict> predicted;
    std::map<std::string, bool> gold;
    auto add = [&](int count, bool gold_yes, bool pred_yes) {
        for (int i = 0; i < count; ++i) {
            std::string id = "r" + std::to_string(1000 + static_cast<int>(predicted.size()));
            predicted.push_back(
                {id, pred_yes ? Relevance::Relevant : Relevance::NotRelevant, "raw"});
            gold[id] = gold_yes;
        }
    };
    add(660, true, true);
    add(52, true, false);
    add(35, false, true);
    add(150, false, false);

    auto report = screening_accuracy(predicted, gold);
    CHECK(report.total == 897);
    CHECK(report.matches == 810);
    CHECK(report.accuracy == Catch::Approx(0.903).margin(5e-4));
    CHECK(report.gold_relevant == 712);
    CHECK(report.predicted_relevant == 695);
    CHECK(report.gold_relevant_rate == Catch::Approx(0.794).margin(5e-4));
    CHECK(report.predicted_relevant_rate == Catch::Approx(0.775).margin(5e-4));
}

TEST_CASE("identical predictions score accuracy 1.000") {
    std::vector<RelevanceVerdict> predicted;
    std::map<std::string, bool> gold;
    for (int i = 0; i < 5; ++i) {
        std::string id = "r" + std::to_string(i);
        predicted.push_back({id, i % 2 ? Relevance::Relevant : Relevance::NotRelevant, ""});
        gold[id] = i % 2;
    }
    auto report = screening_accuracy(predicted, gold);
    CHECK(report.accuracy == 1.0);
}

TEST_CASE("unparseable predictions never match") {
    std::vector<RelevanceVerdict> predicted = {{"r1", Relevance::Unparseable, "mumble"}};
    std::map<std::string, bool> gold = {{"r1", true}};
    auto report = screening_accuracy(predicted, gold);
    CHECK(report.matches == 0);
}

TEST_CASE("empty gold set raises EmptyGoldSet") {
    CHECK_THROWS_MATCHES(screening_accuracy({}, {}), Error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("EmptyGoldSet")));
}

TEST_CASE("gold labels parse from CSV with or without header") {
    auto gold = gold_labels_from_csv("record_id,relevant\nr1,yes\nr2,no\n");
    REQUIRE(gold.size() == 2);
    CHECK(gold.at("r1"));
    CHECK_FALSE(gold.at("r2"));
}
