#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hybridrank/error.hpp"
#include "hybridrank/explain.hpp"
#include "hybridrank/scoring.hpp"
#include "support/generators.hpp"

using namespace hybridrank;
using explain::Format;

namespace {

HybridEntry speed_query() {
    return {"q1", SourceTag::other, {{1.0F, 0.0F}}, {{{10, 1.0F}, {20, 0.5F}}, 0},
            std::vector<std::string>{"how", "fast", "does", "the", "car", "go"}};
}

HybridEntry speed_candidate() {
    return {"c1", SourceTag::review, {{0.5F, 0.5F}}, {{{10, 2.0F}, {20, 1.0F}, {30, 3.0F}}, 0},
            std::vector<std::string>{"top", "Speed", "car"}};
}

const Vocabulary kVocab = {{10, "speed"}, {20, "car"}, {30, "fast"}};

std::string read_fixture(const std::string& name) {
    std::ifstream in(std::string(HYBRIDRANK_FIXTURE_DIR) + "/" + name);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("expansion token fixture") {
    HybridEntry q{"q", SourceTag::other, {{1.0F}}, {{{10, 1.0F}}, 0},
                  std::vector<std::string>{"how", "fast", "does", "the", "car", "go"}};
    HybridEntry c{"c", SourceTag::other, {{1.0F}}, {{{10, 2.0F}}, 0}, std::vector<std::string>{"speed"}};
    const auto report = explain::match_report(q, c, kVocab, 0.5);
    REQUIRE(report.records.size() == 1);
    CHECK(report.records[0].token == "speed");
    CHECK(report.records[0].contribution == 2.0);
    CHECK(report.records[0].expansion_in_query);
    CHECK_FALSE(report.records[0].expansion_in_candidate);
}

TEST_CASE("disjoint reps give an empty report") {
    HybridEntry q{"q", SourceTag::other, {{1.0F}}, {{{10, 1.0F}}, 0}, {}};
    HybridEntry c{"c", SourceTag::other, {{2.0F}}, {{{20, 1.0F}}, 0}, {}};
    const auto report = explain::match_report(q, c, kVocab, 0.5);
    CHECK(report.records.empty());
    CHECK(report.totals.lexical_score == 0.0);
    CHECK(report.totals.dense_score == 2.0);
    CHECK(explain::render(report, Format::text).find("no lexical overlap") != std::string::npos);
    CHECK(explain::render(report, Format::html).find("no lexical overlap") != std::string::npos);
    CHECK(explain::render(report, Format::json).find("no lexical overlap") != std::string::npos);
}

TEST_CASE("shared surface token is not an expansion") {
    const auto report = explain::match_report(speed_query(), speed_candidate(), kVocab, 0.5);
    REQUIRE(report.records.size() == 2);
    CHECK(report.records[1].token == "car");
    CHECK_FALSE(report.records[1].expansion_in_query);
    CHECK_FALSE(report.records[1].expansion_in_candidate);
    // surface comparison is case-insensitive
    CHECK_FALSE(report.records[0].expansion_in_candidate);
}

TEST_CASE("missing vocabulary entry names the id") {
    Vocabulary partial = {{10, "speed"}};
    CHECK_THROWS_WITH((void)explain::match_report(speed_query(), speed_candidate(), partial, 0.5),
                      doctest::Contains("20"));
    CHECK_THROWS_AS((void)explain::match_report(speed_query(), speed_candidate(), partial, 0.5), ValidationError);
}

TEST_CASE("json rendering matches the golden file and round-trips") {
    const auto report = explain::match_report(speed_query(), speed_candidate(), kVocab, 0.5);
    CHECK(explain::render(report, Format::json) == read_fixture("explain_speed.json"));
    CHECK(explain::from_json(nlohmann::json::parse(explain::render(report, Format::json))) == report);
}

TEST_CASE("text and html highlighting") {
    const auto report = explain::match_report(speed_query(), speed_candidate(), kVocab, 0.5);
    const auto text = explain::render(report, Format::text);
    CHECK(text.find("[#####] speed") != std::string::npos);
    CHECK(text.find("[##...] car") != std::string::npos);
    const auto html = explain::render(report, Format::html);
    CHECK(html.find("rgba(255, 165, 0, 1.0)") != std::string::npos);
    CHECK(html.find("rgba(255, 165, 0, 0.4)") != std::string::npos);
    CHECK(html.find("http") == std::string::npos);

    HybridEntry q{"q", SourceTag::other, {{1.0F, 0.0F}}, {{{20, 0.1F}}, 0}, {}};
    const auto single = explain::match_report(q, speed_candidate(), kVocab, 0.5);
    CHECK(explain::render(single, Format::text).find("[#####] car") != std::string::npos);
}

TEST_CASE("intensity buckets") {
    CHECK(explain::intensity_bucket(1.0, 1.0) == 5);
    CHECK(explain::intensity_bucket(0.2, 1.0) == 1);
    CHECK(explain::intensity_bucket(0.21, 1.0) == 2);
    CHECK(explain::intensity_bucket(0.0, 1.0) == 1);
    CHECK(explain::intensity_bucket(1.0, 0.0) == 1);
    CHECK(explain::parse_format("html") == Format::html);
    CHECK_THROWS_AS((void)explain::parse_format("pdf"), ConfigError);
}

TEST_CASE("conservation and ordering on random pairs") {
    gen::Rng rng(71);
    Vocabulary vocab;
    for (TokenId t = 0; t < 40; ++t) vocab[t] = "t" + std::to_string(t);
    for (int trial = 0; trial < 300; ++trial) {
        auto q = gen::entry(rng, "q", 4, 40, 15);
        auto c = gen::entry(rng, "c", 4, 40, 15);
        q.surface_tokens = std::vector<std::string>{"t1", "t2", "t3"};
        const auto report = explain::match_report(q, c, vocab, 0.3);
        double sum = 0.0;
        for (std::size_t i = 0; i < report.records.size(); ++i) {
            const auto& r = report.records[i];
            sum += r.contribution;
            REQUIRE(r.contribution == r.q_weight * r.c_weight);
            REQUIRE(r.expansion_in_query == (r.token != "t1" && r.token != "t2" && r.token != "t3"));
            REQUIRE(r.expansion_in_candidate);
            if (i > 0) {
                const auto& p = report.records[i - 1];
                REQUIRE((p.contribution > r.contribution ||
                         (p.contribution == r.contribution && p.token_id < r.token_id)));
            }
        }
        const double lexical = scoring::dot_sparse(q.sparse, c.sparse);
        REQUIRE(std::abs(sum - lexical) <= 1e-6);
        REQUIRE(report.totals.lexical_score == lexical);
        REQUIRE(report.totals.dense_score == scoring::dot_dense(q.dense, c.dense));
        REQUIRE(explain::render(report, Format::html) == explain::render(report, Format::html));
    }
}
