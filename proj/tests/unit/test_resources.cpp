#include "doctest.h"
#include "hybridrank/error.hpp"
#include "hybridrank/resources.hpp"
#include "support/generators.hpp"

using namespace hybridrank;
using resources::CostModelParams;
using resources::Scheme;

namespace {

CostModelParams params(Scheme s, std::uint64_t h = 768, std::uint64_t n = 128, std::uint64_t k = 128) {
    return {h, n, k, s};
}

}  // namespace

TEST_CASE("interaction cost values") {
    CHECK(resources::interaction_flops(params(Scheme::hybrid)) == 1792);
    CHECK(resources::interaction_flops(params(Scheme::independent_dense)) == 1536);
    CHECK(resources::interaction_flops(params(Scheme::late_interaction)) == 25'165'952);
    CHECK(resources::interaction_flops(params(Scheme::sparse_lexical)) == 256);
    CHECK_THROWS_AS((void)resources::interaction_flops(params(Scheme::cross_encoder)), NotApplicableError);
}

TEST_CASE("storage values") {
    CHECK(resources::storage_per_item(params(Scheme::hybrid)) == 1024);
    CHECK(resources::storage_per_item(params(Scheme::late_interaction)) == 98'304);
    CHECK(resources::storage_per_item(params(Scheme::sparse_lexical)) == 256);
    CHECK(resources::storage_per_item(params(Scheme::independent_dense)) == 768);
    CHECK_THROWS_AS((void)resources::storage_per_item(params(Scheme::cross_encoder)), NotApplicableError);
}

TEST_CASE("formulas compose and stay positive") {
    gen::Rng rng(81);
    std::uniform_int_distribution<std::uint64_t> u(1, 4096);
    for (int i = 0; i < 500; ++i) {
        const auto h = u(rng), n = u(rng) % 512 + 1, k = u(rng);
        const auto dense = resources::interaction_flops(params(Scheme::independent_dense, h, n, k));
        const auto sparse = resources::interaction_flops(params(Scheme::sparse_lexical, h, n, k));
        REQUIRE(resources::interaction_flops(params(Scheme::hybrid, h, n, k)) == dense + sparse);
        REQUIRE(resources::storage_per_item(params(Scheme::hybrid, h, n, k)) ==
                resources::storage_per_item(params(Scheme::independent_dense, h, n, k)) +
                    resources::storage_per_item(params(Scheme::sparse_lexical, h, n, k)));
        REQUIRE(resources::interaction_flops(params(Scheme::late_interaction, h, n, k)) == 2 * n * n * h + n);
        REQUIRE(resources::storage_per_item(params(Scheme::late_interaction, h, n, k)) == n * h);
    }
    CHECK_THROWS_AS((void)resources::interaction_flops(params(Scheme::hybrid, 0)), ConfigError);
}

TEST_CASE("symbolic formulas and table") {
    CHECK(resources::interaction_formula(Scheme::hybrid) == "2(h+k)");
    CHECK(resources::interaction_formula(Scheme::cross_encoder) == "-");
    CHECK(resources::storage_formula(Scheme::sparse_lexical) == "2k");
    CHECK(resources::parse_scheme("late_interaction") == Scheme::late_interaction);
    CHECK_THROWS_AS((void)resources::parse_scheme("colbert"), ConfigError);

    const auto table = resources::cost_table(768, 128, 128);
    CHECK(table.at("params").at("h") == 768);
    REQUIRE(table.at("schemes").size() == 5);
    bool saw_cross = false;
    for (const auto& row : table.at("schemes")) {
        if (row.at("scheme") == "cross_encoder") {
            saw_cross = true;
            CHECK(row.at("interaction_flops").is_null());
        }
        if (row.at("scheme") == "hybrid") CHECK(row.at("interaction_flops") == 1792);
    }
    CHECK(saw_cross);
}

TEST_CASE("latency measurement") {
    gen::Rng rng(82);
    const auto idx = index::HybridIndex::build(gen::entries(rng, 50, 16, 100, 20));
    const std::vector<HybridEntry> queries = {gen::entry(rng, "q1", 16, 100, 20), gen::entry(rng, "q2", 16, 100, 20)};
    const auto report = resources::measure_latency(idx, queries, {}, 3);
    CHECK(report.repetitions == 3);
    CHECK(report.repetition_ms.size() == 3);
    CHECK(report.candidates_per_query == 50.0);
    CHECK(report.per_candidate_ms.has_value());
    CHECK(report.per_query_ms >= 0.0);

    const auto empty = index::HybridIndex::build({});
    const std::vector<HybridEntry> q1 = {{"q", SourceTag::other, {{1.0F}}, {}, {}}};
    CHECK_FALSE(resources::measure_latency(empty, q1, {}, 3).per_candidate_ms.has_value());
    CHECK_THROWS_AS((void)resources::measure_latency(idx, {}, {}, 3), ValidationError);
    CHECK_THROWS_AS((void)resources::measure_latency(idx, queries, {}, 2), ConfigError);
}
