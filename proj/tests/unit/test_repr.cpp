#include <cmath>
#include <limits>

#include "doctest.h"
#include "hybridrank/error.hpp"
#include "hybridrank/repr.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace hybridrank;
using repr::Aggregation;
using repr::LogitMatrix;

namespace {

LogitMatrix matrix(std::size_t rows, std::size_t cols, std::vector<float> v) { return {rows, cols, std::move(v)}; }

}  // namespace

TEST_CASE("saturate clamps negatives and applies log1p") {
    const auto sat = repr::saturate(matrix(1, 3, {0.0F, -5.0F, static_cast<float>(std::exp(1.0) - 1.0)}));
    CHECK(sat.at(0, 0) == 0.0F);
    CHECK(sat.at(0, 1) == 0.0F);
    CHECK(sat.at(0, 2) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("logit matrix rejects non-finite cells and bad shapes") {
    CHECK_THROWS_AS(matrix(1, 2, {1.0F, std::numeric_limits<float>::quiet_NaN()}), ValidationError);
    CHECK_THROWS_WITH(matrix(2, 2, {1.0F, 0.0F, std::numeric_limits<float>::infinity(), 0.0F}),
                      doctest::Contains("row 1, column 0"));
    CHECK_THROWS_AS(matrix(2, 2, {1.0F}), DimensionError);
    CHECK_THROWS_AS(matrix(0, 2, {}), DimensionError);
}

TEST_CASE("aggregate max and sum") {
    const auto m = matrix(2, 2, {0.2F, 0.7F, 0.5F, 0.1F});
    const auto mx = repr::aggregate(m, Aggregation::max);
    CHECK(mx.weights == std::vector<float>{0.5F, 0.7F});
    const auto sm = repr::aggregate(m, Aggregation::sum);
    CHECK(sm.weights[0] == doctest::Approx(0.7).epsilon(1e-6));
    CHECK(sm.weights[1] == doctest::Approx(0.8).epsilon(1e-6));

    const auto single = matrix(1, 3, {0.1F, 0.0F, 2.0F});
    CHECK(repr::aggregate(single, Aggregation::max).weights == std::vector<float>{0.1F, 0.0F, 2.0F});
    CHECK(repr::aggregate(single, Aggregation::sum).weights == std::vector<float>{0.1F, 0.0F, 2.0F});
}

TEST_CASE("topk keeps the largest positive weights") {
    const std::vector<float> w{0.1F, 0.9F, 0.0F, 0.4F};
    const auto rep = repr::topk_sparsify(w, 2);
    CHECK(rep.entries == std::vector<SparseEntry>{{1, 0.9F}, {3, 0.4F}});
    CHECK(rep.k_limit == 2);

    CHECK(repr::topk_sparsify(std::vector<float>{0.0F, 0.0F}, 5).empty());
    CHECK_THROWS_AS((void)repr::topk_sparsify(w, 0), ConfigError);
}

TEST_CASE("topk ties go to the smaller token id") {
    const std::vector<float> w{0.5F, 0.5F, 0.5F};
    const auto rep = repr::topk_sparsify(w, 2);
    CHECK(rep.entries == std::vector<SparseEntry>{{0, 0.5F}, {1, 0.5F}});

    // Full-sort oracle over many tie-heavy vectors.
    gen::Rng rng(7);
    std::uniform_int_distribution<int> level(0, 3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<float> ws(12);
        for (auto& x : ws) x = static_cast<float>(level(rng)) * 0.25F;
        for (std::uint32_t k = 1; k <= 12; ++k) {
            std::vector<std::pair<std::uint32_t, double>> expected;
            std::vector<std::uint32_t> order(12);
            for (std::uint32_t j = 0; j < 12; ++j) order[j] = j;
            std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return ws[a] > ws[b]; });
            std::vector<SparseEntry> want;
            for (auto j : order) {
                if (want.size() == k || ws[j] <= 0.0F) break;
                want.push_back({j, ws[j]});
            }
            std::sort(want.begin(), want.end(), [](auto& a, auto& b) { return a.token < b.token; });
            REQUIRE(repr::topk_sparsify(ws, k).entries == want);
        }
    }
}

TEST_CASE("encode hand trace") {
    const auto m = matrix(2, 2, {1.0F, -2.0F, 0.5F, 3.0F});
    const auto rep = repr::encode(m, {2, Aggregation::max});
    REQUIRE(rep.size() == 2);
    CHECK(rep.entries[0].token == 0);
    CHECK(rep.entries[0].weight == doctest::Approx(0.693147).epsilon(1e-6));
    CHECK(rep.entries[1].token == 1);
    CHECK(rep.entries[1].weight == doctest::Approx(1.386294).epsilon(1e-6));

    CHECK(repr::encode(matrix(2, 2, {-1.0F, -2.0F, -0.5F, -3.0F}), {4, Aggregation::max}).empty());
}

TEST_CASE("encode with k >= |V| equals aggregated weights minus zeros") {
    gen::Rng rng(11);
    const auto m = gen::to_matrix(gen::logits(rng, 4, 10));
    const auto rep = repr::encode(m, {10, Aggregation::max});
    const auto w = repr::aggregate(repr::saturate(m), Aggregation::max);
    std::vector<SparseEntry> expected;
    for (std::uint32_t j = 0; j < w.size(); ++j) {
        if (w.weights[j] > 0.0F) expected.push_back({j, w.weights[j]});
    }
    CHECK(rep.entries == expected);
}

TEST_CASE("encode properties on random matrices") {
    gen::Rng rng(2024);
    std::uniform_int_distribution<std::size_t> rows(1, 8);
    std::uniform_int_distribution<std::size_t> cols(1, 32);
    std::uniform_int_distribution<std::uint32_t> kdist(1, 40);
    for (int trial = 0; trial < 300; ++trial) {
        const auto raw = gen::logits(rng, rows(rng), cols(rng));
        const auto m = gen::to_matrix(raw);
        const auto k = kdist(rng);
        for (auto mode : {Aggregation::max, Aggregation::sum}) {
            const auto rep = repr::encode(m, {k, mode});
            // composition
            REQUIRE(rep == repr::topk_sparsify(repr::aggregate(repr::saturate(m), mode), k));
            // sparsity bound
            std::size_t positive_cols = 0;
            for (std::size_t j = 0; j < m.cols(); ++j) {
                bool any = false;
                for (std::size_t i = 0; i < m.rows(); ++i) any = any || m.at(i, j) > 0.0F;
                positive_cols += any ? 1 : 0;
            }
            REQUIRE(rep.size() <= std::min<std::size_t>(k, positive_cols));
            rep.validate();
            // oracle
            const auto want = oracle::encode(raw, mode == Aggregation::max, k);
            REQUIRE(rep.size() == want.size());
            for (std::size_t i = 0; i < want.size(); ++i) {
                REQUIRE(rep.entries[i].token == want[i].first);
                REQUIRE(std::abs(rep.entries[i].weight - want[i].second) <= 1e-6);
            }
        }
        // max-mode dominance
        const auto sat = repr::saturate(m);
        const auto mx = repr::aggregate(sat, Aggregation::max);
        const auto sm = repr::aggregate(sat, Aggregation::sum);
        for (std::size_t j = 0; j < mx.size(); ++j) REQUIRE(mx.weights[j] <= sm.weights[j]);
    }
}

TEST_CASE("aggregated weight is monotone in each logit") {
    gen::Rng rng(5);
    std::uniform_real_distribution<float> bump(0.0F, 2.0F);
    for (int trial = 0; trial < 200; ++trial) {
        const auto raw = gen::logits(rng, 3, 6);
        const auto m = gen::to_matrix(raw);
        std::vector<float> values(m.values().begin(), m.values().end());
        std::uniform_int_distribution<std::size_t> cell(0, values.size() - 1);
        const auto c = cell(rng);
        values[c] += bump(rng);
        const LogitMatrix bumped(m.rows(), m.cols(), values);
        for (auto mode : {Aggregation::max, Aggregation::sum}) {
            const auto before = repr::aggregate(repr::saturate(m), mode);
            const auto after = repr::aggregate(repr::saturate(bumped), mode);
            REQUIRE(after.weights[c % m.cols()] >= before.weights[c % m.cols()]);
        }
    }
}

TEST_CASE("truncate re-applies a smaller budget") {
    const SparseRep rep{{{2, 0.3F}, {5, 0.9F}, {7, 0.3F}, {9, 0.1F}}, 0};
    const auto t = repr::truncate(rep, 2);
    CHECK(t.entries == std::vector<SparseEntry>{{2, 0.3F}, {5, 0.9F}});
    CHECK(repr::truncate(rep, 10).entries == rep.entries);
}

TEST_CASE("config parsing") {
    CHECK(repr::parse_aggregation("sum") == Aggregation::sum);
    CHECK_THROWS_AS((void)repr::parse_aggregation("mean"), ConfigError);
    CHECK_THROWS_AS(repr::EncodeConfig({0, Aggregation::max}).validate(), ConfigError);
}
