#include <cmath>
#include <sstream>

#include "doctest.h"
#include "hybridrank/error.hpp"
#include "hybridrank/eval.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace hybridrank;
using eval::Qrels;
using eval::RankedRun;

namespace {

std::vector<std::string> docs(std::initializer_list<const char*> ids) { return {ids.begin(), ids.end()}; }

}  // namespace

TEST_CASE("single relevant at rank 1 scores perfectly") {
    const auto m = eval::evaluate_query(docs({"a", "b", "c", "d", "e"}), {"a"});
    CHECK(m == eval::QueryMetrics{1, 1, 1, 1, 1, 1});
}

TEST_CASE("single relevant at rank 3") {
    const auto m = eval::evaluate_query(docs({"a", "b", "c", "d", "e"}), {"c"});
    CHECK(std::abs(m.mrr_at_5 - 1.0 / 3.0) <= 1e-9);
    CHECK(std::abs(m.map - 1.0 / 3.0) <= 1e-9);
    CHECK(std::abs(m.ndcg - 0.5) <= 1e-9);
    CHECK(m.hit_rate_at_5 == 1.0);
    CHECK(m.p_at_1 == 0.0);
    CHECK(m.r_prec == 0.0);
}

TEST_CASE("two relevant at ranks 1 and 4") {
    const auto m = eval::evaluate_query(docs({"a", "b", "c", "d", "e", "f"}), {"a", "d"});
    CHECK(std::abs(m.map - 0.75) <= 1e-12);
    CHECK(std::abs(m.r_prec - 0.5) <= 1e-12);
    CHECK(m.mrr_at_5 == 1.0);
}

TEST_CASE("relevant beyond rank 5 and unretrieved relevant") {
    const auto m = eval::evaluate_query(docs({"a", "b", "c", "d", "e", "f"}), {"f", "zz"});
    CHECK(m.mrr_at_5 == 0.0);
    CHECK(m.hit_rate_at_5 == 0.0);
    CHECK(m.map == doctest::Approx((1.0 / 6.0) / 2.0));
    const double idcg = 1.0 + 1.0 / std::log2(3.0);
    CHECK(m.ndcg == doctest::Approx((1.0 / std::log2(7.0)) / idcg));
}

TEST_CASE("metric properties on random rankings") {
    gen::Rng rng(51);
    std::uniform_int_distribution<int> len(1, 8);
    std::bernoulli_distribution coin(0.35);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<std::string> ranking;
        const int n = len(rng);
        for (int i = 0; i < n; ++i) ranking.push_back("d" + std::to_string(i));
        std::shuffle(ranking.begin(), ranking.end(), rng);
        std::set<std::string> rel;
        for (const auto& d : ranking)
            if (coin(rng)) rel.insert(d);
        if (rel.empty()) rel.insert(ranking.back());

        const auto m = eval::evaluate_query(ranking, rel);
        const auto o = oracle::metrics(ranking, rel);
        REQUIRE(m.map == o.map);
        REQUIRE(m.r_prec == o.r_prec);
        REQUIRE(m.mrr_at_5 == o.mrr5);
        REQUIRE(m.ndcg == o.ndcg);
        REQUIRE(m.hit_rate_at_5 == o.hit5);
        REQUIRE(m.p_at_1 == o.p1);
        for (std::size_t i = 0; i < eval::kMetricCount; ++i) {
            const double v = eval::metric_value(m, i);
            REQUIRE(v >= 0.0);
            REQUIRE(v <= 1.0 + 1e-12);
        }
        REQUIRE((m.mrr_at_5 == 0.0 || m.mrr_at_5 >= 0.2));

        // MAP = 1 iff all relevant precede all non-relevant
        bool separated = true;
        bool seen_nonrel = false;
        for (const auto& d : ranking) {
            if (rel.contains(d) && seen_nonrel) separated = false;
            if (!rel.contains(d)) seen_nonrel = true;
        }
        REQUIRE((std::abs(m.map - 1.0) <= 1e-12) == separated);

        // swapping an adjacent (relevant, non-relevant) pair against relevance lowers NDCG
        for (std::size_t i = 0; i + 1 < ranking.size(); ++i) {
            if (rel.contains(ranking[i]) && !rel.contains(ranking[i + 1])) {
                auto swapped = ranking;
                std::swap(swapped[i], swapped[i + 1]);
                REQUIRE(eval::evaluate_query(swapped, rel).ndcg < m.ndcg);
                break;
            }
        }
        // relabeling ids does not change NDCG
        std::vector<std::string> renamed;
        std::set<std::string> renamed_rel;
        for (const auto& d : ranking) {
            renamed.push_back("x" + d);
            if (rel.contains(d)) renamed_rel.insert("x" + d);
        }
        REQUIRE(eval::evaluate_query(renamed, renamed_rel).ndcg == m.ndcg);
    }
}

TEST_CASE("evaluate averages over evaluable queries") {
    RankedRun run;
    run.queries["q1"] = {{"a", 3}, {"b", 2}, {"c", 1}};
    run.queries["q2"] = {{"a", 3}, {"b", 2}, {"c", 1}};
    run.queries["q3"] = {{"a", 1}};
    run.queries["orphan"] = {{"a", 1}};
    Qrels qrels;
    qrels.relevant["q1"] = {"a"};
    qrels.relevant["q2"] = {"c"};
    qrels.relevant["q3"] = {};
    qrels.relevant["q4"] = {"z"};
    const auto report = eval::evaluate(run, qrels);
    CHECK(report.evaluated == 3);
    CHECK(report.missing_from_qrels == std::vector<std::string>{"orphan"});
    CHECK(report.missing_from_run == std::vector<std::string>{"q4"});
    CHECK(report.without_relevant == std::vector<std::string>{"q3"});
    CHECK(report.mean.mrr_at_5 == doctest::Approx((1.0 + 1.0 / 3.0 + 0.0) / 3.0));
    CHECK(report.mean.p_at_1 == doctest::Approx(1.0 / 3.0));

    Qrels none;
    none.relevant["q1"] = {};
    CHECK_THROWS_AS((void)eval::evaluate(run, none), ValidationError);
}

TEST_CASE("per-source breakdown and priors") {
    RankedRun run;
    run.queries["q1"] = {{"r1", 3}, {"c1", 2}, {"b1", 1}};
    run.queries["q2"] = {{"c2", 3}, {"r2", 2}};
    Qrels qrels;
    qrels.relevant["q1"] = {"c1"};
    qrels.relevant["q2"] = {"r2", "c2"};
    const std::map<std::string, SourceTag> source_of = {{"r1", SourceTag::review}, {"r2", SourceTag::review},
                                                        {"c1", SourceTag::cqa},    {"c2", SourceTag::cqa},
                                                        {"b1", SourceTag::bullet}};
    auto report = eval::evaluate(run, qrels);
    eval::add_source_breakdown(report, run, qrels, source_of);
    REQUIRE(report.per_source.size() == 2);
    CHECK(report.per_source.at(SourceTag::cqa).evaluated == 2);
    CHECK(report.per_source.at(SourceTag::cqa).mean.mrr_at_5 == doctest::Approx((0.5 + 1.0) / 2));
    CHECK(report.per_source.at(SourceTag::review).evaluated == 1);
    CHECK(report.per_source.at(SourceTag::review).mean.p_at_1 == 0.0);

    const auto priors = eval::source_priors(run, qrels, source_of);
    CHECK(priors.at(SourceTag::cqa) == 1.0);
    CHECK(priors.at(SourceTag::review) == 1.0);
    CHECK(priors.at(SourceTag::bullet) == 1e-3);
    CHECK(priors.size() == kSourceTagCount);

    const auto j = report.to_json();
    CHECK(j.at("per_source").contains("cqa"));
    CHECK(j.at("mean").at("MRR@5").get<double>() == doctest::Approx(report.mean.mrr_at_5));
}

TEST_CASE("TREC readers") {
    std::istringstream qrels_in("q1 0 a 1\nq1 0 b 0\nq2 0 c 0\n\n");
    const auto q = Qrels::read_trec(qrels_in);
    CHECK(q.relevant.at("q1") == std::set<std::string>{"a"});
    CHECK(q.relevant.at("q2").empty());
    std::istringstream bad_rel("q1 0 a 2\n");
    CHECK_THROWS_AS((void)Qrels::read_trec(bad_rel), FormatError);

    std::istringstream run_in("q1 Q0 b 2 0.5 t\nq1 Q0 a 1 0.9 t\n");
    const auto r = RankedRun::read_trec(run_in);
    REQUIRE(r.queries.at("q1").size() == 2);
    CHECK(r.queries.at("q1")[0].candidate_id == "a");
    std::istringstream dup("q1 Q0 a 1 0.9 t\nq1 Q0 a 2 0.5 t\n");
    CHECK_THROWS_AS((void)RankedRun::read_trec(dup), ValidationError);
    std::istringstream short_line("q1 Q0 a\n");
    CHECK_THROWS_AS((void)RankedRun::read_trec(short_line), FormatError);
}

TEST_CASE("Fisher randomization test") {
    const std::vector<double> a{0.1, 0.5, 0.3, 0.9, 0.2};
    CHECK(eval::fisher_randomization(a, a, 10000, 1) == 1.0);

    std::vector<double> base(20), shifted(20);
    gen::Rng rng(61);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 20; ++i) {
        base[i] = u(rng);
        shifted[i] = base[i] + 100.0;
    }
    const double p = eval::fisher_randomization(shifted, base, 10000, 7);
    CHECK(p <= 0.01);
    CHECK(p > 0.0);
    CHECK(eval::fisher_randomization(shifted, base, 10000, 7) == p);

    // n = 2: every p lands near the exact sign-flip enumeration.
    for (int trial = 0; trial < 20; ++trial) {
        const std::vector<double> x{u(rng), u(rng)};
        const std::vector<double> y{u(rng), u(rng)};
        const double exact = oracle::fisher_exact(x, y);
        REQUIRE((exact == 0.5 || exact == 1.0));
        REQUIRE(std::abs(eval::fisher_randomization(x, y, 20000, trial) - exact) <= 0.02);
    }
    // n = 8 against full enumeration
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> x(8), y(8);
        for (int i = 0; i < 8; ++i) {
            x[i] = u(rng);
            y[i] = u(rng) * 0.8;
        }
        REQUIRE(std::abs(eval::fisher_randomization(x, y, 20000, trial) - oracle::fisher_exact(x, y)) <= 0.02);
    }

    CHECK_THROWS_AS((void)eval::fisher_randomization(a, base, 10000, 1), DimensionError);
    CHECK_THROWS_AS((void)eval::fisher_randomization(a, a, 10, 1), ConfigError);
}

TEST_CASE("paired t-test") {
    const std::vector<double> a{1, 2, 3, 4};
    const auto same = eval::paired_t_test(a, a);
    CHECK(same.degenerate);
    CHECK(same.p_value == 1.0);

    const std::vector<double> shifted{2, 3, 4, 5};
    const auto constant = eval::paired_t_test(shifted, a);
    CHECK(constant.degenerate);
    CHECK(constant.p_value == 0.0);

    const std::vector<double> x{1, 2, 3};
    const std::vector<double> zero{0, 0, 0};
    const auto r = eval::paired_t_test(x, zero);
    CHECK(r.t_statistic == doctest::Approx(2.0 * std::sqrt(3.0)));
    CHECK(r.t_statistic == doctest::Approx(3.4641).epsilon(1e-4));
    // two-sided p for t = 3.4641 with 2 df (closed form for df = 2: 1 - t / sqrt(2 + t^2))
    const double t = r.t_statistic;
    CHECK(r.p_value == doctest::Approx(1.0 - t / std::sqrt(2.0 + t * t)).epsilon(1e-9));

    // Student's 1908 sleep data (Cushny & Peebles): t = 4.0621, df = 9, p = 0.002833.
    const std::vector<double> drug1{0.7, -1.6, -0.2, -1.2, -0.1, 3.4, 3.7, 0.8, 0.0, 2.0};
    const std::vector<double> drug2{1.9, 0.8, 1.1, 0.1, -0.1, 4.4, 5.5, 1.6, 4.6, 3.4};
    const auto sleep = eval::paired_t_test(drug2, drug1);
    CHECK(sleep.t_statistic == doctest::Approx(4.0621).epsilon(1e-4));
    CHECK(std::abs(sleep.p_value - 0.002833) <= 1e-3);

    CHECK_THROWS_AS((void)eval::paired_t_test(std::vector<double>{1}, std::vector<double>{2}), ValidationError);
}
