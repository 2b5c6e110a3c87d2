#include "hybridrank/eval.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <random>
#include <sstream>
#include <tuple>

#include "hybridrank/error.hpp"

namespace hybridrank::eval {

namespace {

constexpr std::array<const char*, kMetricCount> kMetricNames = {"MAP", "R-Prec", "MRR@5", "NDCG", "HitRate@5", "P@1"};

QueryMetrics& accumulate(QueryMetrics& into, const QueryMetrics& m) {
    into.map += m.map;
    into.r_prec += m.r_prec;
    into.mrr_at_5 += m.mrr_at_5;
    into.ndcg += m.ndcg;
    into.hit_rate_at_5 += m.hit_rate_at_5;
    into.p_at_1 += m.p_at_1;
    return into;
}

QueryMetrics divided(QueryMetrics m, std::size_t n) {
    const auto d = static_cast<double>(n);
    m.map /= d;
    m.r_prec /= d;
    m.mrr_at_5 /= d;
    m.ndcg /= d;
    m.hit_rate_at_5 /= d;
    m.p_at_1 /= d;
    return m;
}

std::vector<std::string> ids_of(const std::vector<RunEntry>& entries) {
    std::vector<std::string> ids;
    ids.reserve(entries.size());
    for (const auto& e : entries) {
        ids.push_back(e.candidate_id);
    }
    return ids;
}

nlohmann::ordered_json metrics_json(const QueryMetrics& m) {
    nlohmann::ordered_json out;
    for (std::size_t i = 0; i < kMetricCount; ++i) {
        out[kMetricNames[i]] = metric_value(m, i);
    }
    return out;
}

}  // namespace

std::span<const char* const> metric_names() noexcept { return kMetricNames; }

double metric_value(const QueryMetrics& m, std::size_t which) noexcept {
    switch (which) {
        case 0: return m.map;
        case 1: return m.r_prec;
        case 2: return m.mrr_at_5;
        case 3: return m.ndcg;
        case 4: return m.hit_rate_at_5;
        case 5: return m.p_at_1;
        default: return 0.0;
    }
}

Qrels Qrels::read_trec(std::istream& in) {
    Qrels q;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream fields(line);
        std::string qid;
        std::string iter;
        std::string docid;
        int rel = 0;
        if (!(fields >> qid)) {
            continue;
        }
        if (!(fields >> iter >> docid >> rel)) {
            throw FormatError("qrels line " + std::to_string(line_no) + ": expected 'qid 0 docid rel'");
        }
        if (rel != 0 && rel != 1) {
            throw FormatError("qrels line " + std::to_string(line_no) + ": relevance must be 0 or 1");
        }
        auto& rel_set = q.relevant[qid];
        if (rel == 1) {
            rel_set.insert(docid);
        }
    }
    return q;
}

RankedRun RankedRun::read_trec(std::istream& in) {
    struct Row {
        long rank;
        double score;
        std::string id;
    };
    std::map<std::string, std::vector<Row>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream fields(line);
        std::string qid;
        std::string q0;
        Row row;
        if (!(fields >> qid)) {
            continue;
        }
        if (!(fields >> q0 >> row.id >> row.rank >> row.score)) {
            throw FormatError("run line " + std::to_string(line_no) + ": expected 'qid Q0 docid rank score tag'");
        }
        rows[qid].push_back(std::move(row));
    }
    RankedRun run;
    for (auto& [qid, list] : rows) {
        std::stable_sort(list.begin(), list.end(), [](const Row& a, const Row& b) {
            return std::tie(a.rank, b.score, a.id) < std::tie(b.rank, a.score, b.id);
        });
        auto& out = run.queries[qid];
        for (auto& r : list) {
            out.push_back({std::move(r.id), r.score});
        }
    }
    run.validate();
    return run;
}

void RankedRun::validate() const {
    for (const auto& [qid, list] : queries) {
        std::set<std::string_view> seen;
        for (const auto& e : list) {
            if (!seen.insert(e.candidate_id).second) {
                throw ValidationError("run lists candidate '" + e.candidate_id + "' twice for query '" + qid + "'");
            }
        }
    }
}

QueryMetrics evaluate_query(std::span<const std::string> ranking, const std::set<std::string>& relevant) {
    QueryMetrics m;
    const auto total_relevant = relevant.size();
    if (total_relevant == 0) {
        return m;
    }
    std::size_t hits = 0;
    double precision_sum = 0.0;
    double dcg = 0.0;
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        if (!relevant.contains(ranking[i])) {
            continue;
        }
        const auto rank = i + 1;
        ++hits;
        precision_sum += static_cast<double>(hits) / static_cast<double>(rank);
        dcg += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
        if (rank <= total_relevant) {
            m.r_prec += 1.0;
        }
        if (hits == 1) {
            if (rank <= 5) {
                m.mrr_at_5 = 1.0 / static_cast<double>(rank);
                m.hit_rate_at_5 = 1.0;
            }
            m.p_at_1 = rank == 1 ? 1.0 : 0.0;
        }
    }
    double idcg = 0.0;
    for (std::size_t rank = 1; rank <= total_relevant; ++rank) {
        idcg += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
    }
    m.map = precision_sum / static_cast<double>(total_relevant);
    m.r_prec /= static_cast<double>(total_relevant);
    m.ndcg = dcg / idcg;
    return m;
}

MetricReport evaluate(const RankedRun& run, const Qrels& qrels) {
    MetricReport report;
    for (const auto& [qid, _] : run.queries) {
        if (!qrels.relevant.contains(qid)) {
            report.missing_from_qrels.push_back(qid);
        }
    }
    QueryMetrics sum;
    for (const auto& [qid, relevant] : qrels.relevant) {
        if (relevant.empty()) {
            report.without_relevant.push_back(qid);
            continue;
        }
        const auto it = run.queries.find(qid);
        QueryMetrics m;
        if (it == run.queries.end()) {
            report.missing_from_run.push_back(qid);
        } else {
            const auto ids = ids_of(it->second);
            m = evaluate_query(ids, relevant);
        }
        report.per_query.emplace(qid, m);
        accumulate(sum, m);
    }
    report.evaluated = report.per_query.size();
    if (report.evaluated == 0) {
        throw ValidationError("no evaluable query: every query lacks a relevant candidate");
    }
    report.mean = divided(sum, report.evaluated);
    return report;
}

void add_source_breakdown(MetricReport& report, const RankedRun& run, const Qrels& qrels,
                          const std::map<std::string, SourceTag>& source_of) {
    report.per_source.clear();
    for (const auto tag : all_source_tags()) {
        QueryMetrics sum;
        std::size_t n = 0;
        for (const auto& [qid, relevant] : qrels.relevant) {
            std::set<std::string> restricted;
            for (const auto& id : relevant) {
                const auto it = source_of.find(id);
                if (it != source_of.end() && it->second == tag) {
                    restricted.insert(id);
                }
            }
            if (restricted.empty()) {
                continue;
            }
            const auto rit = run.queries.find(qid);
            if (rit != run.queries.end()) {
                const auto ids = ids_of(rit->second);
                accumulate(sum, evaluate_query(ids, restricted));
            }
            ++n;
        }
        if (n > 0) {
            report.per_source[tag] = SourceBreakdown{divided(sum, n), n};
        }
    }
}

std::map<SourceTag, double> source_priors(const RankedRun& run, const Qrels& qrels,
                                          const std::map<std::string, SourceTag>& source_of, double floor) {
    MetricReport scratch;
    add_source_breakdown(scratch, run, qrels, source_of);
    std::map<SourceTag, double> priors;
    for (const auto tag : all_source_tags()) {
        const auto it = scratch.per_source.find(tag);
        const double hit = it == scratch.per_source.end() ? 0.0 : it->second.mean.hit_rate_at_5;
        priors[tag] = std::max(hit, floor);
    }
    return priors;
}

nlohmann::ordered_json MetricReport::to_json(bool include_per_query) const {
    nlohmann::ordered_json out;
    out["evaluated_queries"] = evaluated;
    out["mean"] = metrics_json(mean);
    if (include_per_query) {
        nlohmann::ordered_json pq = nlohmann::ordered_json::object();
        for (const auto& [qid, m] : per_query) {
            pq[qid] = metrics_json(m);
        }
        out["per_query"] = std::move(pq);
    }
    out["missing_from_qrels"] = missing_from_qrels;
    out["missing_from_run"] = missing_from_run;
    out["without_relevant"] = without_relevant;
    if (!per_source.empty()) {
        nlohmann::ordered_json ps = nlohmann::ordered_json::object();
        for (const auto& [tag, block] : per_source) {
            auto entry = metrics_json(block.mean);
            entry["evaluated_queries"] = block.evaluated;
            ps[std::string(to_string(tag))] = std::move(entry);
        }
        out["per_source"] = std::move(ps);
    }
    return out;
}

double fisher_randomization(std::span<const double> a, std::span<const double> b, std::size_t iterations,
                            std::uint64_t seed) {
    if (a.size() != b.size()) {
        throw DimensionError("paired samples differ in length: " + std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()));
    }
    if (a.size() < 2) {
        throw ValidationError("randomization test needs at least two paired values");
    }
    if (iterations < 1000) {
        throw ConfigError("randomization test needs at least 1000 iterations");
    }
    std::vector<double> diffs(a.size());
    double observed = 0.0;
    double magnitude = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diffs[i] = a[i] - b[i];
        observed += diffs[i];
        magnitude += std::abs(diffs[i]);
    }
    // Sums stand in for means (same n); the slack absorbs summation-order rounding.
    const double threshold = std::abs(observed) - 1e-12 * std::max(1.0, magnitude);
    std::mt19937_64 rng(seed);
    std::size_t at_least_as_extreme = 0;
    for (std::size_t it = 0; it < iterations; ++it) {
        double sum = 0.0;
        std::uint64_t bits = 0;
        for (std::size_t i = 0; i < diffs.size(); ++i) {
            if (i % 64 == 0) {
                bits = rng();
            }
            sum += (bits & 1U) != 0 ? -diffs[i] : diffs[i];
            bits >>= 1U;
        }
        if (std::abs(sum) >= threshold) {
            ++at_least_as_extreme;
        }
    }
    return static_cast<double>(at_least_as_extreme + 1) / static_cast<double>(iterations + 1);
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DimensionError("paired samples differ in length: " + std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()));
    }
    if (a.size() < 2) {
        throw ValidationError("paired t-test needs at least two paired values");
    }
    const auto n = static_cast<double>(a.size());
    double mean = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        mean += a[i] - b[i];
    }
    mean /= n;
    double ss = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = (a[i] - b[i]) - mean;
        ss += d * d;
    }
    const double sd = std::sqrt(ss / (n - 1.0));
    TTestResult r;
    if (sd == 0.0) {
        r.degenerate = true;
        if (mean == 0.0) {
            r.t_statistic = 0.0;
            r.p_value = 1.0;
        } else {
            r.t_statistic = std::copysign(std::numeric_limits<double>::infinity(), mean);
            r.p_value = 0.0;
        }
        return r;
    }
    r.t_statistic = mean / (sd / std::sqrt(n));
    const boost::math::students_t dist(n - 1.0);
    r.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t_statistic))));
    return r;
}

}  // namespace hybridrank::eval
