#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "hybridrank/types.hpp"
#include "json.hpp"

namespace hybridrank::eval {

/// Binary relevance. Queries listed with only non-relevant judgments keep an
/// empty set and are excluded from averaging.
struct Qrels {
    std::map<std::string, std::set<std::string>> relevant;

    [[nodiscard]] static Qrels read_trec(std::istream& in);
};

struct RunEntry {
    std::string candidate_id;
    double score = 0.0;
};

/// Per-query candidate lists in ranked order.
struct RankedRun {
    std::map<std::string, std::vector<RunEntry>> queries;

    /// Lines `qid Q0 docid rank score tag`; candidates are ordered by the rank column.
    [[nodiscard]] static RankedRun read_trec(std::istream& in);
    void validate() const;
};

struct QueryMetrics {
    double map = 0.0;
    double r_prec = 0.0;
    double mrr_at_5 = 0.0;
    double ndcg = 0.0;
    double hit_rate_at_5 = 0.0;
    double p_at_1 = 0.0;

    friend bool operator==(const QueryMetrics&, const QueryMetrics&) = default;
};

inline constexpr std::size_t kMetricCount = 6;
[[nodiscard]] std::span<const char* const> metric_names() noexcept;
[[nodiscard]] double metric_value(const QueryMetrics& m, std::size_t which) noexcept;

struct SourceBreakdown {
    QueryMetrics mean;
    std::size_t evaluated = 0;
};

struct MetricReport {
    std::map<std::string, QueryMetrics> per_query;
    QueryMetrics mean;
    std::size_t evaluated = 0;
    /// In the run but absent from qrels.
    std::vector<std::string> missing_from_qrels;
    /// Judged relevant in qrels but absent from the run; scored as all-zero.
    std::vector<std::string> missing_from_run;
    /// Present but with no relevant candidate.
    std::vector<std::string> without_relevant;
    std::map<SourceTag, SourceBreakdown> per_source;

    [[nodiscard]] nlohmann::ordered_json to_json(bool include_per_query = true) const;
};

/// Metrics of a single ranking against its relevant set (assumed non-empty).
[[nodiscard]] QueryMetrics evaluate_query(std::span<const std::string> ranking, const std::set<std::string>& relevant);

/// Macro-averaged metrics. Throws ValidationError when no query is evaluable.
[[nodiscard]] MetricReport evaluate(const RankedRun& run, const Qrels& qrels);

/// Adds one block per source: each block evaluates the full ranking against
/// the relevant candidates of that source only. Sources without any
/// evaluable query are omitted.
void add_source_breakdown(MetricReport& report, const RankedRun& run, const Qrels& qrels,
                          const std::map<std::string, SourceTag>& source_of);

/// Source priors for source-aware rescaling: the per-source HitRate@5 of
/// `add_source_breakdown`, floored at `floor` so every prior stays positive.
[[nodiscard]] std::map<SourceTag, double> source_priors(const RankedRun& run, const Qrels& qrels,
                                                        const std::map<std::string, SourceTag>& source_of,
                                                        double floor = 1e-3);

/// Two-sided paired randomization test by sign-flipping differences.
/// Returns (c + 1) / (iterations + 1), where c counts flips whose |mean|
/// reaches the observed |mean|.
[[nodiscard]] double fisher_randomization(std::span<const double> a, std::span<const double> b,
                                          std::size_t iterations = 10000, std::uint64_t seed = 42);

struct TTestResult {
    double t_statistic = 0.0;
    double p_value = 1.0;
    bool degenerate = false;
};

/// Paired Student's t-test with n-1 degrees of freedom, two-sided.
[[nodiscard]] TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace hybridrank::eval
