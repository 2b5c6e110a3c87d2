#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hybridrank/types.hpp"

namespace hybridrank::scoring {

enum class Normalization : std::uint8_t { none, min_max_per_query };

using SourcePriors = std::map<SourceTag, double>;

struct ScoringConfig {
    double alpha = 0.5;
    std::optional<SourcePriors> source_priors;
    Normalization normalization = Normalization::none;

    /// alpha in [0, 1]; every prior finite and > 0.
    void validate() const;
};

struct ScoredCandidate {
    std::string candidate_id;
    double dense_score = 0.0;
    double lexical_score = 0.0;
    double combined = 0.0;
    SourceTag source = SourceTag::other;

    friend bool operator==(const ScoredCandidate&, const ScoredCandidate&) = default;
};

struct HybridScore {
    double dense = 0.0;
    double lexical = 0.0;
    double combined = 0.0;
};

/// Inner product accumulated in double, left to right.
[[nodiscard]] inline double dot(std::span<const float> a, std::span<const float> b) noexcept {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += double{a[i]} * double{b[i]};
    }
    return acc;
}

/// Throws DimensionError on length mismatch.
[[nodiscard]] double dot_dense(const DenseRep& a, const DenseRep& b);

/// Merge over two canonical (token-sorted) lists; shared tokens are summed in
/// ascending token order.
[[nodiscard]] double dot_sparse(const SparseRep& a, const SparseRep& b) noexcept;

[[nodiscard]] inline double interpolate(double alpha, double dense, double lexical) noexcept {
    return alpha * dense + (1.0 - alpha) * lexical;
}

[[nodiscard]] HybridScore hybrid_score(const DenseRep& q_dense, const SparseRep& q_sparse, const DenseRep& c_dense,
                                       const SparseRep& c_sparse, double alpha);

/// Descending combined score, ascending candidate id on ties.
[[nodiscard]] bool ranks_before(const ScoredCandidate& a, const ScoredCandidate& b) noexcept;
void sort_ranked(std::vector<ScoredCandidate>& scored);

/// Scores every candidate against the query and sorts. With min-max
/// normalization the list is post-processed by normalize_and_rescale.
[[nodiscard]] std::vector<ScoredCandidate> rank(const HybridEntry& query, std::span<const HybridEntry> candidates,
                                                const ScoringConfig& cfg);

/// Min-max normalizes dense and lexical scores over the list (all-equal
/// columns map to 0.5), interpolates with cfg.alpha, multiplies by the
/// source prior when priors are configured, and re-sorts.
[[nodiscard]] std::vector<ScoredCandidate> normalize_and_rescale(std::vector<ScoredCandidate> scored,
                                                                 const ScoringConfig& cfg);

/// Source-aware variant: requires priors and min-max normalization; a source
/// without a prior is an error.
[[nodiscard]] std::vector<ScoredCandidate> source_aware_rescale(std::vector<ScoredCandidate> scored,
                                                                const ScoringConfig& cfg);

/// `qid Q0 candidate_id rank score run_tag` with six-decimal scores.
[[nodiscard]] std::string trec_line(std::string_view qid, const ScoredCandidate& candidate, std::size_t rank,
                                    std::string_view run_tag);
void write_trec(std::ostream& out, std::string_view qid, std::span<const ScoredCandidate> ranked,
                std::string_view run_tag);

}  // namespace hybridrank::scoring
