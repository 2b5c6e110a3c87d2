#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "hybridrank/index.hpp"
#include "hybridrank/scoring.hpp"
#include "json.hpp"

namespace hybridrank::resources {

enum class Scheme : std::uint8_t { cross_encoder, independent_dense, late_interaction, sparse_lexical, hybrid };

[[nodiscard]] std::string_view to_string(Scheme scheme) noexcept;
[[nodiscard]] Scheme parse_scheme(std::string_view name);
[[nodiscard]] std::span<const Scheme> all_schemes() noexcept;

struct CostModelParams {
    std::uint64_t h = 768;  // dense representation size
    std::uint64_t n = 128;  // max sequence length
    std::uint64_t k = 128;  // top-k sparse tokens
    Scheme scheme = Scheme::hybrid;

    void validate() const;
};

/// Query-candidate interaction cost in FLOPs:
///   independent_dense 2h, late_interaction 2n^2 h + n, sparse_lexical 2k,
///   hybrid 2(h + k). cross_encoder throws NotApplicableError.
[[nodiscard]] std::uint64_t interaction_flops(const CostModelParams& p);

/// Offline storage per candidate, in stored scalars (a sparse id/weight pair
/// counts as two): h, n h, 2k, h + 2k. cross_encoder throws NotApplicableError.
[[nodiscard]] std::uint64_t storage_per_item(const CostModelParams& p);

/// Symbolic form of each formula, "-" where the scheme has none.
[[nodiscard]] std::string_view interaction_formula(Scheme scheme) noexcept;
[[nodiscard]] std::string_view storage_formula(Scheme scheme) noexcept;

struct LatencyReport {
    double per_query_ms = 0.0;
    /// Absent when queries saw no candidates.
    std::optional<double> per_candidate_ms;
    double candidates_per_query = 0.0;
    std::size_t repetitions = 0;
    /// Mean per-query time of every repetition, in order.
    std::vector<double> repetition_ms;
};

/// Wall-clock ranking cost (interaction + sort) of the hybrid index on the
/// calling thread. One untimed warm-up pass precedes `repetitions` (>= 3)
/// timed passes over all queries.
[[nodiscard]] LatencyReport measure_latency(const index::HybridIndex& idx, std::span<const HybridEntry> queries,
                                            const scoring::ScoringConfig& cfg, std::size_t repetitions = 3);

/// Rows mirroring the cost table: one per scheme with both formulas and values.
[[nodiscard]] nlohmann::ordered_json cost_table(std::uint64_t h, std::uint64_t n, std::uint64_t k);

}  // namespace hybridrank::resources
