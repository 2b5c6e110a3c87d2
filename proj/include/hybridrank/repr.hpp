#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "hybridrank/types.hpp"

namespace hybridrank::repr {

/// Row-major |T| x |V| matrix of MLM logits: one row per input token,
/// one column per vocabulary term.
class LogitMatrix {
  public:
    LogitMatrix() = default;

    /// Validates shape (rows, cols >= 1, rows * cols == values.size()) and
    /// finiteness; the error names the first offending cell.
    LogitMatrix(std::size_t rows, std::size_t cols, std::vector<float> values);

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] float at(std::size_t row, std::size_t col) const { return values_[row * cols_ + col]; }
    [[nodiscard]] std::span<const float> row(std::size_t r) const {
        return std::span<const float>(values_).subspan(r * cols_, cols_);
    }
    [[nodiscard]] std::span<const float> values() const noexcept { return values_; }

    friend bool operator==(const LogitMatrix&, const LogitMatrix&) = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<float> values_;
};

/// Aggregated per-term importance W, one non-negative weight per vocabulary term.
struct TermWeights {
    std::vector<float> weights;

    [[nodiscard]] std::size_t size() const noexcept { return weights.size(); }
    friend bool operator==(const TermWeights&, const TermWeights&) = default;
};

enum class Aggregation : std::uint8_t { max, sum };

[[nodiscard]] std::string_view to_string(Aggregation mode) noexcept;
[[nodiscard]] Aggregation parse_aggregation(std::string_view name);

struct EncodeConfig {
    std::uint32_t k = 128;
    Aggregation aggregation = Aggregation::max;

    void validate() const;
};

/// log(1 + ReLU(m)) elementwise.
[[nodiscard]] LogitMatrix saturate(const LogitMatrix& logits);

/// Column-wise max or sum over token rows. Entries must be non-negative.
[[nodiscard]] TermWeights aggregate(const LogitMatrix& saturated, Aggregation mode);

/// Keeps the k largest positive weights. Ties at the cut-off go to the
/// smaller token id; zero weights are never kept.
[[nodiscard]] SparseRep topk_sparsify(std::span<const float> weights, std::uint32_t k);
[[nodiscard]] SparseRep topk_sparsify(const TermWeights& weights, std::uint32_t k);

/// Re-applies a (smaller) top-k budget to an existing sparse representation.
[[nodiscard]] SparseRep truncate(const SparseRep& rep, std::uint32_t k);

/// saturate -> aggregate -> topk_sparsify.
[[nodiscard]] SparseRep encode(const LogitMatrix& logits, const EncodeConfig& cfg);

}  // namespace hybridrank::repr
