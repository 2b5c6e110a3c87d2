#include "hybridrank/repr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hybridrank/error.hpp"

namespace hybridrank::repr {

LogitMatrix::LogitMatrix(std::size_t rows, std::size_t cols, std::vector<float> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (rows_ == 0 || cols_ == 0) {
        throw DimensionError("logit matrix needs at least one row and one column");
    }
    if (rows_ * cols_ != values_.size()) {
        throw DimensionError("logit matrix declares " + std::to_string(rows_) + "x" +
                             std::to_string(cols_) + " but holds " + std::to_string(values_.size()) +
                             " values");
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            throw ValidationError("non-finite logit at row " + std::to_string(i / cols_) + ", column " +
                                  std::to_string(i % cols_));
        }
    }
}

std::string_view to_string(Aggregation mode) noexcept { return mode == Aggregation::max ? "max" : "sum"; }

Aggregation parse_aggregation(std::string_view name) {
    if (name == "max") {
        return Aggregation::max;
    }
    if (name == "sum") {
        return Aggregation::sum;
    }
    throw ConfigError("aggregation must be 'max' or 'sum', got '" + std::string(name) + "'");
}

void EncodeConfig::validate() const {
    if (k == 0) {
        throw ConfigError("top-k budget must be at least 1");
    }
}

LogitMatrix saturate(const LogitMatrix& logits) {
    std::vector<float> out(logits.values().size());
    std::transform(logits.values().begin(), logits.values().end(), out.begin(),
                   [](float m) { return static_cast<float>(std::log1p(std::max(0.0, double{m}))); });
    return LogitMatrix(logits.rows(), logits.cols(), std::move(out));
}

TermWeights aggregate(const LogitMatrix& saturated, Aggregation mode) {
    std::vector<float> weights(saturated.row(0).begin(), saturated.row(0).end());
    if (mode == Aggregation::max) {
        for (std::size_t r = 1; r < saturated.rows(); ++r) {
            const auto row = saturated.row(r);
            for (std::size_t j = 0; j < weights.size(); ++j) {
                weights[j] = std::max(weights[j], row[j]);
            }
        }
        return TermWeights{std::move(weights)};
    }
    // Sum in double, rounding once per column.
    std::vector<double> acc(weights.begin(), weights.end());
    for (std::size_t r = 1; r < saturated.rows(); ++r) {
        const auto row = saturated.row(r);
        for (std::size_t j = 0; j < acc.size(); ++j) {
            acc[j] += row[j];
        }
    }
    std::transform(acc.begin(), acc.end(), weights.begin(), [](double v) { return static_cast<float>(v); });
    return TermWeights{std::move(weights)};
}

SparseRep topk_sparsify(std::span<const float> weights, std::uint32_t k) {
    if (k == 0) {
        throw ConfigError("top-k budget must be at least 1");
    }
    std::vector<TokenId> candidates;
    for (std::size_t j = 0; j < weights.size(); ++j) {
        if (weights[j] > 0.0F) {
            candidates.push_back(static_cast<TokenId>(j));
        }
    }
    auto heavier = [&](TokenId a, TokenId b) {
        return weights[a] != weights[b] ? weights[a] > weights[b] : a < b;
    };
    if (candidates.size() > k) {
        std::nth_element(candidates.begin(), candidates.begin() + (k - 1), candidates.end(), heavier);
        candidates.resize(k);
    }
    std::sort(candidates.begin(), candidates.end());

    SparseRep rep;
    rep.k_limit = k;
    rep.entries.reserve(candidates.size());
    for (auto id : candidates) {
        rep.entries.push_back({id, weights[id]});
    }
    return rep;
}

SparseRep topk_sparsify(const TermWeights& weights, std::uint32_t k) { return topk_sparsify(weights.weights, k); }

SparseRep truncate(const SparseRep& rep, std::uint32_t k) {
    if (k == 0) {
        throw ConfigError("top-k budget must be at least 1");
    }
    if (rep.entries.size() <= k) {
        SparseRep out = rep;
        out.k_limit = k;
        return out;
    }
    std::vector<SparseEntry> kept = rep.entries;
    std::nth_element(kept.begin(), kept.begin() + (k - 1), kept.end(), [](const SparseEntry& a, const SparseEntry& b) {
        return a.weight != b.weight ? a.weight > b.weight : a.token < b.token;
    });
    kept.resize(k);
    std::sort(kept.begin(), kept.end(), [](const SparseEntry& a, const SparseEntry& b) { return a.token < b.token; });
    return SparseRep{std::move(kept), k};
}

SparseRep encode(const LogitMatrix& logits, const EncodeConfig& cfg) {
    cfg.validate();
    return topk_sparsify(aggregate(saturate(logits), cfg.aggregation), cfg.k);
}

}  // namespace hybridrank::repr
