#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "hybridrank/repr.hpp"
#include "hybridrank/types.hpp"

namespace hybridrank::losses {

struct LossConfig {
    double tau = 1.0;
    double lambda_q = 3e-4;
    double lambda_c = 1e-4;

    void validate() const;
};

/// Query, one positive, and b >= 1 explicit negatives. Every representation
/// carries both a dense and a sparse part.
struct TrainingInstance {
    HybridEntry query;
    HybridEntry positive;
    std::vector<HybridEntry> negatives;

    void validate() const;
};

struct InstanceLoss {
    double dense = 0.0;
    double lexical = 0.0;
    double total = 0.0;  // dense + lexical, regularizers excluded
};

/// InfoNCE with temperature:
///   -log( e^{pos/tau} / (e^{pos/tau} + sum_j e^{neg_j/tau}) )
/// evaluated with log-sum-exp so that very large or very small scores stay finite.
[[nodiscard]] double contrastive_loss(double pos_score, std::span<const double> neg_scores, double tau);

/// FLOPS regularizer: sum_j (mean_i w_j^{(i)})^2 over a batch of dense term weights.
[[nodiscard]] double flops_reg(std::span<const repr::TermWeights> batch);

/// Same regularizer over sparse representations, zero-filled to `vocab_size`.
/// Token ids at or above `vocab_size` are a DimensionError.
[[nodiscard]] double flops_reg(std::span<const SparseRep> batch, std::size_t vocab_size);

[[nodiscard]] double total_loss(double dense_rank_loss, double lexical_rank_loss, double reg_q, double reg_c,
                                const LossConfig& cfg);

[[nodiscard]] InstanceLoss instance_loss(const TrainingInstance& inst, const LossConfig& cfg);

/// Parses `{"query": rep, "positive": rep, "negatives": [rep, ...]}` lines,
/// rep = `{"dense": [...], "sparse": {"<token_id>": weight}}`. Blank lines are skipped.
[[nodiscard]] std::vector<TrainingInstance> read_training_jsonl(std::istream& in);

}  // namespace hybridrank::losses
