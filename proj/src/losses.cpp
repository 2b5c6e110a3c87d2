#include "hybridrank/losses.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <string>

#include "hybridrank/error.hpp"
#include "hybridrank/interchange.hpp"
#include "hybridrank/scoring.hpp"

namespace hybridrank::losses {

void LossConfig::validate() const {
    if (!std::isfinite(tau) || tau <= 0.0) {
        throw ConfigError("temperature must be positive, got " + std::to_string(tau));
    }
    if (!(lambda_q >= 0.0) || !(lambda_c >= 0.0)) {
        throw ConfigError("regularization weights must be non-negative");
    }
}

void TrainingInstance::validate() const {
    if (negatives.empty()) {
        throw ValidationError("training instance needs at least one negative");
    }
    const auto h = query.dense.size();
    auto check = [h](const HybridEntry& e, const char* role) {
        if (e.dense.size() != h) {
            throw DimensionError(std::string(role) + " dense length " + std::to_string(e.dense.size()) +
                                 " differs from query length " + std::to_string(h));
        }
    };
    check(positive, "positive");
    for (const auto& n : negatives) {
        check(n, "negative");
    }
}

double contrastive_loss(double pos_score, std::span<const double> neg_scores, double tau) {
    if (!std::isfinite(tau) || tau <= 0.0) {
        throw ConfigError("temperature must be positive, got " + std::to_string(tau));
    }
    if (neg_scores.empty()) {
        throw ValidationError("contrastive loss needs at least one negative score");
    }
    const double z = pos_score / tau;
    double peak = z;
    for (double n : neg_scores) {
        peak = std::max(peak, n / tau);
    }
    double rest = 0.0;
    for (double n : neg_scores) {
        rest += std::exp(n / tau - peak);
    }
    if (peak == z) {
        // log(1 + sum_j e^{s_j - z}) keeps precision when the positive dominates.
        return std::log1p(rest);
    }
    return (peak - z) + std::log(std::exp(z - peak) + rest);
}

double flops_reg(std::span<const repr::TermWeights> batch) {
    if (batch.empty()) {
        throw ValidationError("FLOPS regularizer needs a non-empty batch");
    }
    const auto width = batch.front().size();
    std::vector<double> sums(width, 0.0);
    for (const auto& w : batch) {
        if (w.size() != width) {
            throw DimensionError("term weight vectors in a batch must share one vocabulary size");
        }
        for (std::size_t j = 0; j < width; ++j) {
            sums[j] += w.weights[j];
        }
    }
    const auto n = static_cast<double>(batch.size());
    double total = 0.0;
    for (double s : sums) {
        const double mean = s / n;
        total += mean * mean;
    }
    return total;
}

double flops_reg(std::span<const SparseRep> batch, std::size_t vocab_size) {
    if (batch.empty()) {
        throw ValidationError("FLOPS regularizer needs a non-empty batch");
    }
    std::vector<double> sums(vocab_size, 0.0);
    for (const auto& rep : batch) {
        for (const auto& e : rep.entries) {
            if (e.token >= vocab_size) {
                throw DimensionError("token " + std::to_string(e.token) + " outside vocabulary of size " +
                                     std::to_string(vocab_size));
            }
            sums[e.token] += e.weight;
        }
    }
    const auto n = static_cast<double>(batch.size());
    double total = 0.0;
    for (double s : sums) {
        const double mean = s / n;
        total += mean * mean;
    }
    return total;
}

double total_loss(double dense_rank_loss, double lexical_rank_loss, double reg_q, double reg_c,
                  const LossConfig& cfg) {
    return dense_rank_loss + lexical_rank_loss + cfg.lambda_q * reg_q + cfg.lambda_c * reg_c;
}

InstanceLoss instance_loss(const TrainingInstance& inst, const LossConfig& cfg) {
    cfg.validate();
    inst.validate();
    std::vector<double> dense_neg;
    std::vector<double> lexical_neg;
    dense_neg.reserve(inst.negatives.size());
    lexical_neg.reserve(inst.negatives.size());
    for (const auto& n : inst.negatives) {
        dense_neg.push_back(scoring::dot_dense(inst.query.dense, n.dense));
        lexical_neg.push_back(scoring::dot_sparse(inst.query.sparse, n.sparse));
    }
    InstanceLoss out;
    out.dense = contrastive_loss(scoring::dot_dense(inst.query.dense, inst.positive.dense), dense_neg, cfg.tau);
    out.lexical =
        contrastive_loss(scoring::dot_sparse(inst.query.sparse, inst.positive.sparse), lexical_neg, cfg.tau);
    out.total = out.dense + out.lexical;
    return out;
}

std::vector<TrainingInstance> read_training_jsonl(std::istream& in) {
    std::vector<TrainingInstance> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            const auto doc = nlohmann::json::parse(line);
            TrainingInstance inst;
            inst.query = interchange::entry_from_json(doc.at("query"), "query");
            inst.positive = interchange::entry_from_json(doc.at("positive"), "positive");
            for (const auto& n : doc.at("negatives")) {
                inst.negatives.push_back(interchange::entry_from_json(n, "negative"));
            }
            inst.validate();
            out.push_back(std::move(inst));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("training line " + std::to_string(line_no) + ": " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError("training line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace hybridrank::losses
