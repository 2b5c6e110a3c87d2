#include "hybridrank/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "hybridrank/error.hpp"

namespace hybridrank::scoring {

void ScoringConfig::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw ConfigError("alpha must lie in [0, 1], got " + std::to_string(alpha));
    }
    if (source_priors) {
        for (const auto& [tag, prior] : *source_priors) {
            if (!std::isfinite(prior) || prior <= 0.0) {
                throw ConfigError("prior for source '" + std::string(to_string(tag)) + "' must be positive");
            }
        }
    }
}

double dot_dense(const DenseRep& a, const DenseRep& b) {
    if (a.size() != b.size()) {
        throw DimensionError("dense length mismatch: " + std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()));
    }
    return dot(a.view(), b.view());
}

double dot_sparse(const SparseRep& a, const SparseRep& b) noexcept {
    double acc = 0.0;
    auto ia = a.entries.begin();
    auto ib = b.entries.begin();
    while (ia != a.entries.end() && ib != b.entries.end()) {
        if (ia->token < ib->token) {
            ++ia;
        } else if (ib->token < ia->token) {
            ++ib;
        } else {
            acc += double{ia->weight} * double{ib->weight};
            ++ia;
            ++ib;
        }
    }
    return acc;
}

HybridScore hybrid_score(const DenseRep& q_dense, const SparseRep& q_sparse, const DenseRep& c_dense,
                         const SparseRep& c_sparse, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw ConfigError("alpha must lie in [0, 1], got " + std::to_string(alpha));
    }
    HybridScore s;
    s.dense = dot_dense(q_dense, c_dense);
    s.lexical = dot_sparse(q_sparse, c_sparse);
    s.combined = interpolate(alpha, s.dense, s.lexical);
    return s;
}

bool ranks_before(const ScoredCandidate& a, const ScoredCandidate& b) noexcept {
    if (a.combined != b.combined) {
        return a.combined > b.combined;
    }
    return a.candidate_id < b.candidate_id;
}

void sort_ranked(std::vector<ScoredCandidate>& scored) { std::sort(scored.begin(), scored.end(), ranks_before); }

std::vector<ScoredCandidate> rank(const HybridEntry& query, std::span<const HybridEntry> candidates,
                                  const ScoringConfig& cfg) {
    cfg.validate();
    std::vector<ScoredCandidate> scored;
    scored.reserve(candidates.size());
    for (const auto& c : candidates) {
        if (c.dense.size() != query.dense.size()) {
            throw DimensionError("candidate '" + c.id + "' has dense length " + std::to_string(c.dense.size()) +
                                 ", query has " + std::to_string(query.dense.size()));
        }
        const double dense = dot(query.dense.view(), c.dense.view());
        const double lexical = dot_sparse(query.sparse, c.sparse);
        scored.push_back({c.id, dense, lexical, interpolate(cfg.alpha, dense, lexical), c.source});
    }
    if (cfg.normalization == Normalization::min_max_per_query) {
        return normalize_and_rescale(std::move(scored), cfg);
    }
    sort_ranked(scored);
    return scored;
}

namespace {

struct Range {
    double lo = 0.0;
    double hi = 0.0;

    [[nodiscard]] double scale(double v) const noexcept { return hi > lo ? (v - lo) / (hi - lo) : 0.5; }
};

template <typename Get>
Range range_of(const std::vector<ScoredCandidate>& scored, Get get) {
    Range r{get(scored.front()), get(scored.front())};
    for (const auto& s : scored) {
        r.lo = std::min(r.lo, get(s));
        r.hi = std::max(r.hi, get(s));
    }
    return r;
}

}  // namespace

std::vector<ScoredCandidate> normalize_and_rescale(std::vector<ScoredCandidate> scored, const ScoringConfig& cfg) {
    cfg.validate();
    if (scored.empty()) {
        return scored;
    }
    const auto dense_range = range_of(scored, [](const ScoredCandidate& s) { return s.dense_score; });
    const auto lexical_range = range_of(scored, [](const ScoredCandidate& s) { return s.lexical_score; });
    for (auto& s : scored) {
        s.dense_score = dense_range.scale(s.dense_score);
        s.lexical_score = lexical_range.scale(s.lexical_score);
        s.combined = interpolate(cfg.alpha, s.dense_score, s.lexical_score);
        if (cfg.source_priors) {
            const auto it = cfg.source_priors->find(s.source);
            if (it == cfg.source_priors->end()) {
                throw ConfigError("no prior configured for source '" + std::string(to_string(s.source)) +
                                  "' (candidate '" + s.candidate_id + "')");
            }
            s.combined *= it->second;
        }
    }
    sort_ranked(scored);
    return scored;
}

std::vector<ScoredCandidate> source_aware_rescale(std::vector<ScoredCandidate> scored, const ScoringConfig& cfg) {
    if (!cfg.source_priors) {
        throw ConfigError("source-aware rescaling needs source priors");
    }
    if (cfg.normalization != Normalization::min_max_per_query) {
        throw ConfigError("source-aware rescaling needs min-max normalization");
    }
    return normalize_and_rescale(std::move(scored), cfg);
}

std::string trec_line(std::string_view qid, const ScoredCandidate& candidate, std::size_t rank,
                      std::string_view run_tag) {
    char score[64];
    std::snprintf(score, sizeof score, "%.6f", candidate.combined);
    std::string line;
    line.reserve(qid.size() + candidate.candidate_id.size() + run_tag.size() + 32);
    line.append(qid).append(" Q0 ").append(candidate.candidate_id).append(" ");
    line.append(std::to_string(rank)).append(" ").append(score).append(" ").append(run_tag);
    return line;
}

void write_trec(std::ostream& out, std::string_view qid, std::span<const ScoredCandidate> ranked,
                std::string_view run_tag) {
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        out << trec_line(qid, ranked[i], i + 1, run_tag) << '\n';
    }
}

}  // namespace hybridrank::scoring
