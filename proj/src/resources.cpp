#include "hybridrank/resources.hpp"

#include <array>
#include <chrono>
#include <numeric>
#include <string>

#include "hybridrank/error.hpp"

namespace hybridrank::resources {

namespace {

constexpr std::array<Scheme, 5> kSchemes = {Scheme::cross_encoder, Scheme::independent_dense,
                                            Scheme::late_interaction, Scheme::sparse_lexical, Scheme::hybrid};

}  // namespace

std::string_view to_string(Scheme scheme) noexcept {
    switch (scheme) {
        case Scheme::cross_encoder: return "cross_encoder";
        case Scheme::independent_dense: return "independent_dense";
        case Scheme::late_interaction: return "late_interaction";
        case Scheme::sparse_lexical: return "sparse_lexical";
        case Scheme::hybrid: return "hybrid";
    }
    return "hybrid";
}

Scheme parse_scheme(std::string_view name) {
    for (auto s : kSchemes) {
        if (to_string(s) == name) {
            return s;
        }
    }
    throw ConfigError("unknown ranking scheme '" + std::string(name) + "'");
}

std::span<const Scheme> all_schemes() noexcept { return kSchemes; }

void CostModelParams::validate() const {
    if (h == 0 || n == 0 || k == 0) {
        throw ConfigError("cost model sizes h, n and k must be positive");
    }
}

std::uint64_t interaction_flops(const CostModelParams& p) {
    p.validate();
    switch (p.scheme) {
        case Scheme::cross_encoder:
            throw NotApplicableError("cross_encoder has no separate interaction step");
        case Scheme::independent_dense: return 2 * p.h;
        case Scheme::late_interaction: return 2 * p.n * p.n * p.h + p.n;
        case Scheme::sparse_lexical: return 2 * p.k;
        case Scheme::hybrid: return 2 * (p.h + p.k);
    }
    throw NotApplicableError("unknown scheme");
}

std::uint64_t storage_per_item(const CostModelParams& p) {
    p.validate();
    switch (p.scheme) {
        case Scheme::cross_encoder:
            throw NotApplicableError("cross_encoder stores nothing offline");
        case Scheme::independent_dense: return p.h;
        case Scheme::late_interaction: return p.n * p.h;
        case Scheme::sparse_lexical: return 2 * p.k;
        case Scheme::hybrid: return p.h + 2 * p.k;
    }
    throw NotApplicableError("unknown scheme");
}

std::string_view interaction_formula(Scheme scheme) noexcept {
    switch (scheme) {
        case Scheme::cross_encoder: return "-";
        case Scheme::independent_dense: return "2h";
        case Scheme::late_interaction: return "2n^2*h+n";
        case Scheme::sparse_lexical: return "2k";
        case Scheme::hybrid: return "2(h+k)";
    }
    return "-";
}

std::string_view storage_formula(Scheme scheme) noexcept {
    switch (scheme) {
        case Scheme::cross_encoder: return "-";
        case Scheme::independent_dense: return "h";
        case Scheme::late_interaction: return "n*h";
        case Scheme::sparse_lexical: return "2k";
        case Scheme::hybrid: return "h+2k";
    }
    return "-";
}

LatencyReport measure_latency(const index::HybridIndex& idx, std::span<const HybridEntry> queries,
                              const scoring::ScoringConfig& cfg, std::size_t repetitions) {
    if (queries.empty()) {
        throw ValidationError("latency measurement needs at least one query");
    }
    if (repetitions < 3) {
        throw ConfigError("latency measurement needs at least 3 repetitions");
    }
    using clock = std::chrono::steady_clock;
    std::size_t candidates = 0;
    // Warm-up pass; also fixes the candidate count per query.
    for (const auto& q : queries) {
        candidates += idx.query(q, cfg, idx.size()).size();
    }
    LatencyReport report;
    report.repetitions = repetitions;
    report.candidates_per_query = static_cast<double>(candidates) / static_cast<double>(queries.size());
    std::size_t sink = 0;
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
        const auto start = clock::now();
        for (const auto& q : queries) {
            sink += idx.query(q, cfg, idx.size()).size();
        }
        const std::chrono::duration<double, std::milli> elapsed = clock::now() - start;
        report.repetition_ms.push_back(elapsed.count() / static_cast<double>(queries.size()));
    }
    if (sink != candidates * repetitions) {
        throw Error("latency measurement saw a varying candidate count");
    }
    report.per_query_ms = std::accumulate(report.repetition_ms.begin(), report.repetition_ms.end(), 0.0) /
                          static_cast<double>(repetitions);
    if (candidates > 0) {
        report.per_candidate_ms = report.per_query_ms / report.candidates_per_query;
    }
    return report;
}

nlohmann::ordered_json cost_table(std::uint64_t h, std::uint64_t n, std::uint64_t k) {
    auto rows = nlohmann::ordered_json::array();
    for (auto scheme : kSchemes) {
        const CostModelParams p{h, n, k, scheme};
        nlohmann::ordered_json row;
        row["scheme"] = std::string(to_string(scheme));
        row["interaction_formula"] = std::string(interaction_formula(scheme));
        if (scheme == Scheme::cross_encoder) {
            row["interaction_flops"] = nullptr;
            row["storage_formula"] = std::string(storage_formula(scheme));
            row["storage_scalars"] = nullptr;
        } else {
            row["interaction_flops"] = interaction_flops(p);
            row["storage_formula"] = std::string(storage_formula(scheme));
            row["storage_scalars"] = storage_per_item(p);
        }
        rows.push_back(std::move(row));
    }
    nlohmann::ordered_json out;
    out["params"] = {{"h", h}, {"n", n}, {"k", k}};
    out["schemes"] = std::move(rows);
    return out;
}

}  // namespace hybridrank::resources
