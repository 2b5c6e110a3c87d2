#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hybridrank/types.hpp"
#include "json.hpp"

namespace hybridrank::explain {

struct MatchRecord {
    TokenId token_id = 0;
    std::string token;
    double q_weight = 0.0;
    double c_weight = 0.0;
    double contribution = 0.0;
    /// Token absent from the query's (resp. candidate's) surface tokens.
    bool expansion_in_query = false;
    bool expansion_in_candidate = false;

    friend bool operator==(const MatchRecord&, const MatchRecord&) = default;
};

struct MatchTotals {
    double lexical_score = 0.0;
    double dense_score = 0.0;
    double combined = 0.0;

    friend bool operator==(const MatchTotals&, const MatchTotals&) = default;
};

struct MatchReport {
    std::string query_id;
    std::string candidate_id;
    double alpha = 0.5;
    /// Descending contribution, ascending token id on ties.
    std::vector<MatchRecord> records;
    MatchTotals totals;

    friend bool operator==(const MatchReport&, const MatchReport&) = default;
};

/// One record per token shared by the two sparse representations. Surface
/// tokens are compared after lowercasing; a missing surface list counts as
/// empty. Throws ValidationError when `vocab` lacks a shared token id.
[[nodiscard]] MatchReport match_report(const HybridEntry& query, const HybridEntry& candidate, const Vocabulary& vocab,
                                       double alpha);

enum class Format : std::uint8_t { text, json, html };

[[nodiscard]] Format parse_format(std::string_view name);

/// Highlight level 1..5 for a contribution relative to the largest one.
[[nodiscard]] int intensity_bucket(double contribution, double max_contribution) noexcept;

[[nodiscard]] nlohmann::ordered_json to_json(const MatchReport& report);
[[nodiscard]] MatchReport from_json(const nlohmann::json& doc);

[[nodiscard]] std::string render(const MatchReport& report, Format format);

}  // namespace hybridrank::explain
