#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hybridrank/types.hpp"

namespace hybridrank::bm25 {

/// One ordered rewrite; `pattern` is an ECMAScript regex matched
/// case-insensitively, `replacement` may use $1-style groups.
struct Rewrite {
    std::string pattern;
    std::string replacement;
};

/// Text canonicalization applied to queries and documents before
/// tokenization. Steps run in a fixed order: JSON flattening, transliteration
/// to ASCII, unit rewrites (in list order, repeated until stable),
/// lowercasing, whitespace collapse.
struct NormalizationRules {
    bool lowercase = false;
    std::vector<Rewrite> unit_expansion = default_unit_expansion();
    bool json_flatten = true;
    bool non_english_transliteration = true;

    /// Inch/foot marks, common unit abbreviations and l/w/h/d dimension labels.
    [[nodiscard]] static std::vector<Rewrite> default_unit_expansion();
};

[[nodiscard]] std::string normalize(std::string_view text, const NormalizationRules& rules);

/// `{"a":"x","b":{"c":1}}` -> `a: x, b.c: 1`. Text that is not a JSON
/// object comes back unchanged.
[[nodiscard]] std::string flatten_json(std::string_view text);

/// Maps accented Latin letters, typographic quotes and primes, and the
/// multiplication sign to ASCII; other non-ASCII code points become spaces.
[[nodiscard]] std::string transliterate(std::string_view text);

/// Lowercased tokens split on whitespace and ASCII punctuation. Bytes above
/// 0x7F are kept inside tokens.
[[nodiscard]] std::vector<std::string> tokenize(std::string_view text);

struct Params {
    double k1 = 1.5;
    double b = 0.75;

    void validate() const;
};

struct Document {
    std::string id;
    SourceTag source = SourceTag::other;
    std::string text;
};

/// Corpus statistics: document frequencies, per-document term counts and lengths.
class CorpusStats {
  public:
    /// Documents are normalized with `rules` then tokenized.
    static CorpusStats build(std::span<const Document> docs, const NormalizationRules& rules);
    /// Pre-tokenized form, mainly for tests.
    static CorpusStats from_tokens(std::vector<std::pair<std::string, std::vector<std::string>>> docs);

    [[nodiscard]] std::size_t doc_count() const noexcept { return ids_.size(); }
    [[nodiscard]] std::size_t doc_freq(const std::string& term) const;
    [[nodiscard]] double avg_length() const noexcept { return avg_length_; }
    [[nodiscard]] std::size_t length(std::size_t doc) const { return lengths_.at(doc); }
    [[nodiscard]] std::size_t term_freq(std::size_t doc, const std::string& term) const;
    [[nodiscard]] const std::string& id(std::size_t doc) const { return ids_.at(doc); }
    /// Throws ValidationError for an unknown id.
    [[nodiscard]] std::size_t ordinal(std::string_view doc_id) const;

    /// ln(1 + (N - n + 0.5) / (n + 0.5)).
    [[nodiscard]] double idf(const std::string& term) const;

  private:
    std::vector<std::string> ids_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::vector<std::unordered_map<std::string, std::size_t>> term_counts_;
    std::vector<std::size_t> lengths_;
    std::unordered_map<std::string, std::size_t> doc_freq_;
    double avg_length_ = 0.0;
};

[[nodiscard]] double bm25_score(std::span<const std::string> query_terms, std::string_view doc_id,
                                const CorpusStats& stats, const Params& params = {});

struct ScoredDoc {
    std::string id;
    double score = 0.0;

    friend bool operator==(const ScoredDoc&, const ScoredDoc&) = default;
};

/// Normalizes and tokenizes the query, scores every document (or only
/// `restrict_to` when non-empty), and sorts by descending score then id.
[[nodiscard]] std::vector<ScoredDoc> bm25_rank(std::string_view query, const CorpusStats& stats,
                                               const NormalizationRules& rules, const Params& params = {},
                                               std::span<const std::string> restrict_to = {});

/// Lines `{"id", "source", "text"}`.
[[nodiscard]] std::vector<Document> read_corpus_jsonl(std::istream& in);

}  // namespace hybridrank::bm25
