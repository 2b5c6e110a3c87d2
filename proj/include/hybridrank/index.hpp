#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "hybridrank/scoring.hpp"
#include "hybridrank/types.hpp"

namespace hybridrank::index {

struct IndexMetadata {
    std::uint32_t dense_dim = 0;
    /// Vocabulary size |V|; 0 means "infer as max token id + 1".
    std::uint32_t vocab_size = 0;
    /// Top-k budget the stored representations were produced with (0 = unknown).
    std::uint32_t k = 0;
    /// Free-form description of the build configuration (JSON text).
    std::string creation_config;

    friend bool operator==(const IndexMetadata&, const IndexMetadata&) = default;
};

struct Posting {
    std::uint32_t entry = 0;  // ordinal into entries(), which are sorted by id
    float weight = 0.0F;

    friend bool operator==(const Posting&, const Posting&) = default;
};

/// Restricts a query to a subset of the collection.
struct QueryFilter {
    std::optional<std::set<SourceTag>> sources;
    /// Candidate ids; unknown ids are ignored.
    std::optional<std::vector<std::string>> candidate_ids;
};

/// Immutable hybrid collection: entries sorted by id, a contiguous dense
/// matrix, and token-major postings (CSR layout) sorted by entry ordinal.
class HybridIndex {
  public:
    HybridIndex() = default;

    /// Throws ValidationError on duplicate ids, DimensionError on mixed dense
    /// widths or tokens outside the vocabulary.
    static HybridIndex build(std::vector<HybridEntry> entries, IndexMetadata meta = {});

    /// Equal to scoring::rank over every stored entry admitted by `filter`,
    /// truncated to `top_n`. Lexical scores come from a document-at-a-time
    /// traversal of the query's posting lists.
    [[nodiscard]] std::vector<scoring::ScoredCandidate> query(const HybridEntry& q, const scoring::ScoringConfig& cfg,
                                                              std::size_t top_n,
                                                              const QueryFilter& filter = {}) const;

    void save(const std::filesystem::path& path) const;
    [[nodiscard]] std::string serialize() const;
    static HybridIndex load(const std::filesystem::path& path);
    static HybridIndex deserialize(std::string_view bytes);

    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
    [[nodiscard]] bool empty() const noexcept { return entries_.empty(); }
    [[nodiscard]] const IndexMetadata& metadata() const noexcept { return meta_; }
    [[nodiscard]] std::span<const HybridEntry> entries() const noexcept { return entries_; }
    [[nodiscard]] std::span<const float> dense_row(std::size_t ordinal) const noexcept {
        return std::span<const float>(dense_).subspan(ordinal * meta_.dense_dim, meta_.dense_dim);
    }
    [[nodiscard]] std::span<const Posting> postings(TokenId token) const noexcept;
    [[nodiscard]] std::size_t posting_count() const noexcept { return postings_.size(); }
    [[nodiscard]] std::optional<std::size_t> find(std::string_view id) const noexcept;

    friend bool operator==(const HybridIndex&, const HybridIndex&) = default;

  private:
    void build_postings();

    IndexMetadata meta_;
    std::vector<HybridEntry> entries_;
    std::vector<float> dense_;
    std::vector<TokenId> tokens_;             // distinct tokens, ascending
    std::vector<std::uint64_t> offsets_;      // tokens_.size() + 1 offsets into postings_
    std::vector<Posting> postings_;
};

}  // namespace hybridrank::index
