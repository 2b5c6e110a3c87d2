#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hybridrank {

using TokenId = std::uint32_t;
using Vocabulary = std::unordered_map<TokenId, std::string>;

struct SparseEntry {
    TokenId token = 0;
    float weight = 0.0F;

    friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// Expansion-aware lexical representation: (token, weight) pairs with
/// strictly ascending token ids and strictly positive weights.
///
/// `k_limit` records the top-k budget that produced the entries; zero means
/// the budget is unknown (e.g. representations read from interchange files).
struct SparseRep {
    std::vector<SparseEntry> entries;
    std::uint32_t k_limit = 0;

    [[nodiscard]] std::size_t size() const noexcept { return entries.size(); }
    [[nodiscard]] bool empty() const noexcept { return entries.empty(); }

    /// Throws ValidationError unless the canonical-form invariants hold.
    void validate() const;

    /// Sorts by token id and validates. Duplicate ids are rejected.
    static SparseRep from_unsorted(std::vector<SparseEntry> entries, std::uint32_t k_limit = 0);

    friend bool operator==(const SparseRep&, const SparseRep&) = default;
};

/// Summary semantic vector (the [CLS] encoding).
struct DenseRep {
    std::vector<float> values;

    [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
    [[nodiscard]] std::span<const float> view() const noexcept { return values; }

    /// Throws ValidationError on non-finite entries.
    void validate() const;

    friend bool operator==(const DenseRep&, const DenseRep&) = default;
};

enum class SourceTag : std::uint8_t { attribute, bullet, cqa, description, osp, review, other };

inline constexpr std::size_t kSourceTagCount = 7;

[[nodiscard]] std::string_view to_string(SourceTag tag) noexcept;

/// Case-insensitive; throws ValidationError for names outside the closed set.
[[nodiscard]] SourceTag parse_source_tag(std::string_view name);

[[nodiscard]] std::span<const SourceTag> all_source_tags() noexcept;

/// The unit stored in the index; queries use the same shape.
struct HybridEntry {
    std::string id;
    SourceTag source = SourceTag::other;
    DenseRep dense;
    SparseRep sparse;
    std::optional<std::vector<std::string>> surface_tokens;

    friend bool operator==(const HybridEntry&, const HybridEntry&) = default;
};

}  // namespace hybridrank
