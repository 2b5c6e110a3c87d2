#include "hybridrank/types.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include "hybridrank/error.hpp"

namespace hybridrank {

namespace {

constexpr std::array<SourceTag, kSourceTagCount> kAllTags = {
    SourceTag::attribute, SourceTag::bullet, SourceTag::cqa,   SourceTag::description,
    SourceTag::osp,       SourceTag::review, SourceTag::other,
};

}  // namespace

void SparseRep::validate() const {
    if (k_limit != 0 && entries.size() > k_limit) {
        throw ValidationError("sparse representation holds " + std::to_string(entries.size()) +
                              " entries, above its k limit " + std::to_string(k_limit));
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        if (!std::isfinite(e.weight) || e.weight <= 0.0F) {
            throw ValidationError("sparse weight for token " + std::to_string(e.token) +
                                  " must be finite and positive");
        }
        if (i > 0 && entries[i - 1].token >= e.token) {
            throw ValidationError("sparse token ids must be strictly increasing (token " +
                                  std::to_string(e.token) + ")");
        }
    }
}

SparseRep SparseRep::from_unsorted(std::vector<SparseEntry> entries, std::uint32_t k_limit) {
    std::sort(entries.begin(), entries.end(),
              [](const SparseEntry& a, const SparseEntry& b) { return a.token < b.token; });
    SparseRep rep{std::move(entries), k_limit};
    rep.validate();
    return rep;
}

void DenseRep::validate() const {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw ValidationError("dense value at position " + std::to_string(i) + " is not finite");
        }
    }
}

std::string_view to_string(SourceTag tag) noexcept {
    switch (tag) {
        case SourceTag::attribute: return "attribute";
        case SourceTag::bullet: return "bullet";
        case SourceTag::cqa: return "cqa";
        case SourceTag::description: return "description";
        case SourceTag::osp: return "osp";
        case SourceTag::review: return "review";
        case SourceTag::other: return "other";
    }
    return "other";
}

SourceTag parse_source_tag(std::string_view name) {
    std::string lowered(name);
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (auto tag : kAllTags) {
        if (to_string(tag) == lowered) {
            return tag;
        }
    }
    throw ValidationError("unknown source tag '" + std::string(name) + "'");
}

std::span<const SourceTag> all_source_tags() noexcept { return kAllTags; }

}  // namespace hybridrank
