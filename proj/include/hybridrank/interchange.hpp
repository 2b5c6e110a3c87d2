#pragma once

// File formats shared with the encoder bridge and between CLI stages:
//   * HLGT logit files      -- concatenated records, each
//                              "HLGT" | u32 version=1 | u32 rows | u32 cols | rows*cols f32 (LE, row-major)
//   * dense vector files    -- u32 count | u32 width | count*width f32 (LE)
//   * item manifests (JSON) -- [{"id", "source", "surface_tokens": [...]}, ...]
//   * representation JSONL  -- {"id", "source", "dense": [...], "sparse": {"<id>": w}, "tokens": [...]}

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hybridrank/repr.hpp"
#include "hybridrank/types.hpp"
#include "json.hpp"

namespace hybridrank::interchange {

inline constexpr char kLogitMagic[4] = {'H', 'L', 'G', 'T'};
inline constexpr std::uint32_t kLogitVersion = 1;

[[nodiscard]] std::vector<repr::LogitMatrix> read_logits(std::istream& in);
[[nodiscard]] std::vector<repr::LogitMatrix> read_logits(const std::filesystem::path& path);
void write_logits(std::ostream& out, const std::vector<repr::LogitMatrix>& matrices);

[[nodiscard]] std::vector<DenseRep> read_dense(std::istream& in);
[[nodiscard]] std::vector<DenseRep> read_dense(const std::filesystem::path& path);
void write_dense(std::ostream& out, const std::vector<DenseRep>& vectors);

struct ManifestItem {
    std::string id;
    SourceTag source = SourceTag::other;
    std::vector<std::string> surface_tokens;
};

/// Accepts a top-level array or an object with an "items" array.
[[nodiscard]] std::vector<ManifestItem> read_manifest(const std::filesystem::path& path);

/// A representation line plus the optional per-query candidate restriction.
struct RepLine {
    HybridEntry entry;
    std::optional<std::vector<std::string>> candidates;
};

[[nodiscard]] HybridEntry entry_from_json(const nlohmann::json& obj, const std::string& context = "entry");
/// Keys in insertion order; sparse token ids ascend numerically.
[[nodiscard]] nlohmann::ordered_json entry_to_json(const HybridEntry& entry);
[[nodiscard]] SparseRep sparse_from_json(const nlohmann::json& obj);
[[nodiscard]] nlohmann::ordered_json sparse_to_json(const SparseRep& rep);

[[nodiscard]] std::vector<RepLine> read_reps(std::istream& in);
[[nodiscard]] std::vector<RepLine> read_reps(const std::filesystem::path& path);
void write_rep(std::ostream& out, const HybridEntry& entry);

/// `token_id -> string` from a vocabulary file with one token per line
/// (line number is the id), or from a JSON object {"<id>": "token"}.
[[nodiscard]] Vocabulary read_vocab(const std::filesystem::path& path);

[[nodiscard]] std::string read_text_file(const std::filesystem::path& path);

}  // namespace hybridrank::interchange
