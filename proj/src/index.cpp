#include "hybridrank/index.hpp"

#include <zlib.h>

#include <algorithm>
#include <fstream>
#include <iterator>
#include <limits>

#include "binary_io.hpp"
#include "hybridrank/error.hpp"

namespace hybridrank::index {

namespace {

constexpr std::string_view kMagic = "HRIX";
constexpr std::uint32_t kVersion = 1;

enum SectionTag : std::uint32_t { kMeta = 1, kEntries = 2, kDense = 3, kPostings = 4 };

std::uint32_t crc32_of(std::string_view bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed large payloads in chunks.
    constexpr std::size_t kChunk = 1U << 30;
    for (std::size_t off = 0; off < bytes.size(); off += kChunk) {
        const auto len = std::min(kChunk, bytes.size() - off);
        crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + off), static_cast<uInt>(len));
    }
    return static_cast<std::uint32_t>(crc);
}

std::string_view section_name(std::uint32_t tag) {
    switch (tag) {
        case kMeta: return "metadata";
        case kEntries: return "entries";
        case kDense: return "dense";
        case kPostings: return "postings";
        default: return "unknown";
    }
}

}  // namespace

HybridIndex HybridIndex::build(std::vector<HybridEntry> entries, IndexMetadata meta) {
    std::sort(entries.begin(), entries.end(), [](const HybridEntry& a, const HybridEntry& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < entries.size(); ++i) {
        if (entries[i - 1].id == entries[i].id) {
            throw ValidationError("duplicate entry id '" + entries[i].id + "'");
        }
    }
    if (!entries.empty()) {
        const auto width = static_cast<std::uint32_t>(entries.front().dense.size());
        if (meta.dense_dim != 0 && meta.dense_dim != width) {
            throw DimensionError("entries have dense width " + std::to_string(width) + ", metadata declares " +
                                 std::to_string(meta.dense_dim));
        }
        meta.dense_dim = width;
    }
    TokenId max_token = 0;
    bool any_token = false;
    for (const auto& e : entries) {
        if (e.dense.size() != meta.dense_dim) {
            throw DimensionError("entry '" + e.id + "' has dense width " + std::to_string(e.dense.size()) +
                                 ", expected " + std::to_string(meta.dense_dim));
        }
        e.dense.validate();
        e.sparse.validate();
        if (!e.sparse.empty()) {
            any_token = true;
            max_token = std::max(max_token, e.sparse.entries.back().token);
        }
    }
    if (meta.vocab_size == 0) {
        meta.vocab_size = any_token ? max_token + 1 : 0;
    } else if (any_token && max_token >= meta.vocab_size) {
        throw DimensionError("token " + std::to_string(max_token) + " outside vocabulary of size " +
                             std::to_string(meta.vocab_size));
    }

    HybridIndex idx;
    idx.meta_ = std::move(meta);
    idx.entries_ = std::move(entries);
    idx.dense_.reserve(idx.entries_.size() * idx.meta_.dense_dim);
    for (const auto& e : idx.entries_) {
        idx.dense_.insert(idx.dense_.end(), e.dense.values.begin(), e.dense.values.end());
    }
    idx.build_postings();
    return idx;
}

void HybridIndex::build_postings() {
    std::vector<std::pair<TokenId, Posting>> triples;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        for (const auto& s : entries_[i].sparse.entries) {
            triples.push_back({s.token, Posting{static_cast<std::uint32_t>(i), s.weight}});
        }
    }
    // Entry ordinals already ascend within each token after a stable sort.
    std::stable_sort(triples.begin(), triples.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    tokens_.clear();
    offsets_.clear();
    postings_.clear();
    postings_.reserve(triples.size());
    for (const auto& [token, posting] : triples) {
        if (tokens_.empty() || tokens_.back() != token) {
            tokens_.push_back(token);
            offsets_.push_back(postings_.size());
        }
        postings_.push_back(posting);
    }
    offsets_.push_back(postings_.size());
}

std::span<const Posting> HybridIndex::postings(TokenId token) const noexcept {
    const auto it = std::lower_bound(tokens_.begin(), tokens_.end(), token);
    if (it == tokens_.end() || *it != token) {
        return {};
    }
    const auto slot = static_cast<std::size_t>(it - tokens_.begin());
    return std::span<const Posting>(postings_).subspan(offsets_[slot], offsets_[slot + 1] - offsets_[slot]);
}

std::optional<std::size_t> HybridIndex::find(std::string_view id) const noexcept {
    const auto it = std::lower_bound(entries_.begin(), entries_.end(), id,
                                     [](const HybridEntry& e, std::string_view key) { return e.id < key; });
    if (it == entries_.end() || it->id != id) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - entries_.begin());
}

std::vector<scoring::ScoredCandidate> HybridIndex::query(const HybridEntry& q, const scoring::ScoringConfig& cfg,
                                                         std::size_t top_n, const QueryFilter& filter) const {
    cfg.validate();
    if (entries_.empty() || top_n == 0) {
        return {};
    }
    if (q.dense.size() != meta_.dense_dim) {
        throw DimensionError("query '" + q.id + "' has dense width " + std::to_string(q.dense.size()) +
                             ", index has " + std::to_string(meta_.dense_dim));
    }

    std::vector<char> admitted(entries_.size(), 1);
    if (filter.candidate_ids) {
        std::fill(admitted.begin(), admitted.end(), 0);
        for (const auto& id : *filter.candidate_ids) {
            if (const auto ord = find(id)) {
                admitted[*ord] = 1;
            }
        }
    }
    if (filter.sources) {
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (!filter.sources->contains(entries_[i].source)) {
                admitted[i] = 0;
            }
        }
    }

    // Document-at-a-time union over the query's posting lists. Cursors stay in
    // ascending token order so each document's sum matches a sorted merge.
    struct Cursor {
        std::span<const Posting> list;
        std::size_t pos = 0;
        double query_weight = 0.0;
    };
    std::vector<Cursor> cursors;
    cursors.reserve(q.sparse.size());
    for (const auto& s : q.sparse.entries) {
        const auto list = postings(s.token);
        if (!list.empty()) {
            cursors.push_back({list, 0, double{s.weight}});
        }
    }
    std::vector<double> lexical(entries_.size(), 0.0);
    constexpr auto kExhausted = std::numeric_limits<std::uint32_t>::max();
    for (;;) {
        std::uint32_t doc = kExhausted;
        for (const auto& c : cursors) {
            if (c.pos < c.list.size()) {
                doc = std::min(doc, c.list[c.pos].entry);
            }
        }
        if (doc == kExhausted) {
            break;
        }
        double acc = 0.0;
        for (auto& c : cursors) {
            if (c.pos < c.list.size() && c.list[c.pos].entry == doc) {
                acc += c.query_weight * double{c.list[c.pos].weight};
                ++c.pos;
            }
        }
        lexical[doc] = acc;
    }

    std::vector<scoring::ScoredCandidate> scored;
    scored.reserve(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (admitted[i] == 0) {
            continue;
        }
        const double dense = scoring::dot(q.dense.view(), dense_row(i));
        scored.push_back(
            {entries_[i].id, dense, lexical[i], scoring::interpolate(cfg.alpha, dense, lexical[i]), entries_[i].source});
    }

    if (cfg.normalization == scoring::Normalization::min_max_per_query) {
        scored = scoring::normalize_and_rescale(std::move(scored), cfg);
        if (scored.size() > top_n) {
            scored.resize(top_n);
        }
        return scored;
    }
    if (scored.size() > top_n) {
        std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(top_n), scored.end(),
                          scoring::ranks_before);
        scored.resize(top_n);
    } else {
        scoring::sort_ranked(scored);
    }
    return scored;
}

std::string HybridIndex::serialize() const {
    detail::ByteWriter meta;
    meta.u32(meta_.dense_dim);
    meta.u32(meta_.vocab_size);
    meta.u32(meta_.k);
    meta.str(meta_.creation_config);
    meta.u64(entries_.size());

    detail::ByteWriter ents;
    for (const auto& e : entries_) {
        ents.str(e.id);
        ents.u8(static_cast<std::uint8_t>(e.source));
        ents.u32(e.sparse.k_limit);
        ents.u32(static_cast<std::uint32_t>(e.sparse.size()));
        for (const auto& s : e.sparse.entries) {
            ents.u32(s.token);
            ents.f32(s.weight);
        }
        ents.u8(e.surface_tokens ? 1 : 0);
        if (e.surface_tokens) {
            ents.u32(static_cast<std::uint32_t>(e.surface_tokens->size()));
            for (const auto& t : *e.surface_tokens) {
                ents.str(t);
            }
        }
    }

    detail::ByteWriter dense;
    dense.u64(dense_.size());
    for (float v : dense_) {
        dense.f32(v);
    }

    detail::ByteWriter post;
    post.u64(tokens_.size());
    for (auto t : tokens_) {
        post.u32(t);
    }
    for (auto o : offsets_) {
        post.u64(o);
    }
    post.u64(postings_.size());
    for (const auto& p : postings_) {
        post.u32(p.entry);
        post.f32(p.weight);
    }

    detail::ByteWriter out;
    out.bytes(kMagic);
    out.u32(kVersion);
    out.u32(4);
    auto section = [&out](std::uint32_t tag, const std::string& payload) {
        out.u32(tag);
        out.u64(payload.size());
        out.bytes(payload);
        out.u32(crc32_of(payload));
    };
    section(kMeta, meta.data());
    section(kEntries, ents.data());
    section(kDense, dense.data());
    section(kPostings, post.data());
    return out.take();
}

void HybridIndex::save(const std::filesystem::path& path) const {
    const auto bytes = serialize();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write index '" + path.string() + "'");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("failed writing index '" + path.string() + "'");
    }
}

HybridIndex HybridIndex::deserialize(std::string_view bytes) {
    detail::ByteReader r(bytes, "index file");
    if (r.remaining() < kMagic.size() || r.bytes(kMagic.size()) != kMagic) {
        throw FormatError("index file: bad magic (not a hybrid index)");
    }
    const auto version = r.u32();
    if (version != kVersion) {
        throw VersionError("index file: unsupported version " + std::to_string(version) + " (expected " +
                           std::to_string(kVersion) + ")");
    }
    const auto section_count = r.u32();
    std::optional<std::string_view> sections[5];
    for (std::uint32_t i = 0; i < section_count; ++i) {
        const auto tag = r.u32();
        const auto length = r.u64();
        if (length > r.remaining()) {
            throw TruncatedError("index file: " + std::string(section_name(tag)) + " section truncated");
        }
        const auto payload = r.bytes(static_cast<std::size_t>(length));
        const auto stored = r.u32();
        if (crc32_of(payload) != stored) {
            throw ChecksumError("index file: checksum mismatch in " + std::string(section_name(tag)) + " section");
        }
        if (tag >= kMeta && tag <= kPostings) {
            sections[tag] = payload;
        }
    }
    for (std::uint32_t tag = kMeta; tag <= kPostings; ++tag) {
        if (!sections[tag]) {
            throw FormatError("index file: missing " + std::string(section_name(tag)) + " section");
        }
    }

    HybridIndex idx;
    detail::ByteReader meta(*sections[kMeta], "index metadata");
    idx.meta_.dense_dim = meta.u32();
    idx.meta_.vocab_size = meta.u32();
    idx.meta_.k = meta.u32();
    idx.meta_.creation_config = meta.str();
    const auto entry_count = meta.u64();

    detail::ByteReader dense(*sections[kDense], "index dense block");
    const auto dense_count = dense.u64();
    if (dense_count != entry_count * idx.meta_.dense_dim) {
        throw FormatError("index file: dense block holds " + std::to_string(dense_count) + " values for " +
                          std::to_string(entry_count) + " entries");
    }
    idx.dense_.resize(dense_count);
    for (auto& v : idx.dense_) {
        v = dense.f32();
    }

    detail::ByteReader ents(*sections[kEntries], "index entries");
    idx.entries_.resize(entry_count);
    for (std::size_t i = 0; i < entry_count; ++i) {
        auto& e = idx.entries_[i];
        e.id = ents.str();
        const auto tag = ents.u8();
        if (tag >= kSourceTagCount) {
            throw FormatError("index file: invalid source tag " + std::to_string(tag));
        }
        e.source = static_cast<SourceTag>(tag);
        e.sparse.k_limit = ents.u32();
        e.sparse.entries.resize(ents.u32());
        for (auto& s : e.sparse.entries) {
            s.token = ents.u32();
            s.weight = ents.f32();
        }
        if (ents.u8() != 0) {
            std::vector<std::string> tokens(ents.u32());
            for (auto& t : tokens) {
                t = ents.str();
            }
            e.surface_tokens = std::move(tokens);
        }
        const auto row = idx.dense_row(i);
        e.dense.values.assign(row.begin(), row.end());
    }

    detail::ByteReader post(*sections[kPostings], "index postings");
    idx.tokens_.resize(post.u64());
    for (auto& t : idx.tokens_) {
        t = post.u32();
    }
    idx.offsets_.resize(idx.tokens_.size() + 1);
    for (auto& o : idx.offsets_) {
        o = post.u64();
    }
    idx.postings_.resize(post.u64());
    for (auto& p : idx.postings_) {
        p.entry = post.u32();
        p.weight = post.f32();
    }

    // Postings must be exactly the nonzero entries of the stored representations.
    HybridIndex rebuilt;
    rebuilt.entries_ = idx.entries_;
    rebuilt.build_postings();
    if (rebuilt.tokens_ != idx.tokens_ || rebuilt.offsets_ != idx.offsets_ || rebuilt.postings_ != idx.postings_) {
        throw FormatError("index file: postings block disagrees with stored entries");
    }
    return idx;
}

HybridIndex HybridIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open index '" + path.string() + "'");
    }
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

}  // namespace hybridrank::index
