#include "hybridrank/interchange.hpp"

#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

#include "binary_io.hpp"
#include "hybridrank/error.hpp"

namespace hybridrank::interchange {

using nlohmann::json;

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

namespace {

std::string slurp(std::istream& in) {
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    return in;
}

TokenId parse_token_id(const std::string& key) {
    TokenId id = 0;
    const auto* first = key.data();
    const auto* last = key.data() + key.size();
    auto [ptr, ec] = std::from_chars(first, last, id);
    if (ec != std::errc{} || ptr != last || key.empty()) {
        throw FormatError("sparse key '" + key + "' is not a token id");
    }
    return id;
}

}  // namespace

std::vector<repr::LogitMatrix> read_logits(std::istream& in) {
    const auto data = slurp(in);
    detail::ByteReader r(data, "logit file");
    std::vector<repr::LogitMatrix> out;
    while (!r.done()) {
        const auto magic = r.bytes(4);
        if (magic != std::string_view(kLogitMagic, 4)) {
            throw FormatError("logit record " + std::to_string(out.size()) + ": bad magic");
        }
        const auto version = r.u32();
        if (version != kLogitVersion) {
            throw VersionError("logit record " + std::to_string(out.size()) + ": unsupported version " +
                               std::to_string(version));
        }
        const auto rows = r.u32();
        const auto cols = r.u32();
        const auto count = std::uint64_t{rows} * cols;
        if (count * 4 > r.remaining()) {
            throw TruncatedError("logit record " + std::to_string(out.size()) + ": payload truncated");
        }
        std::vector<float> values(count);
        for (auto& v : values) {
            v = r.f32();
        }
        try {
            out.emplace_back(rows, cols, std::move(values));
        } catch (const ValidationError& e) {
            throw ValidationError("logit record " + std::to_string(out.size()) + ": " + e.what());
        }
    }
    return out;
}

std::vector<repr::LogitMatrix> read_logits(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_logits(in);
}

void write_logits(std::ostream& out, const std::vector<repr::LogitMatrix>& matrices) {
    detail::ByteWriter w;
    for (const auto& m : matrices) {
        w.bytes(std::string_view(kLogitMagic, 4));
        w.u32(kLogitVersion);
        w.u32(static_cast<std::uint32_t>(m.rows()));
        w.u32(static_cast<std::uint32_t>(m.cols()));
        for (float v : m.values()) {
            w.f32(v);
        }
    }
    out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
}

std::vector<DenseRep> read_dense(std::istream& in) {
    const auto data = slurp(in);
    detail::ByteReader r(data, "dense file");
    const auto count = r.u32();
    const auto width = r.u32();
    if (std::uint64_t{count} * width * 4 != r.remaining()) {
        if (std::uint64_t{count} * width * 4 > r.remaining()) {
            throw TruncatedError("dense file: header declares " + std::to_string(count) + "x" +
                                 std::to_string(width) + " values but payload is shorter");
        }
        throw FormatError("dense file: trailing bytes after " + std::to_string(count) + " vectors");
    }
    std::vector<DenseRep> out(count);
    for (auto& d : out) {
        d.values.resize(width);
        for (auto& v : d.values) {
            v = r.f32();
        }
        d.validate();
    }
    return out;
}

std::vector<DenseRep> read_dense(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_dense(in);
}

void write_dense(std::ostream& out, const std::vector<DenseRep>& vectors) {
    detail::ByteWriter w;
    const auto width = vectors.empty() ? 0U : static_cast<std::uint32_t>(vectors.front().size());
    w.u32(static_cast<std::uint32_t>(vectors.size()));
    w.u32(width);
    for (const auto& d : vectors) {
        if (d.size() != width) {
            throw DimensionError("dense vectors in one file must share a width");
        }
        for (float v : d.values) {
            w.f32(v);
        }
    }
    out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
}

std::vector<ManifestItem> read_manifest(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw FormatError("manifest '" + path.string() + "': " + e.what());
    }
    const json& items = doc.is_object() && doc.contains("items") ? doc.at("items") : doc;
    if (!items.is_array()) {
        throw FormatError("manifest '" + path.string() + "' must be an array of items");
    }
    std::vector<ManifestItem> out;
    out.reserve(items.size());
    try {
        for (const auto& item : items) {
            ManifestItem m;
            m.id = item.at("id").get<std::string>();
            m.source = item.contains("source") ? parse_source_tag(item.at("source").get<std::string>())
                                               : SourceTag::other;
            if (item.contains("surface_tokens")) {
                m.surface_tokens = item.at("surface_tokens").get<std::vector<std::string>>();
            }
            out.push_back(std::move(m));
        }
    } catch (const json::exception& e) {
        throw FormatError("manifest '" + path.string() + "': " + e.what());
    }
    return out;
}

SparseRep sparse_from_json(const json& obj) {
    if (!obj.is_object()) {
        throw FormatError("sparse representation must be an object of token id -> weight");
    }
    std::vector<SparseEntry> entries;
    entries.reserve(obj.size());
    for (const auto& [key, value] : obj.items()) {
        entries.push_back({parse_token_id(key), value.get<float>()});
    }
    return SparseRep::from_unsorted(std::move(entries));
}

nlohmann::ordered_json sparse_to_json(const SparseRep& rep) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (const auto& e : rep.entries) {
        obj[std::to_string(e.token)] = e.weight;
    }
    return obj;
}

HybridEntry entry_from_json(const json& obj, const std::string& context) {
    try {
        HybridEntry e;
        e.id = obj.contains("id") ? obj.at("id").get<std::string>() : std::string{};
        e.source = obj.contains("source") ? parse_source_tag(obj.at("source").get<std::string>()) : SourceTag::other;
        e.dense.values = obj.at("dense").get<std::vector<float>>();
        e.dense.validate();
        e.sparse = sparse_from_json(obj.at("sparse"));
        if (obj.contains("tokens")) {
            e.surface_tokens = obj.at("tokens").get<std::vector<std::string>>();
        }
        return e;
    } catch (const json::exception& ex) {
        throw FormatError(context + ": " + ex.what());
    }
}

nlohmann::ordered_json entry_to_json(const HybridEntry& entry) {
    nlohmann::ordered_json obj;
    obj["id"] = entry.id;
    obj["source"] = std::string(to_string(entry.source));
    obj["dense"] = entry.dense.values;
    obj["sparse"] = sparse_to_json(entry.sparse);
    if (entry.surface_tokens) {
        obj["tokens"] = *entry.surface_tokens;
    }
    return obj;
}

std::vector<RepLine> read_reps(std::istream& in) {
    std::vector<RepLine> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const auto context = "representation line " + std::to_string(line_no);
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::exception& e) {
            throw FormatError(context + ": " + e.what());
        }
        RepLine rep;
        try {
            rep.entry = entry_from_json(doc, context);
        } catch (const ValidationError& e) {
            throw ValidationError(context + ": " + e.what());
        }
        if (doc.contains("candidates")) {
            try {
                rep.candidates = doc.at("candidates").get<std::vector<std::string>>();
            } catch (const json::exception& e) {
                throw FormatError(context + ": " + e.what());
            }
        }
        out.push_back(std::move(rep));
    }
    return out;
}

std::vector<RepLine> read_reps(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_reps(in);
}

void write_rep(std::ostream& out, const HybridEntry& entry) { out << entry_to_json(entry).dump() << '\n'; }

Vocabulary read_vocab(const std::filesystem::path& path) {
    const auto text = read_text_file(path);
    Vocabulary vocab;
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        try {
            const auto doc = json::parse(text);
            for (const auto& [key, value] : doc.items()) {
                vocab.emplace(parse_token_id(key), value.get<std::string>());
            }
        } catch (const json::exception& e) {
            throw FormatError("vocabulary '" + path.string() + "': " + e.what());
        }
        return vocab;
    }
    std::istringstream lines(text);
    std::string line;
    TokenId id = 0;
    while (std::getline(lines, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        vocab.emplace(id++, line);
    }
    return vocab;
}

}  // namespace hybridrank::interchange
