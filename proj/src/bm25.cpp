#include "hybridrank/bm25.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <regex>

#include "hybridrank/error.hpp"
#include "json.hpp"

namespace hybridrank::bm25 {

namespace {

constexpr const char* kNumber = R"((\d+(?:\.\d+)?))";

std::string number_then(const char* tail) { return std::string(kNumber) + tail; }

void flatten_into(const nlohmann::ordered_json& value, const std::string& key, std::vector<std::string>& parts) {
    if (value.is_object()) {
        for (const auto& [k, v] : value.items()) {
            flatten_into(v, key.empty() ? k : key + "." + k, parts);
        }
        return;
    }
    std::string text;
    if (value.is_string()) {
        text = value.get<std::string>();
    } else if (value.is_array()) {
        for (const auto& item : value) {
            if (!text.empty()) {
                text += ", ";
            }
            text += item.is_string() ? item.get<std::string>() : item.dump();
        }
    } else {
        text = value.dump();
    }
    parts.push_back(key + ": " + text);
}

/// Decodes one UTF-8 sequence starting at `i`; returns U+FFFD for malformed input.
char32_t next_code_point(std::string_view s, std::size_t& i) {
    const auto lead = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    char32_t cp = 0xFFFD;
    if (lead < 0x80) {
        cp = lead;
    } else if ((lead >> 5U) == 0x6) {
        len = 2;
        cp = lead & 0x1FU;
    } else if ((lead >> 4U) == 0xE) {
        len = 3;
        cp = lead & 0x0FU;
    } else if ((lead >> 3U) == 0x1E) {
        len = 4;
        cp = lead & 0x07U;
    } else {
        ++i;
        return 0xFFFD;
    }
    if (i + len > s.size()) {
        ++i;
        return 0xFFFD;
    }
    for (std::size_t k = 1; k < len; ++k) {
        const auto cont = static_cast<unsigned char>(s[i + k]);
        if ((cont >> 6U) != 0x2) {
            ++i;
            return 0xFFFD;
        }
        cp = (cp << 6U) | (cont & 0x3FU);
    }
    i += len;
    return cp;
}

const char* ascii_for(char32_t cp) {
    if (cp >= 0xC0 && cp <= 0xC5) return "A";
    if (cp >= 0xE0 && cp <= 0xE5) return "a";
    if (cp >= 0xC8 && cp <= 0xCB) return "E";
    if (cp >= 0xE8 && cp <= 0xEB) return "e";
    if (cp >= 0xCC && cp <= 0xCF) return "I";
    if (cp >= 0xEC && cp <= 0xEF) return "i";
    if ((cp >= 0xD2 && cp <= 0xD6) || cp == 0xD8) return "O";
    if ((cp >= 0xF2 && cp <= 0xF6) || cp == 0xF8) return "o";
    if (cp >= 0xD9 && cp <= 0xDC) return "U";
    if (cp >= 0xF9 && cp <= 0xFC) return "u";
    switch (cp) {
        case 0xC6: return "AE";
        case 0xE6: return "ae";
        case 0xC7: return "C";
        case 0xE7: return "c";
        case 0xD1: return "N";
        case 0xF1: return "n";
        case 0xDD: return "Y";
        case 0xFD:
        case 0xFF: return "y";
        case 0xDF: return "ss";
        case 0x152: return "OE";
        case 0x153: return "oe";
        case 0x160: return "S";
        case 0x161: return "s";
        case 0x17D: return "Z";
        case 0x17E: return "z";
        case 0xD7: return "x";                 // multiplication sign
        case 0x2018:
        case 0x2019:
        case 0x2032: return "'";               // quotes, prime
        case 0x201C:
        case 0x201D:
        case 0x2033: return "\"";              // quotes, double prime
        case 0x2013:
        case 0x2014: return "-";
        case 0x2026: return "...";
        case 0xB0: return " degrees ";
        default: return " ";
    }
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c)) != 0) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(c);
    }
    return out;
}

struct CompiledRewrite {
    std::regex re;
    std::string replacement;
};

std::vector<CompiledRewrite> compile(const std::vector<Rewrite>& rules) {
    std::vector<CompiledRewrite> out;
    out.reserve(rules.size());
    for (const auto& r : rules) {
        try {
            out.push_back({std::regex(r.pattern, std::regex::ECMAScript | std::regex::icase), r.replacement});
        } catch (const std::regex_error& e) {
            throw ConfigError("invalid rewrite pattern '" + r.pattern + "': " + e.what());
        }
    }
    return out;
}

}  // namespace

std::vector<Rewrite> NormalizationRules::default_unit_expansion() {
    const std::string unit = R"((\d+(?:\.\d+)? (?:inches|feet|centimeters|millimeters|meters)))";
    return {
        {number_then(R"(\s*(?:''|"))"), "$1 inches "},
        {number_then(R"(\s*'(?![a-z]))"), "$1 feet "},
        {number_then(R"(\s*(?:inch|inches)\b)"), "$1 inches"},
        {number_then(R"(\s*(?:ft|foot|feet)\b)"), "$1 feet"},
        {number_then(R"(\s*(?:cm|centimeters?)\b)"), "$1 centimeters"},
        {number_then(R"(\s*(?:mm|millimeters?)\b)"), "$1 millimeters"},
        {number_then(R"(\s*(?:lbs?|pounds?)\b)"), "$1 pounds"},
        {number_then(R"(\s*(?:oz|ounces?)\b)"), "$1 ounces"},
        {number_then(R"(\s*(?:kg|kilograms?)\b)"), "$1 kilograms"},
        {unit + R"(\s+l\b)", "length $1"},
        {unit + R"(\s+w\b)", "width $1"},
        {unit + R"(\s+h\b)", "height $1"},
        {unit + R"(\s+d\b)", "depth $1"},
    };
}

std::string flatten_json(std::string_view text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos || text[first] != '{') {
        return std::string(text);
    }
    nlohmann::ordered_json doc;
    try {
        doc = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::exception&) {
        return std::string(text);
    }
    std::vector<std::string> parts;
    flatten_into(doc, "", parts);
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) {
            out += ", ";
        }
        out += p;
    }
    return out;
}

std::string transliterate(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        const auto cp = next_code_point(text, i);
        if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
        } else if (cp == 0xA0) {
            out.push_back(' ');
        } else {
            out += ascii_for(cp);
        }
    }
    return out;
}

std::string normalize(std::string_view text, const NormalizationRules& rules) {
    std::string s = rules.json_flatten ? flatten_json(text) : std::string(text);
    if (rules.non_english_transliteration) {
        s = transliterate(s);
    }
    if (!rules.unit_expansion.empty()) {
        // Re-apply the ordered list until nothing changes, so labels that only
        // become adjacent to a unit after an earlier rewrite are handled too.
        const auto compiled = compile(rules.unit_expansion);
        for (int round = 0; round < 8; ++round) {
            std::string before = s;
            for (const auto& r : compiled) {
                s = std::regex_replace(s, r.re, r.replacement);
            }
            if (s == before) {
                break;
            }
        }
    }
    if (rules.lowercase) {
        std::transform(s.begin(), s.end(), s.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    }
    return collapse_whitespace(s);
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (c < 0x80 && (std::isspace(c) != 0 || std::ispunct(c) != 0)) {
            if (!current.empty()) {
                tokens.push_back(std::move(current));
                current.clear();
            }
            continue;
        }
        current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
    if (!current.empty()) {
        tokens.push_back(std::move(current));
    }
    return tokens;
}

void Params::validate() const {
    if (!(k1 >= 0.0) || !std::isfinite(k1)) {
        throw ConfigError("k1 must be non-negative");
    }
    if (!(b >= 0.0 && b <= 1.0)) {
        throw ConfigError("b must lie in [0, 1]");
    }
}

CorpusStats CorpusStats::build(std::span<const Document> docs, const NormalizationRules& rules) {
    std::vector<std::pair<std::string, std::vector<std::string>>> tokenized;
    tokenized.reserve(docs.size());
    for (const auto& d : docs) {
        tokenized.emplace_back(d.id, tokenize(normalize(d.text, rules)));
    }
    return from_tokens(std::move(tokenized));
}

CorpusStats CorpusStats::from_tokens(std::vector<std::pair<std::string, std::vector<std::string>>> docs) {
    CorpusStats stats;
    std::size_t total = 0;
    for (auto& [id, tokens] : docs) {
        if (!stats.by_id_.emplace(id, stats.ids_.size()).second) {
            throw ValidationError("duplicate document id '" + id + "'");
        }
        std::unordered_map<std::string, std::size_t> counts;
        for (auto& t : tokens) {
            ++counts[t];
        }
        for (const auto& [term, _] : counts) {
            ++stats.doc_freq_[term];
        }
        stats.ids_.push_back(std::move(id));
        stats.lengths_.push_back(tokens.size());
        stats.term_counts_.push_back(std::move(counts));
        total += tokens.size();
    }
    if (!stats.ids_.empty()) {
        stats.avg_length_ = static_cast<double>(total) / static_cast<double>(stats.ids_.size());
    }
    return stats;
}

std::size_t CorpusStats::doc_freq(const std::string& term) const {
    const auto it = doc_freq_.find(term);
    return it == doc_freq_.end() ? 0 : it->second;
}

std::size_t CorpusStats::term_freq(std::size_t doc, const std::string& term) const {
    const auto& counts = term_counts_.at(doc);
    const auto it = counts.find(term);
    return it == counts.end() ? 0 : it->second;
}

std::size_t CorpusStats::ordinal(std::string_view doc_id) const {
    const auto it = by_id_.find(std::string(doc_id));
    if (it == by_id_.end()) {
        throw ValidationError("unknown document id '" + std::string(doc_id) + "'");
    }
    return it->second;
}

double CorpusStats::idf(const std::string& term) const {
    const auto n = static_cast<double>(doc_freq(term));
    const auto total = static_cast<double>(doc_count());
    return std::log1p((total - n + 0.5) / (n + 0.5));
}

double bm25_score(std::span<const std::string> query_terms, std::string_view doc_id, const CorpusStats& stats,
                  const Params& params) {
    params.validate();
    const auto doc = stats.ordinal(doc_id);
    const auto len = static_cast<double>(stats.length(doc));
    // An empty corpus average can only occur when every document is empty; no term can match then.
    const double norm = stats.avg_length() > 0.0 ? len / stats.avg_length() : 1.0;
    double score = 0.0;
    for (const auto& term : query_terms) {
        const auto tf = static_cast<double>(stats.term_freq(doc, term));
        if (tf == 0.0) {
            continue;
        }
        score += stats.idf(term) * tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * norm));
    }
    return score;
}

std::vector<ScoredDoc> bm25_rank(std::string_view query, const CorpusStats& stats, const NormalizationRules& rules,
                                 const Params& params, std::span<const std::string> restrict_to) {
    if (stats.doc_count() == 0) {
        throw ValidationError("BM25 ranking needs a non-empty corpus");
    }
    params.validate();
    const auto terms = tokenize(normalize(query, rules));
    std::vector<ScoredDoc> out;
    if (restrict_to.empty()) {
        out.reserve(stats.doc_count());
        for (std::size_t d = 0; d < stats.doc_count(); ++d) {
            out.push_back({stats.id(d), bm25_score(terms, stats.id(d), stats, params)});
        }
    } else {
        for (const auto& id : restrict_to) {
            out.push_back({id, bm25_score(terms, id, stats, params)});
        }
    }
    std::sort(out.begin(), out.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
        return a.score != b.score ? a.score > b.score : a.id < b.id;
    });
    return out;
}

std::vector<Document> read_corpus_jsonl(std::istream& in) {
    std::vector<Document> docs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            const auto obj = nlohmann::json::parse(line);
            Document d;
            d.id = obj.at("id").get<std::string>();
            d.source = obj.contains("source") ? parse_source_tag(obj.at("source").get<std::string>())
                                              : SourceTag::other;
            d.text = obj.at("text").get<std::string>();
            docs.push_back(std::move(d));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("corpus line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return docs;
}

}  // namespace hybridrank::bm25
