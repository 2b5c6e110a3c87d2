#include "hybridrank/explain.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>

#include "hybridrank/error.hpp"
#include "hybridrank/scoring.hpp"

namespace hybridrank::explain {

namespace {

std::string lowered(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::set<std::string> surface_set(const HybridEntry& e) {
    std::set<std::string> out;
    if (e.surface_tokens) {
        for (const auto& t : *e.surface_tokens) {
            out.insert(lowered(t));
        }
    }
    return out;
}

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string html_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&#39;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string expansion_label(const MatchRecord& r) {
    if (r.expansion_in_query && r.expansion_in_candidate) {
        return "expansion: both";
    }
    if (r.expansion_in_query) {
        return "expansion: query";
    }
    if (r.expansion_in_candidate) {
        return "expansion: candidate";
    }
    return "surface match";
}

double max_contribution(const MatchReport& report) {
    double best = 0.0;
    for (const auto& r : report.records) {
        best = std::max(best, r.contribution);
    }
    return best;
}

std::string render_text(const MatchReport& report) {
    std::string out = "query " + report.query_id + " vs candidate " + report.candidate_id + "\n";
    out += "lexical " + fixed6(report.totals.lexical_score) + "  dense " + fixed6(report.totals.dense_score) +
           "  combined " + fixed6(report.totals.combined) + "  (alpha " + fixed6(report.alpha) + ")\n";
    if (report.records.empty()) {
        out += "no lexical overlap\n";
        return out;
    }
    const double top = max_contribution(report);
    for (const auto& r : report.records) {
        const int level = intensity_bucket(r.contribution, top);
        out += "[" + std::string(static_cast<std::size_t>(level), '#') + std::string(5 - static_cast<std::size_t>(level), '.') +
               "] " + r.token + "  q=" + fixed6(r.q_weight) + " c=" + fixed6(r.c_weight) +
               " contribution=" + fixed6(r.contribution) + "  (" + expansion_label(r) + ")\n";
    }
    return out;
}

std::string render_html(const MatchReport& report) {
    std::string out =
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>match report</title>\n</head>\n"
        "<body style=\"font-family: sans-serif;\">\n";
    out += "<h1>" + html_escape(report.query_id) + " &rarr; " + html_escape(report.candidate_id) + "</h1>\n";
    out += "<p>lexical " + fixed6(report.totals.lexical_score) + ", dense " + fixed6(report.totals.dense_score) +
           ", combined " + fixed6(report.totals.combined) + " (alpha " + fixed6(report.alpha) + ")</p>\n";
    if (report.records.empty()) {
        out += "<p>no lexical overlap</p>\n</body>\n</html>\n";
        return out;
    }
    const double top = max_contribution(report);
    out += "<p>\n";
    for (const auto& r : report.records) {
        const int level = intensity_bucket(r.contribution, top);
        char opacity[16];
        std::snprintf(opacity, sizeof opacity, "%.1f", level / 5.0);
        out += "<span title=\"contribution " + fixed6(r.contribution) + ", " + expansion_label(r) +
               "\" style=\"background-color: rgba(255, 165, 0, " + opacity + "); padding: 2px 4px; margin: 2px;";
        if (r.expansion_in_query || r.expansion_in_candidate) {
            out += " font-style: italic;";
        }
        out += "\">" + html_escape(r.token) + "</span>\n";
    }
    out += "</p>\n</body>\n</html>\n";
    return out;
}

}  // namespace

MatchReport match_report(const HybridEntry& query, const HybridEntry& candidate, const Vocabulary& vocab,
                         double alpha) {
    const auto totals = scoring::hybrid_score(query.dense, query.sparse, candidate.dense, candidate.sparse, alpha);
    const auto q_surface = surface_set(query);
    const auto c_surface = surface_set(candidate);

    MatchReport report;
    report.query_id = query.id;
    report.candidate_id = candidate.id;
    report.alpha = alpha;
    report.totals = {totals.lexical, totals.dense, totals.combined};

    auto qi = query.sparse.entries.begin();
    auto ci = candidate.sparse.entries.begin();
    while (qi != query.sparse.entries.end() && ci != candidate.sparse.entries.end()) {
        if (qi->token < ci->token) {
            ++qi;
            continue;
        }
        if (ci->token < qi->token) {
            ++ci;
            continue;
        }
        const auto it = vocab.find(qi->token);
        if (it == vocab.end()) {
            throw ValidationError("vocabulary has no entry for token id " + std::to_string(qi->token));
        }
        MatchRecord r;
        r.token_id = qi->token;
        r.token = it->second;
        r.q_weight = qi->weight;
        r.c_weight = ci->weight;
        r.contribution = r.q_weight * r.c_weight;
        const auto key = lowered(r.token);
        r.expansion_in_query = !q_surface.contains(key);
        r.expansion_in_candidate = !c_surface.contains(key);
        report.records.push_back(std::move(r));
        ++qi;
        ++ci;
    }
    std::stable_sort(report.records.begin(), report.records.end(), [](const MatchRecord& a, const MatchRecord& b) {
        return a.contribution > b.contribution;
    });
    return report;
}

Format parse_format(std::string_view name) {
    if (name == "text") {
        return Format::text;
    }
    if (name == "json") {
        return Format::json;
    }
    if (name == "html") {
        return Format::html;
    }
    throw ConfigError("report format must be text, json or html");
}

int intensity_bucket(double contribution, double max_contribution) noexcept {
    if (!(max_contribution > 0.0)) {
        return 1;
    }
    const double ratio = std::clamp(contribution / max_contribution, 0.0, 1.0);
    return std::clamp(static_cast<int>(std::ceil(ratio * 5.0 - 1e-12)), 1, 5);
}

nlohmann::ordered_json to_json(const MatchReport& report) {
    nlohmann::ordered_json out;
    out["query_id"] = report.query_id;
    out["candidate_id"] = report.candidate_id;
    out["alpha"] = report.alpha;
    out["totals"] = {{"lexical_score", report.totals.lexical_score},
                     {"dense_score", report.totals.dense_score},
                     {"combined", report.totals.combined}};
    auto records = nlohmann::ordered_json::array();
    for (const auto& r : report.records) {
        records.push_back({{"token_id", r.token_id},
                           {"token", r.token},
                           {"q_weight", r.q_weight},
                           {"c_weight", r.c_weight},
                           {"contribution", r.contribution},
                           {"expansion_in_query", r.expansion_in_query},
                           {"expansion_in_candidate", r.expansion_in_candidate}});
    }
    out["records"] = std::move(records);
    if (report.records.empty()) {
        out["note"] = "no lexical overlap";
    }
    return out;
}

MatchReport from_json(const nlohmann::json& doc) {
    try {
        MatchReport report;
        report.query_id = doc.at("query_id").get<std::string>();
        report.candidate_id = doc.at("candidate_id").get<std::string>();
        report.alpha = doc.at("alpha").get<double>();
        const auto& t = doc.at("totals");
        report.totals = {t.at("lexical_score").get<double>(), t.at("dense_score").get<double>(),
                         t.at("combined").get<double>()};
        for (const auto& r : doc.at("records")) {
            report.records.push_back({r.at("token_id").get<TokenId>(), r.at("token").get<std::string>(),
                                      r.at("q_weight").get<double>(), r.at("c_weight").get<double>(),
                                      r.at("contribution").get<double>(), r.at("expansion_in_query").get<bool>(),
                                      r.at("expansion_in_candidate").get<bool>()});
        }
        return report;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("match report: ") + e.what());
    }
}

std::string render(const MatchReport& report, Format format) {
    switch (format) {
        case Format::text: return render_text(report);
        case Format::json: return to_json(report).dump(2) + "\n";
        case Format::html: return render_html(report);
    }
    return {};
}

}  // namespace hybridrank::explain
