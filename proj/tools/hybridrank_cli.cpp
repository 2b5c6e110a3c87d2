// hybridrank command-line entry point: encode, index, rank, eval, sweep,
// explain, resources, bm25, priors, loss.
//
// Exit codes: 0 success, 2 validation/config error, 3 I/O or format error.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "hybridrank/bm25.hpp"
#include "hybridrank/error.hpp"
#include "hybridrank/eval.hpp"
#include "hybridrank/explain.hpp"
#include "hybridrank/index.hpp"
#include "hybridrank/interchange.hpp"
#include "hybridrank/losses.hpp"
#include "hybridrank/repr.hpp"
#include "hybridrank/resources.hpp"
#include "hybridrank/scoring.hpp"
#include "run_support.hpp"

namespace fs = std::filesystem;
namespace io = hybridrank::interchange;
using hybridrank::cli::RunManifest;
using json = nlohmann::ordered_json;

namespace hybridrank {
namespace {

constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;

// Worker count: HYBRIDRANK_THREADS if set, else hardware concurrency.
std::size_t worker_count(std::size_t jobs) {
    std::size_t n = std::max(1U, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("HYBRIDRANK_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v < 1) throw std::invalid_argument("nonpositive");
            n = static_cast<std::size_t>(v);
        } catch (const std::exception&) {
            throw ConfigError(std::string("HYBRIDRANK_THREADS must be a positive integer, got '") + env + "'");
        }
    }
    return std::max<std::size_t>(1, std::min(n, jobs));
}

// Runs fn(i) for i in [0, n) across workers; the first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, Fn fn) {
    const std::size_t workers = worker_count(n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

void emit(const std::string& output, const std::string& bytes, RunManifest& manifest) {
    if (output.empty() || output == "-") {
        std::cout << bytes;
        return;
    }
    cli::write_atomic(output, bytes);
    manifest.add_output(output);
    manifest.write_beside(output);
}

scoring::SourcePriors read_priors(const fs::path& path) {
    const auto text = io::read_text_file(path);
    scoring::SourcePriors priors;
    try {
        const auto doc = nlohmann::json::parse(text);
        const auto& obj = doc.contains("priors") ? doc.at("priors") : doc;
        for (const auto& [key, value] : obj.items()) priors[parse_source_tag(key)] = value.get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("priors '" + path.string() + "': " + e.what());
    }
    return priors;
}

json priors_to_json(const std::map<SourceTag, double>& priors) {
    json out = json::object();
    for (const auto& [tag, value] : priors) out[std::string(to_string(tag))] = value;
    return out;
}

scoring::Normalization parse_normalization(const std::string& name) {
    if (name == "none") return scoring::Normalization::none;
    if (name == "min_max" || name == "min_max_per_query") return scoring::Normalization::min_max_per_query;
    throw ConfigError("unknown normalization '" + name + "' (expected none or min_max)");
}

// "0:1:0.1" (inclusive range) or "0,0.5,1"; values rounded to 1e-9 and deduplicated.
std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> out;
    auto number = [&](const std::string& s) {
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("bad grid value '" + s + "'");
        }
    };
    auto round9 = [](double v) { return std::round(v * 1e9) / 1e9; };
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
        if (parts.size() != 3) throw ConfigError("grid range must be start:stop:step, got '" + text + "'");
        const double start = number(parts[0]), stop = number(parts[1]), step = number(parts[2]);
        if (!(step > 0.0)) throw ConfigError("grid step must be positive");
        for (std::size_t i = 0;; ++i) {
            const double v = round9(start + static_cast<double>(i) * step);
            if (v > stop + 1e-9) break;
            out.push_back(v);
        }
    } else {
        std::stringstream ss(text);
        for (std::string p; std::getline(ss, p, ',');)
            if (!p.empty()) out.push_back(round9(number(p)));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    if (out.empty()) throw ConfigError("empty alpha grid");
    return out;
}

index::QueryFilter filter_for(const io::RepLine& line) {
    index::QueryFilter f;
    f.candidate_ids = line.candidates;
    return f;
}

// Ranks every query line against the index; rows are returned in input order.
std::vector<std::vector<scoring::ScoredCandidate>> rank_all(const index::HybridIndex& idx,
                                                            const std::vector<io::RepLine>& queries,
                                                            const scoring::ScoringConfig& cfg, std::size_t top_n) {
    cfg.validate();
    std::set<std::string> seen;
    for (const auto& q : queries)
        if (!seen.insert(q.entry.id).second) throw ValidationError("duplicate query id '" + q.entry.id + "'");
    std::vector<std::vector<scoring::ScoredCandidate>> out(queries.size());
    parallel_for(queries.size(), [&](std::size_t i) { out[i] = idx.query(queries[i].entry, cfg, top_n, filter_for(queries[i])); });
    return out;
}

eval::RankedRun to_run(const std::vector<io::RepLine>& queries,
                       const std::vector<std::vector<scoring::ScoredCandidate>>& ranked) {
    eval::RankedRun run;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        auto& rows = run.queries[queries[i].entry.id];
        for (const auto& c : ranked[i]) rows.push_back({c.candidate_id, c.combined});
    }
    return run;
}

std::map<std::string, SourceTag> sources_of(const index::HybridIndex& idx) {
    std::map<std::string, SourceTag> out;
    for (const auto& e : idx.entries()) out[e.id] = e.source;
    return out;
}

eval::Qrels load_qrels(const fs::path& path) {
    std::istringstream in(io::read_text_file(path));
    return eval::Qrels::read_trec(in);
}

eval::RankedRun load_run(const fs::path& path) {
    std::istringstream in(io::read_text_file(path));
    return eval::RankedRun::read_trec(in);
}

// ---------------------------------------------------------------- encode

struct EncodeArgs {
    std::string logits, manifest, dense, output;
    std::uint32_t k = 128;
    std::string aggregation = "max";
};

void cmd_encode(const EncodeArgs& a) {
    const repr::EncodeConfig cfg{a.k, repr::parse_aggregation(a.aggregation)};
    cfg.validate();
    const auto matrices = io::read_logits(fs::path(a.logits));
    const auto items = io::read_manifest(a.manifest);
    const auto dense = io::read_dense(fs::path(a.dense));
    if (matrices.size() != items.size() || dense.size() != items.size()) {
        throw ValidationError("item count mismatch: " + std::to_string(matrices.size()) + " logit matrices, " +
                              std::to_string(items.size()) + " manifest items, " + std::to_string(dense.size()) +
                              " dense vectors");
    }
    std::vector<std::string> lines(items.size());
    parallel_for(items.size(), [&](std::size_t i) {
        HybridEntry e{items[i].id, items[i].source, dense[i], repr::encode(matrices[i], cfg), items[i].surface_tokens};
        std::ostringstream line;
        io::write_rep(line, e);
        lines[i] = line.str();
    });
    std::string out;
    for (const auto& l : lines) out += l;

    RunManifest m("encode");
    m.set("k", a.k);
    m.set("aggregation", a.aggregation);
    m.add_input("logits", a.logits);
    m.add_input("manifest", a.manifest);
    m.add_input("dense", a.dense);
    emit(a.output, out, m);
}

// ---------------------------------------------------------------- index

struct IndexArgs {
    std::string reps, output;
    std::uint32_t k = 0;
    std::uint32_t vocab_size = 0;
};

void cmd_index(const IndexArgs& a) {
    if (a.output.empty() || a.output == "-") throw ConfigError("index needs an output file");
    std::vector<HybridEntry> entries;
    for (auto& line : io::read_reps(fs::path(a.reps))) {
        if (a.k > 0) line.entry.sparse = repr::truncate(line.entry.sparse, a.k);
        entries.push_back(std::move(line.entry));
    }
    json config = {{"reps", a.reps}, {"k", a.k}, {"vocab_size", a.vocab_size}};
    index::IndexMetadata meta;
    meta.k = a.k;
    meta.vocab_size = a.vocab_size;
    meta.creation_config = config.dump();
    const auto idx = index::HybridIndex::build(std::move(entries), meta);

    RunManifest m("index");
    m.set("k", a.k);
    m.set("vocab_size", idx.metadata().vocab_size);
    m.set("entries", idx.size());
    m.add_input("reps", a.reps);
    emit(a.output, idx.serialize(), m);
}

// ---------------------------------------------------------------- rank

struct RankArgs {
    std::string index, queries, output, priors, normalization = "none", tag = "hybrid";
    double alpha = 0.5;
    std::size_t top_n = 100;
};

void cmd_rank(const RankArgs& a) {
    scoring::ScoringConfig cfg;
    cfg.alpha = a.alpha;
    cfg.normalization = parse_normalization(a.normalization);
    if (!a.priors.empty()) {
        cfg.source_priors = read_priors(a.priors);
        cfg.normalization = scoring::Normalization::min_max_per_query;
    }
    if (a.top_n == 0) throw ConfigError("--top-n must be positive");
    const auto idx = index::HybridIndex::load(a.index);
    const auto queries = io::read_reps(fs::path(a.queries));
    const auto ranked = rank_all(idx, queries, cfg, a.top_n);
    std::ostringstream out;
    for (std::size_t i = 0; i < queries.size(); ++i) scoring::write_trec(out, queries[i].entry.id, ranked[i], a.tag);

    RunManifest m("rank");
    m.set("alpha", a.alpha);
    m.set("top_n", a.top_n);
    m.set("normalization", cfg.normalization == scoring::Normalization::none ? "none" : "min_max_per_query");
    m.set("source_priors", cfg.source_priors ? priors_to_json(*cfg.source_priors) : json(nullptr));
    m.set("trec_tag", a.tag);
    m.add_input("index", a.index);
    m.add_input("queries", a.queries);
    if (!a.priors.empty()) m.add_input("priors", a.priors);
    emit(a.output, out.str(), m);
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    std::string run, qrels, baseline, index, output;
    std::size_t iterations = 10000;
    std::uint64_t seed = 42;
    bool per_query = false;
};

json significance_block(const eval::MetricReport& a, const eval::MetricReport& b, std::size_t iterations,
                        std::uint64_t seed) {
    std::vector<std::string> shared;
    for (const auto& [qid, _] : a.per_query)
        if (b.per_query.contains(qid)) shared.push_back(qid);
    if (shared.size() < 2) throw ValidationError("significance testing needs at least 2 queries shared by both runs");
    json out;
    out["queries"] = shared.size();
    out["iterations"] = iterations;
    out["seed"] = seed;
    json metrics = json::object();
    for (std::size_t mi = 0; mi < eval::kMetricCount; ++mi) {
        std::vector<double> xa, xb;
        for (const auto& qid : shared) {
            xa.push_back(eval::metric_value(a.per_query.at(qid), mi));
            xb.push_back(eval::metric_value(b.per_query.at(qid), mi));
        }
        const auto t = eval::paired_t_test(xa, xb);
        metrics[eval::metric_names()[mi]] = {
            {"fisher_p", eval::fisher_randomization(xa, xb, iterations, seed)},
            {"t_statistic", t.t_statistic},
            {"t_test_p", t.p_value},
            {"t_test_degenerate", t.degenerate}};
    }
    out["metrics"] = std::move(metrics);
    return out;
}

void cmd_eval(const EvalArgs& a) {
    const auto qrels = load_qrels(a.qrels);
    const auto run = load_run(a.run);
    auto report = eval::evaluate(run, qrels);
    std::map<std::string, SourceTag> sources;
    if (!a.index.empty()) {
        sources = sources_of(index::HybridIndex::load(a.index));
        eval::add_source_breakdown(report, run, qrels, sources);
    }
    json out = report.to_json(a.per_query);
    RunManifest m("eval");
    if (!a.baseline.empty()) {
        const auto base_run = load_run(a.baseline);
        auto base = eval::evaluate(base_run, qrels);
        if (!a.index.empty()) eval::add_source_breakdown(base, base_run, qrels, sources);
        out["baseline"] = base.to_json(false);
        out["significance"] = significance_block(report, base, a.iterations, a.seed);
        m.add_input("baseline_run", a.baseline);
        m.set("iterations", a.iterations);
        m.set_seed(a.seed);
    }
    m.add_input("run", a.run);
    m.add_input("qrels", a.qrels);
    if (!a.index.empty()) m.add_input("index", a.index);
    m.set("per_query", a.per_query);
    emit(a.output, out.dump(2) + "\n", m);
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
    std::string index, queries, qrels, priors, output;
    std::string grid = "0:1:0.1";
    std::string k_list = "128,256,512";
    std::size_t top_n = 1000;
};

std::vector<std::uint32_t> parse_k_list(const std::string& text) {
    std::vector<std::uint32_t> out;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ',');) {
        if (p.empty()) continue;
        try {
            const long v = std::stol(p);
            if (v < 1) throw std::out_of_range(p);
            out.push_back(static_cast<std::uint32_t>(v));
        } catch (const std::exception&) {
            throw ConfigError("bad k value '" + p + "'");
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    if (out.empty()) throw ConfigError("empty k list");
    return out;
}

std::string csv_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

void cmd_sweep(const SweepArgs& a) {
    const auto grid = parse_grid(a.grid);
    const auto ks = parse_k_list(a.k_list);
    std::optional<scoring::SourcePriors> priors;
    if (!a.priors.empty()) priors = read_priors(a.priors);
    const auto base = index::HybridIndex::load(a.index);
    const auto base_queries = io::read_reps(fs::path(a.queries));
    const auto qrels = load_qrels(a.qrels);

    std::string csv = "alpha,k,mode";
    for (const char* name : eval::metric_names()) csv += std::string(",") + name;
    csv += "\n";
    for (const auto k : ks) {
        std::vector<HybridEntry> entries(base.entries().begin(), base.entries().end());
        for (auto& e : entries) e.sparse = repr::truncate(e.sparse, k);
        auto meta = base.metadata();
        meta.k = k;
        const auto idx = index::HybridIndex::build(std::move(entries), meta);
        auto queries = base_queries;
        for (auto& q : queries) q.entry.sparse = repr::truncate(q.entry.sparse, k);

        for (const double alpha : grid) {
            std::vector<std::pair<std::string, scoring::ScoringConfig>> modes = {
                {"raw", {alpha, std::nullopt, scoring::Normalization::none}}};
            if (priors) modes.push_back({"source_scaled", {alpha, priors, scoring::Normalization::min_max_per_query}});
            for (const auto& [mode, cfg] : modes) {
                const auto report = eval::evaluate(to_run(queries, rank_all(idx, queries, cfg, a.top_n)), qrels);
                csv += csv_number(alpha) + "," + std::to_string(k) + "," + mode;
                for (std::size_t mi = 0; mi < eval::kMetricCount; ++mi)
                    csv += "," + csv_number(eval::metric_value(report.mean, mi));
                csv += "\n";
            }
        }
    }
    RunManifest m("sweep");
    m.set("grid", grid);
    m.set("k_list", ks);
    m.set("top_n", a.top_n);
    m.set("source_priors", priors ? priors_to_json(*priors) : json(nullptr));
    m.add_input("index", a.index);
    m.add_input("queries", a.queries);
    m.add_input("qrels", a.qrels);
    if (!a.priors.empty()) m.add_input("priors", a.priors);
    emit(a.output, csv, m);
}

// ---------------------------------------------------------------- explain

struct ExplainArgs {
    std::string index, queries, vocab, query_id, candidate_id, format = "text", output;
    double alpha = 0.5;
};

void cmd_explain(const ExplainArgs& a) {
    const auto format = explain::parse_format(a.format);
    const auto idx = index::HybridIndex::load(a.index);
    const auto vocab = io::read_vocab(a.vocab);
    const auto queries = io::read_reps(fs::path(a.queries));
    const auto q = std::find_if(queries.begin(), queries.end(), [&](const auto& l) { return l.entry.id == a.query_id; });
    if (q == queries.end()) throw ValidationError("query '" + a.query_id + "' not found in " + a.queries);
    const auto c = idx.find(a.candidate_id);
    if (!c) throw ValidationError("candidate '" + a.candidate_id + "' not found in index");
    const auto report = explain::match_report(q->entry, idx.entries()[*c], vocab, a.alpha);

    RunManifest m("explain");
    m.set("query_id", a.query_id);
    m.set("candidate_id", a.candidate_id);
    m.set("alpha", a.alpha);
    m.set("format", a.format);
    m.add_input("index", a.index);
    m.add_input("queries", a.queries);
    m.add_input("vocab", a.vocab);
    emit(a.output, explain::render(report, format), m);
}

// ---------------------------------------------------------------- resources

struct ResourcesArgs {
    std::uint64_t h = 768, n = 128, k = 128;
    std::string format = "json", index, queries, output;
    std::size_t repetitions = 3;
    double alpha = 0.5;
};

void cmd_resources(const ResourcesArgs& a) {
    resources::CostModelParams{a.h, a.n, a.k, resources::Scheme::hybrid}.validate();
    auto table = resources::cost_table(a.h, a.n, a.k);
    RunManifest m("resources");
    m.set("h", a.h);
    m.set("n", a.n);
    m.set("k", a.k);
    if (!a.index.empty()) {
        if (a.queries.empty()) throw ConfigError("latency measurement needs --queries alongside --index");
        const auto idx = index::HybridIndex::load(a.index);
        std::vector<HybridEntry> queries;
        for (auto& l : io::read_reps(fs::path(a.queries))) queries.push_back(std::move(l.entry));
        const auto lat = resources::measure_latency(idx, queries, {a.alpha, std::nullopt, scoring::Normalization::none},
                                                    a.repetitions);
        table["latency"] = {{"per_query_ms", lat.per_query_ms},
                            {"per_candidate_ms", lat.per_candidate_ms ? json(*lat.per_candidate_ms) : json(nullptr)},
                            {"candidates_per_query", lat.candidates_per_query},
                            {"repetitions", lat.repetitions},
                            {"repetition_ms", lat.repetition_ms}};
        m.add_input("index", a.index);
        m.add_input("queries", a.queries);
        m.set("repetitions", a.repetitions);
    }
    std::string out;
    if (a.format == "json") {
        out = table.dump(2) + "\n";
    } else if (a.format == "csv") {
        out = "scheme,interaction_formula,interaction_flops,storage_formula,storage_scalars\n";
        for (const auto& row : table.at("schemes")) {
            auto cell = [&](const char* key) {
                const auto& v = row.at(key);
                return v.is_null() ? std::string("-") : v.is_string() ? v.get<std::string>() : v.dump();
            };
            out += cell("scheme") + "," + cell("interaction_formula") + "," + cell("interaction_flops") + "," +
                   cell("storage_formula") + "," + cell("storage_scalars") + "\n";
        }
    } else {
        throw ConfigError("unknown format '" + a.format + "' (expected json or csv)");
    }
    m.set("format", a.format);
    emit(a.output, out, m);
}

// ---------------------------------------------------------------- bm25

struct Bm25Args {
    std::string corpus, queries, output, tag = "bm25";
    double k1 = 1.5, b = 0.75;
    std::size_t top_n = 100;
    bool lowercase = false;
};

void cmd_bm25(const Bm25Args& a) {
    const bm25::Params params{a.k1, a.b};
    params.validate();
    bm25::NormalizationRules rules;
    rules.lowercase = a.lowercase;
    std::istringstream corpus_in(io::read_text_file(a.corpus));
    const auto docs = bm25::read_corpus_jsonl(corpus_in);
    const auto stats = bm25::CorpusStats::build(docs, rules);

    struct Query {
        std::string id, text;
        std::vector<std::string> candidates;
    };
    std::vector<Query> queries;
    std::istringstream qin(io::read_text_file(a.queries));
    std::size_t line_no = 0;
    for (std::string line; std::getline(qin, line);) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto obj = nlohmann::json::parse(line);
            Query q{obj.at("id").get<std::string>(), obj.at("text").get<std::string>(), {}};
            if (obj.contains("candidates")) q.candidates = obj.at("candidates").get<std::vector<std::string>>();
            queries.push_back(std::move(q));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("query line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    std::vector<std::vector<bm25::ScoredDoc>> ranked(queries.size());
    parallel_for(queries.size(), [&](std::size_t i) {
        ranked[i] = bm25::bm25_rank(queries[i].text, stats, rules, params, queries[i].candidates);
    });
    std::ostringstream out;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        std::vector<scoring::ScoredCandidate> rows;
        for (std::size_t r = 0; r < ranked[i].size() && r < a.top_n; ++r)
            rows.push_back({ranked[i][r].id, 0.0, ranked[i][r].score, ranked[i][r].score, SourceTag::other});
        scoring::write_trec(out, queries[i].id, rows, a.tag);
    }
    RunManifest m("bm25");
    m.set("k1", a.k1);
    m.set("b", a.b);
    m.set("top_n", a.top_n);
    m.set("lowercase", a.lowercase);
    m.set("trec_tag", a.tag);
    m.add_input("corpus", a.corpus);
    m.add_input("queries", a.queries);
    emit(a.output, out.str(), m);
}

// ---------------------------------------------------------------- priors

struct PriorsArgs {
    std::string run, qrels, index, output;
    double floor = 1e-3;
};

void cmd_priors(const PriorsArgs& a) {
    const auto run = load_run(a.run);
    const auto qrels = load_qrels(a.qrels);
    const auto priors = eval::source_priors(run, qrels, sources_of(index::HybridIndex::load(a.index)), a.floor);
    RunManifest m("priors");
    m.set("floor", a.floor);
    m.add_input("run", a.run);
    m.add_input("qrels", a.qrels);
    m.add_input("index", a.index);
    emit(a.output, json{{"priors", priors_to_json(priors)}}.dump(2) + "\n", m);
}

// ---------------------------------------------------------------- loss

struct LossArgs {
    std::string instances, output;
    losses::LossConfig cfg;
    std::size_t vocab_size = 0;
};

void cmd_loss(const LossArgs& a) {
    a.cfg.validate();
    std::istringstream in(io::read_text_file(a.instances));
    const auto batch = losses::read_training_jsonl(in);
    if (batch.empty()) throw ValidationError("no training instances in " + a.instances);

    double dense = 0.0, lexical = 0.0;
    std::vector<SparseRep> q_sparse, c_sparse;
    TokenId max_token = 0;
    auto track = [&](const SparseRep& s) {
        if (!s.entries.empty()) max_token = std::max(max_token, s.entries.back().token);
    };
    json per_instance = json::array();
    for (const auto& inst : batch) {
        const auto l = losses::instance_loss(inst, a.cfg);
        dense += l.dense;
        lexical += l.lexical;
        per_instance.push_back({{"dense", l.dense}, {"lexical", l.lexical}});
        q_sparse.push_back(inst.query.sparse);
        c_sparse.push_back(inst.positive.sparse);
        track(inst.query.sparse);
        track(inst.positive.sparse);
        for (const auto& n : inst.negatives) {
            c_sparse.push_back(n.sparse);
            track(n.sparse);
        }
    }
    const std::size_t vocab = a.vocab_size > 0 ? a.vocab_size : static_cast<std::size_t>(max_token) + 1;
    const double n = static_cast<double>(batch.size());
    const double reg_q = losses::flops_reg(q_sparse, vocab);
    const double reg_c = losses::flops_reg(c_sparse, vocab);
    json out;
    out["instances"] = batch.size();
    out["dense_rank_loss"] = dense / n;
    out["lexical_rank_loss"] = lexical / n;
    out["flops_reg_query"] = reg_q;
    out["flops_reg_candidate"] = reg_c;
    out["total"] = losses::total_loss(dense / n, lexical / n, reg_q, reg_c, a.cfg);
    out["per_instance"] = std::move(per_instance);

    RunManifest m("loss");
    m.set("tau", a.cfg.tau);
    m.set("lambda_q", a.cfg.lambda_q);
    m.set("lambda_c", a.cfg.lambda_c);
    m.set("vocab_size", vocab);
    m.add_input("instances", a.instances);
    emit(a.output, out.dump(2) + "\n", m);
}

}  // namespace
}  // namespace hybridrank

int main(int argc, char** argv) {
    using namespace hybridrank;
    CLI::App app{"hybridrank: hybrid sparse-dense ranking engine"};
    app.set_version_flag("--version", HYBRIDRANK_VERSION);
    app.require_subcommand(1);

    EncodeArgs enc;
    auto* s_enc = app.add_subcommand("encode", "Turn logit matrices into hybrid representations (JSONL)");
    s_enc->add_option("--logits", enc.logits, "HLGT logit file")->required();
    s_enc->add_option("--manifest", enc.manifest, "JSON item manifest")->required();
    s_enc->add_option("--dense-file", enc.dense, "Dense vector file (same order)")->required();
    s_enc->add_option("--k", enc.k, "Top-k sparse tokens")->capture_default_str();
    s_enc->add_option("--aggregation", enc.aggregation, "max or sum")->capture_default_str();
    s_enc->add_option("-o,--output", enc.output, "Output JSONL (default stdout)");

    IndexArgs idx;
    auto* s_idx = app.add_subcommand("index", "Build a hybrid index from representation JSONL");
    s_idx->add_option("--reps", idx.reps, "Representation JSONL")->required();
    s_idx->add_option("--k", idx.k, "Truncate sparse reps to k tokens (0 keeps all)")->capture_default_str();
    s_idx->add_option("--vocab-size", idx.vocab_size, "Vocabulary size (0 infers)")->capture_default_str();
    s_idx->add_option("-o,--output", idx.output, "Index file")->required();

    RankArgs rk;
    auto* s_rank = app.add_subcommand("rank", "Rank candidates for each query into a TREC run");
    s_rank->add_option("--index", rk.index, "Index file")->required();
    s_rank->add_option("--queries", rk.queries, "Query representation JSONL")->required();
    s_rank->add_option("--alpha", rk.alpha, "Dense weight in [0, 1]")->capture_default_str();
    s_rank->add_option("--top-n", rk.top_n, "Candidates kept per query")->capture_default_str();
    s_rank->add_option("--source-priors", rk.priors, "JSON priors per source (enables source-aware rescaling)");
    s_rank->add_option("--normalization", rk.normalization, "none or min_max")->capture_default_str();
    s_rank->add_option("--trec-tag", rk.tag, "Run tag column")->capture_default_str();
    s_rank->add_option("-o,--output", rk.output, "TREC run file (default stdout)");

    EvalArgs ev;
    auto* s_eval = app.add_subcommand("eval", "Score a TREC run against qrels");
    s_eval->add_option("--run", ev.run, "TREC run")->required();
    s_eval->add_option("--qrels", ev.qrels, "TREC qrels")->required();
    s_eval->add_option("--baseline-run", ev.baseline, "Second run for significance testing");
    s_eval->add_option("--index", ev.index, "Index supplying candidate sources for the per-source breakdown");
    s_eval->add_option("--iterations", ev.iterations, "Randomization test iterations")->capture_default_str();
    s_eval->add_option("--seed", ev.seed, "Randomization test seed")->capture_default_str();
    s_eval->add_flag("--per-query", ev.per_query, "Include per-query metrics");
    s_eval->add_option("-o,--output", ev.output, "Report JSON (default stdout)");

    SweepArgs sw;
    auto* s_sweep = app.add_subcommand("sweep", "Evaluate a grid of alpha and k values");
    s_sweep->add_option("--index", sw.index, "Index file")->required();
    s_sweep->add_option("--queries", sw.queries, "Query representation JSONL")->required();
    s_sweep->add_option("--qrels", sw.qrels, "TREC qrels")->required();
    s_sweep->add_option("--grid", sw.grid, "start:stop:step or comma list")->capture_default_str();
    s_sweep->add_option("--k-list", sw.k_list, "Comma list of sparse budgets")->capture_default_str();
    s_sweep->add_option("--priors", sw.priors, "JSON priors; adds source_scaled rows");
    s_sweep->add_option("--top-n", sw.top_n, "Candidates kept per query")->capture_default_str();
    s_sweep->add_option("-o,--output", sw.output, "CSV (default stdout)");

    ExplainArgs ex;
    auto* s_ex = app.add_subcommand("explain", "Report matched tokens for one query/candidate pair");
    s_ex->add_option("--index", ex.index, "Index file")->required();
    s_ex->add_option("--queries", ex.queries, "Query representation JSONL")->required();
    s_ex->add_option("--vocab", ex.vocab, "Vocabulary (one token per line, or JSON object)")->required();
    s_ex->add_option("--query-id", ex.query_id, "Query id")->required();
    s_ex->add_option("--candidate-id", ex.candidate_id, "Candidate id")->required();
    s_ex->add_option("--alpha", ex.alpha, "Dense weight in [0, 1]")->capture_default_str();
    s_ex->add_option("--format", ex.format, "text, json or html")->capture_default_str();
    s_ex->add_option("-o,--output", ex.output, "Output file (default stdout)");

    ResourcesArgs rs;
    auto* s_res = app.add_subcommand("resources", "Cost model table, optionally with measured latency");
    s_res->add_option("--hidden-size", rs.h, "Dense size h")->capture_default_str();
    s_res->add_option("--max-len", rs.n, "Max sequence length n")->capture_default_str();
    s_res->add_option("--k", rs.k, "Sparse budget k")->capture_default_str();
    s_res->add_option("--format", rs.format, "json or csv")->capture_default_str();
    s_res->add_option("--index", rs.index, "Index to time");
    s_res->add_option("--queries", rs.queries, "Queries to time");
    s_res->add_option("--repetitions", rs.repetitions, "Timed passes (>= 3)")->capture_default_str();
    s_res->add_option("--alpha", rs.alpha, "Dense weight used while timing")->capture_default_str();
    s_res->add_option("-o,--output", rs.output, "Output file (default stdout)");

    Bm25Args bm;
    auto* s_bm = app.add_subcommand("bm25", "Okapi BM25 baseline run");
    s_bm->add_option("--corpus", bm.corpus, "Corpus JSONL {id, source, text}")->required();
    s_bm->add_option("--queries", bm.queries, "Query JSONL {id, text[, candidates]}")->required();
    s_bm->add_option("--k1", bm.k1, "Term frequency saturation")->capture_default_str();
    s_bm->add_option("--b", bm.b, "Length normalization")->capture_default_str();
    s_bm->add_option("--top-n", bm.top_n, "Documents kept per query")->capture_default_str();
    s_bm->add_flag("--lowercase", bm.lowercase, "Lowercase during normalization");
    s_bm->add_option("--trec-tag", bm.tag, "Run tag column")->capture_default_str();
    s_bm->add_option("-o,--output", bm.output, "TREC run file (default stdout)");

    PriorsArgs pr;
    auto* s_pr = app.add_subcommand("priors", "Estimate per-source priors from a run");
    s_pr->add_option("--run", pr.run, "TREC run")->required();
    s_pr->add_option("--qrels", pr.qrels, "TREC qrels")->required();
    s_pr->add_option("--index", pr.index, "Index supplying candidate sources")->required();
    s_pr->add_option("--floor", pr.floor, "Minimum prior")->capture_default_str();
    s_pr->add_option("-o,--output", pr.output, "Priors JSON (default stdout)");

    LossArgs ls;
    auto* s_loss = app.add_subcommand("loss", "Training objective for a batch of instances");
    s_loss->add_option("--instances", ls.instances, "JSONL {query, positive, negatives}")->required();
    s_loss->add_option("--tau", ls.cfg.tau, "Temperature")->capture_default_str();
    s_loss->add_option("--lambda-q", ls.cfg.lambda_q, "Query regularizer weight")->capture_default_str();
    s_loss->add_option("--lambda-c", ls.cfg.lambda_c, "Candidate regularizer weight")->capture_default_str();
    s_loss->add_option("--vocab-size", ls.vocab_size, "Vocabulary size (0 infers)")->capture_default_str();
    s_loss->add_option("-o,--output", ls.output, "Report JSON (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        if (*s_enc) cmd_encode(enc);
        else if (*s_idx) cmd_index(idx);
        else if (*s_rank) cmd_rank(rk);
        else if (*s_eval) cmd_eval(ev);
        else if (*s_sweep) cmd_sweep(sw);
        else if (*s_ex) cmd_explain(ex);
        else if (*s_res) cmd_resources(rs);
        else if (*s_bm) cmd_bm25(bm);
        else if (*s_pr) cmd_priors(pr);
        else if (*s_loss) cmd_loss(ls);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const NotApplicableError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
