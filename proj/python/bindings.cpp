#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

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

namespace py = pybind11;
using namespace hybridrank;

namespace {

// Sparse reps cross the boundary as {token_id: weight} dicts.
SparseRep sparse_from_dict(const std::map<TokenId, float>& d) {
    std::vector<SparseEntry> entries;
    entries.reserve(d.size());
    for (const auto& [t, w] : d) entries.push_back({t, w});
    return SparseRep::from_unsorted(std::move(entries));
}

std::map<TokenId, float> sparse_to_dict(const SparseRep& rep) {
    std::map<TokenId, float> out;
    for (const auto& e : rep.entries) out[e.token] = e.weight;
    return out;
}

repr::LogitMatrix matrix_from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw DimensionError("logit matrix must be 2-D");
    const auto rows = static_cast<std::size_t>(a.shape(0));
    const auto cols = static_cast<std::size_t>(a.shape(1));
    return {rows, cols, std::vector<float>(a.data(), a.data() + rows * cols)};
}

py::object json_to_py(const nlohmann::ordered_json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

scoring::ScoringConfig make_config(double alpha, const std::optional<std::map<std::string, double>>& priors,
                                   bool min_max) {
    scoring::ScoringConfig cfg;
    cfg.alpha = alpha;
    cfg.normalization = min_max ? scoring::Normalization::min_max_per_query : scoring::Normalization::none;
    if (priors) {
        cfg.source_priors = scoring::SourcePriors{};
        for (const auto& [k, v] : *priors) (*cfg.source_priors)[parse_source_tag(k)] = v;
        cfg.normalization = scoring::Normalization::min_max_per_query;
    }
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Hybrid sparse-dense ranking engine";

    auto base = py::register_exception<Error>(m, "Error");
    auto validation = py::register_exception<ValidationError>(m, "ValidationError", base);
    py::register_exception<DimensionError>(m, "DimensionError", validation);
    py::register_exception<ConfigError>(m, "ConfigError", validation);
    py::register_exception<NotApplicableError>(m, "NotApplicableError", base);
    py::register_exception<IoError>(m, "IoError", base);
    auto format = py::register_exception<FormatError>(m, "FormatError", base);
    py::register_exception<VersionError>(m, "VersionError", format);
    py::register_exception<TruncatedError>(m, "TruncatedError", format);
    py::register_exception<ChecksumError>(m, "ChecksumError", format);

    py::class_<HybridEntry>(m, "HybridEntry")
        .def(py::init([](std::string id, const std::string& source, std::vector<float> dense,
                         const std::map<TokenId, float>& sparse, std::optional<std::vector<std::string>> surface) {
                 return HybridEntry{std::move(id), parse_source_tag(source), DenseRep{std::move(dense)},
                                    sparse_from_dict(sparse), std::move(surface)};
             }),
             py::arg("id"), py::arg("source") = "other", py::arg("dense") = std::vector<float>{},
             py::arg("sparse") = std::map<TokenId, float>{}, py::arg("surface_tokens") = py::none())
        .def_readonly("id", &HybridEntry::id)
        .def_property_readonly("source", [](const HybridEntry& e) { return std::string(to_string(e.source)); })
        .def_property_readonly("dense", [](const HybridEntry& e) { return e.dense.values; })
        .def_property_readonly("sparse", [](const HybridEntry& e) { return sparse_to_dict(e.sparse); })
        .def_readonly("surface_tokens", &HybridEntry::surface_tokens)
        .def("__eq__", [](const HybridEntry& a, const HybridEntry& b) { return a == b; })
        .def("__repr__", [](const HybridEntry& e) { return "<HybridEntry " + e.id + ">"; });

    py::class_<scoring::ScoredCandidate>(m, "ScoredCandidate")
        .def_readonly("candidate_id", &scoring::ScoredCandidate::candidate_id)
        .def_readonly("dense_score", &scoring::ScoredCandidate::dense_score)
        .def_readonly("lexical_score", &scoring::ScoredCandidate::lexical_score)
        .def_readonly("combined", &scoring::ScoredCandidate::combined)
        .def_property_readonly("source", [](const scoring::ScoredCandidate& c) { return std::string(to_string(c.source)); })
        .def("__repr__", [](const scoring::ScoredCandidate& c) {
            return "<ScoredCandidate " + c.candidate_id + " " + std::to_string(c.combined) + ">";
        });

    // repr
    m.def(
        "encode",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& logits, std::uint32_t k,
           const std::string& aggregation) {
            return sparse_to_dict(repr::encode(matrix_from_array(logits), {k, repr::parse_aggregation(aggregation)}));
        },
        py::arg("logits"), py::arg("k") = 128, py::arg("aggregation") = "max",
        "Saturate, aggregate and top-k sparsify a |T| x |V| logit matrix; returns {token_id: weight}.");
    m.def(
        "term_weights",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& logits, const std::string& aggregation) {
            return repr::aggregate(repr::saturate(matrix_from_array(logits)), repr::parse_aggregation(aggregation)).weights;
        },
        py::arg("logits"), py::arg("aggregation") = "max");
    m.def(
        "topk_sparsify", [](const std::vector<float>& w, std::uint32_t k) { return sparse_to_dict(repr::topk_sparsify(w, k)); },
        py::arg("weights"), py::arg("k"));

    // scoring
    m.def(
        "dot_dense",
        [](std::vector<float> a, std::vector<float> b) { return scoring::dot_dense({std::move(a)}, {std::move(b)}); },
        py::arg("a"), py::arg("b"));
    m.def(
        "dot_sparse",
        [](const std::map<TokenId, float>& a, const std::map<TokenId, float>& b) {
            return scoring::dot_sparse(sparse_from_dict(a), sparse_from_dict(b));
        },
        py::arg("a"), py::arg("b"));
    m.def(
        "rank",
        [](const HybridEntry& q, const std::vector<HybridEntry>& candidates, double alpha,
           const std::optional<std::map<std::string, double>>& priors, bool min_max) {
            return scoring::rank(q, candidates, make_config(alpha, priors, min_max));
        },
        py::arg("query"), py::arg("candidates"), py::arg("alpha") = 0.5, py::arg("source_priors") = py::none(),
        py::arg("min_max") = false);

    py::class_<index::HybridIndex>(m, "HybridIndex")
        .def_static(
            "build", [](std::vector<HybridEntry> entries) { return index::HybridIndex::build(std::move(entries)); },
            py::arg("entries"))
        .def_static("load", &index::HybridIndex::load, py::arg("path"))
        .def_static(
            "from_bytes", [](const py::bytes& b) { return index::HybridIndex::deserialize(std::string(b)); }, py::arg("data"))
        .def("save", &index::HybridIndex::save, py::arg("path"))
        .def("to_bytes", [](const index::HybridIndex& i) { return py::bytes(i.serialize()); })
        .def(
            "query",
            [](const index::HybridIndex& idx, const HybridEntry& q, double alpha, std::size_t top_n,
               const std::optional<std::map<std::string, double>>& priors, bool min_max,
               std::optional<std::vector<std::string>> candidate_ids) {
                index::QueryFilter f;
                f.candidate_ids = std::move(candidate_ids);
                py::gil_scoped_release release;
                return idx.query(q, make_config(alpha, priors, min_max), top_n, f);
            },
            py::arg("query"), py::arg("alpha") = 0.5, py::arg("top_n") = 100, py::arg("source_priors") = py::none(),
            py::arg("min_max") = false, py::arg("candidate_ids") = py::none())
        .def("__len__", &index::HybridIndex::size)
        .def("__eq__", [](const index::HybridIndex& a, const index::HybridIndex& b) { return a == b; })
        .def_property_readonly("entries", [](const index::HybridIndex& i) {
            return std::vector<HybridEntry>(i.entries().begin(), i.entries().end());
        });

    // losses
    m.def(
        "contrastive_loss",
        [](double pos, const std::vector<double>& negs, double tau) { return losses::contrastive_loss(pos, negs, tau); },
        py::arg("pos_score"), py::arg("neg_scores"), py::arg("tau") = 1.0);
    m.def(
        "flops_reg",
        [](const std::vector<std::vector<float>>& batch) {
            std::vector<repr::TermWeights> w;
            for (const auto& row : batch) w.push_back({row});
            return losses::flops_reg(w);
        },
        py::arg("batch"));
    m.def(
        "total_loss",
        [](double ld, double ll, double rq, double rc, double lq, double lc) {
            return losses::total_loss(ld, ll, rq, rc, {1.0, lq, lc});
        },
        py::arg("dense_rank_loss"), py::arg("lexical_rank_loss"), py::arg("reg_q"), py::arg("reg_c"),
        py::arg("lambda_q") = 3e-4, py::arg("lambda_c") = 1e-4);

    // eval
    m.def(
        "evaluate_query",
        [](const std::vector<std::string>& ranking, const std::set<std::string>& relevant) {
            const auto q = eval::evaluate_query(ranking, relevant);
            std::map<std::string, double> out;
            for (std::size_t i = 0; i < eval::kMetricCount; ++i) out[eval::metric_names()[i]] = eval::metric_value(q, i);
            return out;
        },
        py::arg("ranking"), py::arg("relevant"));
    m.def(
        "evaluate",
        [](const std::map<std::string, std::vector<std::string>>& run,
           const std::map<std::string, std::set<std::string>>& qrels) {
            eval::RankedRun r;
            for (const auto& [qid, ids] : run) {
                double score = static_cast<double>(ids.size());
                for (const auto& id : ids) r.queries[qid].push_back({id, score--});
            }
            eval::Qrels q{qrels};
            return json_to_py(eval::evaluate(r, q).to_json());
        },
        py::arg("run"), py::arg("qrels"), "Macro-averaged report; run maps query id to ranked candidate ids.");
    m.def(
        "fisher_randomization",
        [](const std::vector<double>& a, const std::vector<double>& b, std::size_t iterations, std::uint64_t seed) {
            return eval::fisher_randomization(a, b, iterations, seed);
        },
        py::arg("a"), py::arg("b"), py::arg("iterations") = 10000, py::arg("seed") = 42);
    m.def(
        "paired_t_test",
        [](const std::vector<double>& a, const std::vector<double>& b) {
            const auto r = eval::paired_t_test(a, b);
            return py::dict(py::arg("t_statistic") = r.t_statistic, py::arg("p_value") = r.p_value,
                            py::arg("degenerate") = r.degenerate);
        },
        py::arg("a"), py::arg("b"));

    // bm25
    m.def(
        "normalize",
        [](const std::string& text, bool lowercase) {
            bm25::NormalizationRules rules;
            rules.lowercase = lowercase;
            return bm25::normalize(text, rules);
        },
        py::arg("text"), py::arg("lowercase") = false);
    m.def("tokenize", &bm25::tokenize, py::arg("text"));
    m.def(
        "bm25_rank",
        [](const std::string& query, const std::vector<std::pair<std::string, std::string>>& docs, double k1, double b) {
            std::vector<bm25::Document> corpus;
            for (const auto& [id, text] : docs) corpus.push_back({id, SourceTag::other, text});
            const bm25::NormalizationRules rules;
            const auto stats = bm25::CorpusStats::build(corpus, rules);
            std::vector<std::pair<std::string, double>> out;
            for (const auto& d : bm25::bm25_rank(query, stats, rules, {k1, b})) out.emplace_back(d.id, d.score);
            return out;
        },
        py::arg("query"), py::arg("docs"), py::arg("k1") = 1.5, py::arg("b") = 0.75);

    // explain
    m.def(
        "match_report",
        [](const HybridEntry& q, const HybridEntry& c, const std::map<TokenId, std::string>& vocab, double alpha,
           const std::string& format) {
            const Vocabulary v(vocab.begin(), vocab.end());
            const auto report = explain::match_report(q, c, v, alpha);
            const auto fmt = explain::parse_format(format);
            if (fmt == explain::Format::json) return json_to_py(explain::to_json(report));
            return py::object(py::str(explain::render(report, fmt)));
        },
        py::arg("query"), py::arg("candidate"), py::arg("vocab"), py::arg("alpha") = 0.5, py::arg("format") = "json");

    // resources
    m.def(
        "interaction_flops",
        [](const std::string& scheme, std::uint64_t h, std::uint64_t n, std::uint64_t k) {
            return resources::interaction_flops({h, n, k, resources::parse_scheme(scheme)});
        },
        py::arg("scheme"), py::arg("h") = 768, py::arg("n") = 128, py::arg("k") = 128);
    m.def(
        "storage_per_item",
        [](const std::string& scheme, std::uint64_t h, std::uint64_t n, std::uint64_t k) {
            return resources::storage_per_item({h, n, k, resources::parse_scheme(scheme)});
        },
        py::arg("scheme"), py::arg("h") = 768, py::arg("n") = 128, py::arg("k") = 128);
    m.def(
        "cost_table", [](std::uint64_t h, std::uint64_t n, std::uint64_t k) { return json_to_py(resources::cost_table(h, n, k)); },
        py::arg("h") = 768, py::arg("n") = 128, py::arg("k") = 128);

    // interchange
    m.def(
        "read_logits",
        [](const std::filesystem::path& path) {
            std::vector<py::array_t<float>> out;
            for (const auto& mtx : interchange::read_logits(path)) {
                py::array_t<float> a({mtx.rows(), mtx.cols()});
                std::copy(mtx.values().begin(), mtx.values().end(), a.mutable_data());
                out.push_back(std::move(a));
            }
            return out;
        },
        py::arg("path"));
}
