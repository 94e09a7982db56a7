#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "tkest/estimators.hpp"
#include "tkest/harness.hpp"
#include "tkest/index.hpp"
#include "tkest/prefix_store.hpp"
#include "tkest/query_engine.hpp"
#include "tkest/subset_catalog.hpp"
#include "tkest/synthetic.hpp"

namespace py = pybind11;
using namespace tkest;

namespace {

Method method_arg(std::string const& name)
{
    auto const m = parse_method(name);
    if (!m) {
        throw std::invalid_argument("unknown method '" + name + "'");
    }
    return *m;
}

ScorerParams scorer_arg(std::string const& name, double k1, double b, double mu)
{
    if (name == "bm25") {
        return ScorerParams::make_bm25(k1, b);
    }
    if (name == "qld") {
        return ScorerParams::make_qld(mu);
    }
    throw std::invalid_argument("unknown scorer '" + name + "'");
}

py::dict summary_dict(MufSummary const& s)
{
    py::dict d;
    d["muf"] = s.muf ? py::cast(*s.muf) : py::none();
    d["overestimate_rate"] = s.overestimate_rate;
    d["eligible"] = s.eligible;
    d["overestimates"] = s.overestimates;
    d["excluded_zero_exact"] = s.excluded_zero_exact;
    return d;
}

py::dict report_dict(EvalReport const& r)
{
    py::dict d = summary_dict(r.summary);
    d["method"] = std::string(method_name(r.method));
    d["k"] = r.k;
    d["queries"] = r.query_count;
    d["excluded_single"] = r.excluded_single;
    d["excluded_empty"] = r.excluded_empty;
    d["mean_ab_used"] = r.mean_ab_used;
    d["mean_lb_used"] = r.mean_lb_used;
    d["p50_ns"] = r.p50_ns;
    d["p95_ns"] = r.p95_ns;
    py::dict lengths;
    for (auto const& b : r.by_length) {
        lengths[py::cast(b.length)] = summary_dict(b.summary);
    }
    d["by_length"] = lengths;
    return d;
}

}  // namespace

PYBIND11_MODULE(_tkest, m)
{
    m.doc() = "Safe top-k threshold estimation over impact-ordered inverted indexes.";
    m.attr("__version__") = TKEST_VERSION;

    py::register_exception<format_error>(m, "FormatError", PyExc_ValueError);
    py::register_exception<compatibility_error>(m, "CompatibilityError", PyExc_ValueError);
    py::register_exception<io_error>(m, "IOError", PyExc_OSError);

    py::class_<ImpactIndex>(m, "Index")
        .def_property_readonly("document_count", &ImpactIndex::document_count)
        .def_property_readonly("term_count", &ImpactIndex::term_count)
        .def_property_readonly("total_postings", &ImpactIndex::total_postings)
        .def_property_readonly("fingerprint", &ImpactIndex::fingerprint)
        .def("terms", [](ImpactIndex const& i) { return std::vector<std::string>(i.terms().begin(), i.terms().end()); })
        .def(
            "postings",
            [](ImpactIndex const& i, std::string const& term) {
                std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
                if (auto t = i.find_term(term)) {
                    for (auto const& p : i.list(*t).postings()) {
                        out.emplace_back(p.doc.value, p.impact);
                    }
                }
                return out;
            },
            py::arg("term"))
        .def("to_bytes",
             [](ImpactIndex const& i) {
                 auto const bytes = serialize_index(i);
                 return py::bytes(reinterpret_cast<char const*>(bytes.data()), bytes.size());
             })
        .def("save", [](ImpactIndex const& i, std::string const& path) { save_index(i, path); }, py::arg("path"))
        .def("__repr__", [](ImpactIndex const& i) {
            return "<tkest.Index documents=" + std::to_string(i.document_count()) +
                   " terms=" + std::to_string(i.term_count()) + ">";
        });

    py::class_<PrefixStore>(m, "Store")
        .def_property_readonly("size", &PrefixStore::size)
        .def_property_readonly("k_values", [](PrefixStore const& s) { return s.metadata().k_values; })
        .def_property_readonly("policy", [](PrefixStore const& s) { return s.metadata().policy_name; })
        .def("to_bytes",
             [](PrefixStore const& s) {
                 auto const bytes = serialize_store(s);
                 return py::bytes(reinterpret_cast<char const*>(bytes.data()), bytes.size());
             })
        .def("save", [](PrefixStore const& s, std::string const& path) { save_store(s, path); }, py::arg("path"))
        .def("__repr__",
             [](PrefixStore const& s) { return "<tkest.Store subsets=" + std::to_string(s.size()) + ">"; });

    m.def(
        "build_index",
        [](std::string const& corpus, std::string const& scorer, double k1, double b, double mu, int bits) {
            std::istringstream in(corpus);
            return build_index(in, scorer_arg(scorer, k1, b, mu), bits);
        },
        py::arg("corpus"), py::arg("scorer") = "bm25", py::arg("k1") = 0.9, py::arg("b") = 0.4,
        py::arg("mu") = 1000.0, py::arg("bits") = 8, "Index a `docname<TAB>text` corpus given as a string.");
    m.def(
        "load_impacts",
        [](std::string const& text) {
            std::istringstream in(text);
            return load_precomputed(in);
        },
        py::arg("text"), "Index precomputed `term<TAB>doc:impact ...` lines.");
    m.def("load_index", [](std::string const& path) { return load_index(path); }, py::arg("path"));
    m.def(
        "index_from_bytes",
        [](py::bytes const& data) {
            std::string_view const view = data;
            return deserialize_index(std::span(reinterpret_cast<std::uint8_t const*>(view.data()), view.size()));
        },
        py::arg("data"));
    m.def("sample_index", &sample_index, py::arg("index"), py::arg("rate"), py::arg("seed"));

    m.def(
        "build_store",
        [](ImpactIndex const& index, std::vector<std::string> const& log, std::string const& policy,
           std::vector<std::size_t> k_values, unsigned threads) {
            auto const p = named_config(policy);
            std::ostringstream text;
            for (auto const& q : log) {
                text << q << '\n';
            }
            std::istringstream in(text.str());
            std::sort(k_values.begin(), k_values.end());
            if (k_values.empty()) {
                throw std::invalid_argument("k_values must not be empty");
            }
            auto const stats = mine_subsets(in, index, p.max_size(), p.min_frequency_to_keep);
            auto const catalog = assign_depths(stats, p, static_cast<std::uint32_t>(k_values.back()));
            StoreBuildOptions options;
            options.k_values = k_values;
            options.policy_name = p.name;
            options.threads = threads;
            py::gil_scoped_release release;
            return build_store(index, catalog, options).store;
        },
        py::arg("index"), py::arg("log"), py::arg("policy") = "medium",
        py::arg("k_values") = std::vector<std::size_t>{10, 100, 1000}, py::arg("threads") = 1,
        "Mine subsets from a query log and build the quantile and prefix store.");
    m.def(
        "load_store",
        [](std::string const& path, ImpactIndex const* index) { return load_store(path, index); },
        py::arg("path"), py::arg("index") = nullptr);
    m.def(
        "store_from_bytes",
        [](py::bytes const& data, ImpactIndex const* index) {
            std::string_view const view = data;
            return deserialize_store(std::span(reinterpret_cast<std::uint8_t const*>(view.data()), view.size()),
                                     index);
        },
        py::arg("data"), py::arg("index") = nullptr);

    m.def(
        "exact_threshold",
        [](ImpactIndex const& index, std::string const& query, std::size_t k) {
            return exact_threshold(index, parse_query(index, query), k);
        },
        py::arg("index"), py::arg("query"), py::arg("k"));
    m.def(
        "estimate",
        [](ImpactIndex const& index, PrefixStore const& store, std::string const& query, std::size_t k,
           std::string const& method, std::size_t ab, std::size_t lb, bool backup) {
            store.check_compatible(index);
            auto const e = run_estimator(method_arg(method), store, index, parse_query(index, query), k, {ab, lb},
                                         backup);
            py::dict d;
            d["estimate"] = e.value;
            d["ab_used"] = e.ab_used;
            d["lb_used"] = e.lb_used;
            d["backed_by_quantile"] = e.backed_by_quantile;
            return d;
        },
        py::arg("index"), py::arg("store"), py::arg("query"), py::arg("k") = 10, py::arg("method") = "lookups",
        py::arg("ab") = 1000, py::arg("lb") = 100, py::arg("backup") = true);
    m.def(
        "maxscore",
        [](ImpactIndex const& index, std::string const& query, std::size_t k, Score initial_threshold) {
            auto const [top, stats] = maxscore_topk(index, parse_query(index, query), k, initial_threshold);
            py::dict d;
            std::vector<std::pair<std::uint32_t, Score>> entries;
            for (auto const& e : top.entries) {
                entries.emplace_back(e.doc.value, e.score);
            }
            d["entries"] = entries;
            d["threshold"] = top.threshold;
            d["postings_scored"] = stats.postings_scored;
            d["documents_evaluated"] = stats.documents_evaluated;
            return d;
        },
        py::arg("index"), py::arg("query"), py::arg("k"), py::arg("initial_threshold") = 0);
    m.def(
        "evaluate",
        [](ImpactIndex const& index, PrefixStore const& store, std::vector<std::string> const& queries,
           std::string const& method, std::size_t k, std::size_t ab, std::size_t lb, bool backup, bool include_single,
           unsigned threads) {
            EvalConfig config;
            config.method = method_arg(method);
            config.k = k;
            config.budget = {ab, lb};
            config.backup = backup;
            config.include_single = include_single;
            config.timing = false;
            config.threads = threads;
            EvalResult result;
            {
                py::gil_scoped_release release;
                result = evaluate(index, store, queries, config);
            }
            py::dict d = report_dict(result.report);
            py::list records;
            for (auto const& r : result.records) {
                records.append(py::make_tuple(r.query_id, r.qlen, r.estimate, r.exact));
            }
            d["records"] = records;
            return d;
        },
        py::arg("index"), py::arg("store"), py::arg("queries"), py::arg("method") = "lookups", py::arg("k") = 10,
        py::arg("ab") = 1000, py::arg("lb") = 100, py::arg("backup") = true, py::arg("include_single") = false,
        py::arg("threads") = 1);

    m.def("overestimate_probability", &overestimate_probability, py::arg("k"), py::arg("k_prime"), py::arg("s"));
    m.def("choose_k_prime", &choose_k_prime, py::arg("k"), py::arg("s"), py::arg("epsilon"));

    m.def(
        "synthetic_corpus",
        [](std::size_t documents, std::size_t vocabulary, double zipf, std::uint64_t seed) {
            synthetic::CorpusOptions o;
            o.documents = documents;
            o.vocabulary = vocabulary;
            o.zipf_exponent = zipf;
            o.seed = seed;
            return synthetic::corpus_string(o);
        },
        py::arg("documents") = 12000, py::arg("vocabulary") = 4000, py::arg("zipf") = 1.0, py::arg("seed") = 42);
    m.def(
        "synthetic_queries",
        [](std::size_t count, std::size_t min_terms, std::size_t max_terms, std::uint64_t seed) {
            synthetic::QueryOptions o;
            o.queries = count;
            o.min_terms = min_terms;
            o.max_terms = max_terms;
            o.seed = seed;
            return synthetic::queries(o);
        },
        py::arg("count") = 1000, py::arg("min_terms") = 1, py::arg("max_terms") = 6, py::arg("seed") = 7);
}
