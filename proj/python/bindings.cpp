#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "retrorag/config.hpp"
#include "retrorag/corpus.hpp"
#include "retrorag/error.hpp"
#include "retrorag/evaluation.hpp"
#include "retrorag/llm_client.hpp"
#include "retrorag/metrics.hpp"
#include "retrorag/pipeline.hpp"
#include "retrorag/prompts.hpp"
#include "retrorag/text.hpp"

namespace py = pybind11;
using namespace retrorag;

namespace {

// Owns the prompt registry; the index and client are kept alive by Python.
class PyPipeline {
public:
    PyPipeline(const CorpusIndex& index, LlmClient& client, RunConfig config, std::optional<std::string> template_dir)
        : prompts_(template_dir ? PromptRegistry::with_overrides(*template_dir) : PromptRegistry{}),
          pipeline_(index, client, prompts_, config) {}

    py::dict run(const std::string& question, std::optional<std::vector<std::string>> key_entities,
                 const std::string& id) const {
        RunResult r;
        {
            py::gil_scoped_release release;
            r = pipeline_.run(Question{id, question, std::move(key_entities)});
        }
        py::dict out;
        out["final_answer"] = r.final_answer;
        out["accepted"] = r.accepted;
        out["rounds_used"] = r.rounds_used;
        out["best_s_sc"] = r.best_s_sc;
        out["status"] = r.status == RunStatus::ok ? "ok" : "error";
        out["error"] = r.error;
        out["trace"] = r.trace.to_jsonl();
        return out;
    }

    py::dict evaluate(const std::string& dataset, const std::string& results, std::optional<std::string> trace_out,
                      std::size_t concurrency) const {
        EvalOptions options;
        options.results_path = results;
        if (trace_out) options.trace_path = *trace_out;
        options.concurrency = concurrency;
        const auto records = load_dataset(dataset);
        EvalReport report;
        {
            py::gil_scoped_release release;
            report = run_eval(records, pipeline_, options);
        }
        py::dict out;
        out["executed"] = report.executed;
        out["skipped"] = report.skipped;
        out["errors"] = report.errors;
        out["summary"] = report.summary.to_json().dump();
        return out;
    }

private:
    PromptRegistry prompts_;
    Pipeline pipeline_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Retroactive retrieval-augmented QA: BM25 corpus index, evidence loop, metrics.";

    py::register_exception<Error>(m, "RetroragError");
    py::register_exception<LookupError>(m, "LookupError_");

    m.def("tokenize", [](const std::string& text) { return tokenize(text); }, py::arg("text"));

    py::class_<Document>(m, "Document")
        .def(py::init([](std::string id, std::string title, std::string text) {
                 return Document{std::move(id), std::move(title), std::move(text)};
             }),
             py::arg("id"), py::arg("title") = "", py::arg("text") = "")
        .def_readwrite("id", &Document::id)
        .def_readwrite("title", &Document::title)
        .def_readwrite("text", &Document::text);

    py::class_<Passage>(m, "Passage")
        .def_readonly("passage_id", &Passage::passage_id)
        .def_readonly("doc_id", &Passage::doc_id)
        .def_readonly("ordinal", &Passage::ordinal)
        .def_readonly("title", &Passage::title)
        .def_readonly("text", &Passage::text)
        .def_readonly("token_count", &Passage::token_count)
        .def("__repr__", [](const Passage& p) { return "<Passage " + p.passage_id + ">"; });

    m.def("chunk_document", &chunk_document, py::arg("doc"), py::arg("chunk_size") = 100);

    py::class_<CorpusIndex>(m, "CorpusIndex")
        .def_static(
            "build",
            [](const std::vector<Document>& docs, std::size_t chunk_size, double k1, double b, bool index_titles) {
                IndexOptions o;
                o.chunk_size = chunk_size;
                o.bm25 = {k1, b};
                o.index_titles = index_titles;
                return CorpusIndex::build(docs, o);
            },
            py::arg("docs"), py::arg("chunk_size") = 100, py::arg("k1") = 1.2, py::arg("b") = 0.75,
            py::arg("index_titles") = true)
        .def_static("load", &CorpusIndex::load, py::arg("path"))
        .def("save", &CorpusIndex::save, py::arg("path"))
        .def("retrieve",
             [](const CorpusIndex& idx, const std::string& query, std::size_t k) {
                 std::vector<std::pair<Passage, double>> out;
                 for (auto& h : idx.retrieve(query, k)) out.emplace_back(std::move(h.passage), h.score);
                 return out;
             },
             py::arg("query"), py::arg("k") = 5)
        .def("bm25_score",
             [](const CorpusIndex& idx, const std::vector<std::string>& tokens, const std::string& pid) {
                 return idx.bm25_score(tokens, pid);
             },
             py::arg("query_tokens"), py::arg("passage_id"))
        .def_property_readonly("passage_count", &CorpusIndex::passage_count)
        .def_property_readonly("vocabulary_size", &CorpusIndex::vocabulary_size)
        .def_property_readonly("avg_doc_length", &CorpusIndex::avg_doc_length);

    m.def("normalize_answer", [](const std::string& s) { return normalize_answer(s); });
    m.def("exact_match", [](const std::string& p, const std::string& g) { return exact_match(p, g); },
          py::arg("prediction"), py::arg("gold"));
    m.def("token_f1",
          [](const std::string& p, const std::string& g) {
              const auto s = token_f1(p, g);
              return py::make_tuple(s.f1, s.precision, s.recall);
          },
          py::arg("prediction"), py::arg("gold"));

    m.def("yes_no_share",
          [](const std::vector<std::pair<std::string, double>>& alternatives, const std::string& text) {
              Completion c;
              c.text = text;
              for (const auto& [tok, lp] : alternatives) c.first_token_alternatives.push_back({tok, lp});
              return yes_no_share(c).value;
          },
          py::arg("alternatives"), py::arg("text") = "",
          "Yes-share from (token, log-probability) first-token alternatives.");

    py::class_<RunConfig>(m, "RunConfig")
        .def(py::init<>())
        .def_readwrite("threshold", &RunConfig::threshold)
        .def_readwrite("max_iterations", &RunConfig::max_iterations)
        .def_readwrite("source_capacity", &RunConfig::source_capacity)
        .def_readwrite("inferential_capacity", &RunConfig::inferential_capacity)
        .def_readwrite("retrieval_k", &RunConfig::retrieval_k)
        .def_readwrite("temp_low", &RunConfig::temp_low)
        .def_readwrite("temp_high", &RunConfig::temp_high)
        .def_readwrite("ie_candidate_cap", &RunConfig::ie_candidate_cap)
        .def_readwrite("discover_every_round", &RunConfig::discover_every_round)
        .def_property(
            "mode", [](const RunConfig& c) { return std::string(to_string(c.mode)); },
            [](RunConfig& c, const std::string& m) { c.merge_json({{"mode", m}}); })
        .def("validate", &RunConfig::validate)
        .def("to_json", [](const RunConfig& c) { return c.to_json().dump(); });

    py::class_<LlmClient>(m, "LlmClient").def_property_readonly("backend_name", &LlmClient::backend_name);

    py::class_<ScriptedClient, LlmClient>(m, "ScriptedClient")
        .def(py::init([](const std::string& fixture_path) {
                 return std::make_unique<ScriptedClient>(load_scripted_rules(fixture_path));
             }),
             py::arg("fixture_path"))
        .def_static("from_jsonl",
                    [](const std::string& jsonl) { return std::make_unique<ScriptedClient>(parse_scripted_rules(jsonl)); },
                    py::arg("jsonl"))
        .def_property_readonly("calls", &ScriptedClient::calls);

    py::class_<ChatCompletionsClient, LlmClient>(m, "ChatCompletionsClient")
        .def(py::init([](std::string base_url, std::string model, std::string api_key_env, std::size_t max_in_flight) {
                 ChatEndpoint e;
                 e.base_url = std::move(base_url);
                 e.model = std::move(model);
                 e.api_key_env = std::move(api_key_env);
                 return std::make_unique<ChatCompletionsClient>(e, RetryPolicy{}, max_in_flight);
             }),
             py::arg("base_url"), py::arg("model") = "default", py::arg("api_key_env") = "OPENAI_API_KEY",
             py::arg("max_in_flight") = 4);

    py::class_<PyPipeline>(m, "Pipeline")
        .def(py::init<const CorpusIndex&, LlmClient&, RunConfig, std::optional<std::string>>(), py::arg("index"),
             py::arg("client"), py::arg("config") = RunConfig{}, py::arg("template_dir") = py::none(),
             py::keep_alive<1, 2>(), py::keep_alive<1, 3>())
        .def("run", &PyPipeline::run, py::arg("question"), py::arg("key_entities") = py::none(),
             py::arg("id") = "q")
        .def("evaluate", &PyPipeline::evaluate, py::arg("dataset"), py::arg("results"),
             py::arg("trace_out") = py::none(), py::arg("concurrency") = 4);
}
