// retrorag: build BM25 indexes, answer questions, run dataset evaluations.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "retrorag/config.hpp"
#include "retrorag/corpus.hpp"
#include "retrorag/error.hpp"
#include "retrorag/evaluation.hpp"
#include "retrorag/llm_client.hpp"
#include "retrorag/pipeline.hpp"
#include "retrorag/prompts.hpp"

namespace {

using namespace retrorag;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct BackendFlags {
    std::string base_url;
    std::string model = "default";
    std::string api_key_env = "OPENAI_API_KEY";
    std::string scripted;
    std::size_t max_in_flight = 4;
};

// Every optional here overrides exactly one RunConfig field (evidence-size
// sets both capacities).
struct ConfigFlags {
    std::string config_file;
    std::optional<double> threshold;
    std::optional<std::size_t> max_iterations;
    std::optional<std::size_t> evidence_size;
    std::optional<std::size_t> source_capacity;
    std::optional<std::size_t> inferential_capacity;
    std::optional<std::size_t> retrieval_k;
    std::optional<double> temp_low;
    std::optional<double> temp_high;
    std::optional<std::size_t> ie_candidate_cap;
    bool discover_every_round = false;
    std::string mode;
    bool print_config = false;

    RunConfig resolve() const {
        RunConfig c = config_file.empty() ? RunConfig{} : RunConfig::load(config_file);
        if (threshold) c.threshold = *threshold;
        if (max_iterations) c.max_iterations = *max_iterations;
        if (evidence_size) c.source_capacity = c.inferential_capacity = *evidence_size;
        if (source_capacity) c.source_capacity = *source_capacity;
        if (inferential_capacity) c.inferential_capacity = *inferential_capacity;
        if (retrieval_k) c.retrieval_k = *retrieval_k;
        if (temp_low) c.temp_low = *temp_low;
        if (temp_high) c.temp_high = *temp_high;
        if (ie_candidate_cap) c.ie_candidate_cap = *ie_candidate_cap;
        if (discover_every_round) c.discover_every_round = true;
        if (!mode.empty()) c.merge_json({{"mode", mode}});
        c.validate();
        return c;
    }
};

struct SharedFlags {
    std::string index_dir;
    std::string template_dir;
    std::string trace_out;
    BackendFlags backend;
    ConfigFlags config;
};

void add_shared_flags(CLI::App* cmd, SharedFlags& f) {
    cmd->add_option("--index", f.index_dir, "Index directory written by build-index");
    cmd->add_option("--llm-base-url", f.backend.base_url, "OpenAI-compatible base URL (e.g. http://host:8000/v1)");
    cmd->add_option("--llm-model", f.backend.model, "Model name sent to the backend");
    cmd->add_option("--llm-api-key-env", f.backend.api_key_env, "Environment variable holding the API key");
    cmd->add_option("--llm-max-in-flight", f.backend.max_in_flight, "Concurrent backend requests")->check(CLI::PositiveNumber);
    cmd->add_option("--scripted", f.backend.scripted, "Scripted fixture (JSON lines) instead of a live backend");
    cmd->add_option("--template-dir", f.template_dir, "Directory of <role>.txt prompt template overrides");
    cmd->add_option("--trace-out", f.trace_out, "Write the JSON-lines trace here");
    cmd->add_option("--config", f.config.config_file, "JSON config file (RunConfig fields)");
    cmd->add_option("--threshold", f.config.threshold, "Self-consistency acceptance threshold t");
    cmd->add_option("--max-iterations", f.config.max_iterations, "Maximum rounds");
    cmd->add_option("--evidence-size", f.config.evidence_size, "Source and inferential evidence capacity (N = K)");
    cmd->add_option("--source-capacity", f.config.source_capacity, "Source evidence capacity N");
    cmd->add_option("--inferential-capacity", f.config.inferential_capacity, "Inferential evidence capacity K");
    cmd->add_option("--retrieval-k", f.config.retrieval_k, "Passages retrieved per search");
    cmd->add_option("--temp-low", f.config.temp_low, "Temperature of the reasoned answer and all scorers");
    cmd->add_option("--temp-high", f.config.temp_high, "Temperature of the monitoring answer");
    cmd->add_option("--ie-candidate-cap", f.config.ie_candidate_cap, "Candidate claims requested per discovery");
    cmd->add_flag("--discover-every-round", f.config.discover_every_round, "Run discovery in every round");
    cmd->add_option("--mode", f.config.mode, "retroactive (default) or single_shot")
        ->check(CLI::IsMember({"retroactive", "single_shot"}));
    cmd->add_flag("--print-config", f.config.print_config, "Print the resolved configuration and exit");
}

std::unique_ptr<LlmClient> make_client(const BackendFlags& f) {
    if (!f.scripted.empty()) return std::make_unique<ScriptedClient>(load_scripted_rules(f.scripted));
    ChatEndpoint endpoint;
    if (!f.base_url.empty()) endpoint.base_url = f.base_url;
    else if (const char* env = std::getenv("RETRORAG_LLM_BASE_URL")) endpoint.base_url = env;
    endpoint.model = f.model;
    endpoint.api_key_env = f.api_key_env;
    return std::make_unique<ChatCompletionsClient>(endpoint, RetryPolicy{}, f.max_in_flight);
}

PromptRegistry make_prompts(const std::string& dir) {
    return dir.empty() ? PromptRegistry{} : PromptRegistry::with_overrides(dir);
}

int cmd_build_index(const std::string& corpus, const std::string& out, std::size_t chunk_size, bool no_titles,
                    double k1, double b) {
    if (chunk_size == 0) {
        std::cerr << "error: --chunk-size must be at least 1\n";
        return kExitUsage;
    }
    if (!std::filesystem::exists(corpus)) {
        std::cerr << "error: corpus not found: " << corpus << "\n";
        return kExitUsage;
    }
    IndexOptions options;
    options.chunk_size = chunk_size;
    options.index_titles = !no_titles;
    options.bm25 = {k1, b};
    CorpusIndex::Builder builder(options);
    std::size_t documents = 0;
    read_corpus_jsonl(corpus, [&](Document&& d) {
        builder.add(d);
        ++documents;
    });
    const auto index = std::move(builder).finish();
    index.save(out);
    std::cout << "documents: " << documents << "\n"
              << "passages: " << index.passage_count() << "\n"
              << "vocabulary: " << index.vocabulary_size() << "\n"
              << "avgdl: " << index.avg_doc_length() << "\n"
              << "index: " << out << "\n";
    return kExitOk;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out << content;
}

int cmd_ask(const SharedFlags& f, const std::string& question, const std::vector<std::string>& entities) {
    const auto config = f.config.resolve();
    if (f.config.print_config) {
        std::cout << config.to_json().dump(2) << "\n";
        return kExitOk;
    }
    if (f.index_dir.empty()) throw ConfigError("--index is required");
    const auto index = CorpusIndex::load(f.index_dir);
    const auto prompts = make_prompts(f.template_dir);
    auto client = make_client(f.backend);
    const Pipeline pipeline(index, *client, prompts, config);
    Question q{"ask", question, std::nullopt};
    if (!entities.empty()) q.key_entities = entities;
    const auto result = pipeline.run(q);
    if (!f.trace_out.empty()) write_file(f.trace_out, result.trace.to_jsonl());
    if (result.status == RunStatus::error) {
        std::cerr << "error: " << result.error << "\n";
        return kExitRuntime;
    }
    std::cout << "answer: " << result.final_answer << "\n"
              << "accepted: " << (result.accepted ? "true" : "false") << "\n"
              << "rounds: " << result.rounds_used << "\n"
              << "best_s_sc: " << result.best_s_sc << "\n";
    return kExitOk;
}

int cmd_eval(const SharedFlags& f, const std::string& dataset, const std::string& format, const std::string& out,
             std::size_t concurrency) {
    const auto config = f.config.resolve();
    if (f.config.print_config) {
        std::cout << config.to_json().dump(2) << "\n";
        return kExitOk;
    }
    if (f.index_dir.empty()) throw ConfigError("--index is required");
    const auto records = load_dataset(dataset, dataset_format_from_string(format));
    const auto index = CorpusIndex::load(f.index_dir);
    const auto prompts = make_prompts(f.template_dir);
    auto client = make_client(f.backend);
    const Pipeline pipeline(index, *client, prompts, config);
    EvalOptions options;
    options.results_path = out;
    if (!f.trace_out.empty()) options.trace_path = f.trace_out;
    options.concurrency = concurrency;
    const auto report = run_eval(records, pipeline, options);
    const auto& s = report.summary;
    std::cout << "executed: " << report.executed << " skipped: " << report.skipped << " errors: " << report.errors
              << "\n"
              << "EM " << s.em << "  F1 " << s.f1 << "  Pre " << s.precision << "  Rec " << s.recall << "  (n="
              << s.questions << ")\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Retroactive retrieval-augmented question answering"};
    app.require_subcommand(1);

    std::string corpus, out_dir;
    std::size_t chunk_size = 100;
    bool no_titles = false;
    double k1 = 1.2, b = 0.75;
    auto* build = app.add_subcommand("build-index", "Chunk a JSON-lines corpus and write a BM25 index");
    build->add_option("--corpus", corpus, "JSON-lines corpus with id/title/text")->required();
    build->add_option("--out", out_dir, "Output index directory")->required();
    build->add_option("--chunk-size", chunk_size, "Tokens per passage");
    build->add_flag("--no-title-index", no_titles, "Do not index document titles with each passage");
    build->add_option("--k1", k1, "BM25 k1");
    build->add_option("--b", b, "BM25 b");

    SharedFlags ask_flags;
    std::string question;
    std::vector<std::string> entities;
    auto* ask = app.add_subcommand("ask", "Answer one question");
    ask->add_option("-q,--question", question, "The question");
    ask->add_option("--key-entity", entities, "Key entity (repeatable); skips model extraction");
    add_shared_flags(ask, ask_flags);

    SharedFlags eval_flags;
    std::string dataset, format = "auto", results;
    std::size_t concurrency = 4;
    auto* eval = app.add_subcommand("eval", "Run a dataset and score EM / token F1");
    eval->add_option("--dataset", dataset, "HotpotQA / 2WikiMQA JSON or JSON-lines dataset")->required();
    eval->add_option("--dataset-format", format, "auto, hotpotqa, 2wiki or jsonl");
    eval->add_option("--out", results, "Results file (JSON lines); existing rows are skipped")->required();
    eval->add_option("--concurrency", concurrency, "Questions in flight")->check(CLI::PositiveNumber);
    add_shared_flags(eval, eval_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*build) return cmd_build_index(corpus, out_dir, chunk_size, no_titles, k1, b);
        if (*ask) {
            if (question.empty() && !ask_flags.config.print_config) throw ConfigError("--question is required");
            return cmd_ask(ask_flags, question, entities);
        }
        if (*eval) return cmd_eval(eval_flags, dataset, format, results, concurrency);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const IngestError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const IndexFormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
