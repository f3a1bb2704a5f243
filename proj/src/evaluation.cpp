#include "retrorag/evaluation.hpp"

#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "retrorag/error.hpp"
#include "retrorag/text.hpp"

namespace retrorag {

namespace fs = std::filesystem;
using nlohmann::json;

DatasetFormat dataset_format_from_string(std::string_view name) {
    if (name == "auto") return DatasetFormat::automatic;
    if (name == "hotpotqa") return DatasetFormat::hotpotqa;
    if (name == "2wiki" || name == "2wikimqa") return DatasetFormat::twowiki;
    if (name == "jsonl") return DatasetFormat::jsonl;
    throw ConfigError("unknown dataset format " + std::string(name));
}

namespace {

DatasetRecord record_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw IngestError(where + "expected a JSON object");
    DatasetRecord r;
    const auto id = j.contains("id") ? j.at("id") : j.contains("_id") ? j.at("_id") : json();
    if (id.is_string()) r.id = id.get<std::string>();
    else if (id.is_number_integer()) r.id = std::to_string(id.get<long long>());
    else throw IngestError(where + "missing id");
    if (!j.contains("question") || !j.at("question").is_string()) throw IngestError(where + "missing question");
    r.question = j.at("question").get<std::string>();
    auto add_answers = [&](const json& a) {
        if (a.is_string()) r.answers.push_back(a.get<std::string>());
        else if (a.is_array()) {
            for (const auto& x : a) {
                if (!x.is_string()) throw IngestError(where + "answers must be strings");
                r.answers.push_back(x.get<std::string>());
            }
        } else {
            throw IngestError(where + "answer must be a string or a list of strings");
        }
    };
    if (!j.contains("answer")) throw IngestError(where + "missing answer");
    add_answers(j.at("answer"));
    for (const char* alias_key : {"answer_aliases", "answer_alias", "aliases"}) {
        if (j.contains(alias_key)) add_answers(j.at(alias_key));
    }
    if (r.answers.empty()) throw IngestError(where + "no gold answer");
    if (j.contains("key_entities") && !j.at("key_entities").is_null()) {
        r.key_entities = j.at("key_entities").get<std::vector<std::string>>();
    }
    return r;
}

}  // namespace

std::vector<DatasetRecord> parse_dataset(std::string_view content, DatasetFormat format) {
    const auto body = trim(content);
    if (format == DatasetFormat::automatic) {
        format = !body.empty() && body.front() == '[' ? DatasetFormat::hotpotqa : DatasetFormat::jsonl;
    }
    std::vector<DatasetRecord> records;
    if (format == DatasetFormat::jsonl) {
        std::size_t line_no = 0;
        for (const auto& line : split_lines(content)) {
            ++line_no;
            if (trim(line).empty()) continue;
            const auto where = "line " + std::to_string(line_no) + ": ";
            json j;
            try {
                j = json::parse(line);
            } catch (const json::parse_error& e) {
                throw IngestError(where + "invalid JSON (" + e.what() + ")");
            }
            records.push_back(record_from_json(j, where));
        }
    } else {
        json arr;
        try {
            arr = json::parse(body);
        } catch (const json::parse_error& e) {
            throw IngestError(std::string("invalid dataset JSON: ") + e.what());
        }
        if (!arr.is_array()) throw IngestError("dataset must be a JSON array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            records.push_back(record_from_json(arr[i], "record " + std::to_string(i) + ": "));
        }
    }
    std::set<std::string> ids;
    for (const auto& r : records) {
        if (!ids.insert(r.id).second) throw IngestError("duplicate question id " + r.id);
    }
    return records;
}

std::vector<DatasetRecord> load_dataset(const fs::path& path, DatasetFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError("dataset not found: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_dataset(ss.str(), format);
}

std::vector<MetricRow> read_result_rows(const fs::path& path) {
    std::vector<MetricRow> rows;
    std::ifstream in(path, std::ios::binary);
    if (!in) return rows;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error&) {
            continue;  // torn final line from an interrupted run
        }
        if (j.value("type", std::string{}) == "summary") continue;
        rows.push_back(MetricRow::from_json(j));
    }
    return rows;
}

EvalReport run_eval(const std::vector<DatasetRecord>& records, const Pipeline& pipeline, const EvalOptions& options) {
    EvalReport report;

    // Keep finished rows; error rows are retried.
    std::vector<MetricRow> kept;
    std::set<std::string> done;
    for (auto& row : read_result_rows(options.results_path)) {
        if (row.status == "ok" && done.insert(row.question_id).second) kept.push_back(std::move(row));
    }
    std::vector<std::string> kept_trace_lines;
    if (options.trace_path) {
        std::ifstream in(*options.trace_path, std::ios::binary);
        std::string line;
        while (std::getline(in, line)) {
            try {
                const auto j = json::parse(line);
                if (done.count(j.value("question_id", std::string{}))) kept_trace_lines.push_back(line);
            } catch (const json::parse_error&) {
            }
        }
    }

    if (options.results_path.has_parent_path()) fs::create_directories(options.results_path.parent_path());
    std::ofstream rows_out(options.results_path, std::ios::binary | std::ios::trunc);
    if (!rows_out) throw Error("cannot write " + options.results_path.string());
    for (const auto& row : kept) rows_out << row.to_json().dump() << '\n';
    rows_out.flush();

    std::ofstream trace_out;
    if (options.trace_path) {
        trace_out.open(*options.trace_path, std::ios::binary | std::ios::trunc);
        if (!trace_out) throw Error("cannot write " + options.trace_path->string());
        for (const auto& line : kept_trace_lines) trace_out << line << '\n';
        trace_out.flush();
    }

    std::vector<const DatasetRecord*> todo;
    for (const auto& r : records) {
        if (done.count(r.id)) ++report.skipped;
        else todo.push_back(&r);
    }

    struct Slot {
        bool ready = false;
        MetricRow row;
        std::string trace;
    };
    std::vector<Slot> slots(todo.size());
    std::vector<MetricRow> fresh;
    std::mutex commit_mutex;
    std::size_t next_commit = 0;
    std::atomic<std::size_t> next_task{0};

    auto commit_ready = [&] {
        // Caller holds commit_mutex.
        while (next_commit < slots.size() && slots[next_commit].ready) {
            auto& slot = slots[next_commit];
            rows_out << slot.row.to_json().dump() << '\n';
            rows_out.flush();
            if (trace_out.is_open()) {
                trace_out << slot.trace;
                trace_out.flush();
            }
            fresh.push_back(std::move(slot.row));
            slot.trace.clear();
            ++next_commit;
        }
    };

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next_task.fetch_add(1);
            if (i >= todo.size()) return;
            const auto& rec = *todo[i];
            MetricRow row;
            std::string trace_text;
            try {
                const auto result = pipeline.run(Question{rec.id, rec.question, rec.key_entities});
                trace_text = result.trace.to_jsonl();
                if (result.status == RunStatus::ok) {
                    row = score_prediction(rec.id, result.final_answer, rec.answers, result.rounds_used, result.accepted);
                } else {
                    row.question_id = rec.id;
                    row.status = "error";
                    row.error = result.error;
                    row.rounds_used = result.rounds_used;
                    row.gold = rec.answers;
                }
            } catch (const std::exception& e) {
                row = MetricRow{};
                row.question_id = rec.id;
                row.status = "error";
                row.error = e.what();
                row.gold = rec.answers;
            }
            std::lock_guard lock(commit_mutex);
            slots[i].row = std::move(row);
            slots[i].trace = std::move(trace_text);
            slots[i].ready = true;
            commit_ready();
        }
    };

    const std::size_t threads = std::max<std::size_t>(1, std::min(options.concurrency, todo.size()));
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    pool.clear();

    report.executed = fresh.size();
    for (const auto& row : fresh) report.errors += row.status == "ok" ? 0 : 1;
    std::vector<MetricRow> all = kept;
    all.insert(all.end(), fresh.begin(), fresh.end());
    report.summary = summarize(all, pipeline.config().hash());
    rows_out << report.summary.to_json().dump() << '\n';
    return report;
}

}  // namespace retrorag
