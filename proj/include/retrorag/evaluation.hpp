#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "retrorag/metrics.hpp"
#include "retrorag/pipeline.hpp"

namespace retrorag {

struct DatasetRecord {
    std::string id;
    std::string question;
    std::vector<std::string> answers;  // gold answer plus any aliases
    std::optional<std::vector<std::string>> key_entities;
};

enum class DatasetFormat { automatic, hotpotqa, twowiki, jsonl };

DatasetFormat dataset_format_from_string(std::string_view name);

// HotpotQA / 2WikiMultihopQA validation files (a JSON array with "_id",
// "question", "answer") or JSON-lines {"id","question","answer"}, where
// "answer" may be a list of aliases. Throws IngestError on duplicate ids or
// malformed records.
std::vector<DatasetRecord> load_dataset(const std::filesystem::path& path,
                                        DatasetFormat format = DatasetFormat::automatic);
std::vector<DatasetRecord> parse_dataset(std::string_view content, DatasetFormat format = DatasetFormat::automatic);

struct EvalOptions {
    std::filesystem::path results_path;
    std::optional<std::filesystem::path> trace_path;
    std::size_t concurrency = 4;
};

struct EvalReport {
    std::size_t executed = 0;
    std::size_t skipped = 0;  // already present in the results file
    std::size_t errors = 0;
    MetricSummary summary;
};

// Runs every record not already in the results file. Rows and traces are
// committed in dataset order, so the files do not depend on scheduling.
EvalReport run_eval(const std::vector<DatasetRecord>& records, const Pipeline& pipeline, const EvalOptions& options);

// Rows (not the summary line) of a results file; missing file → empty.
std::vector<MetricRow> read_result_rows(const std::filesystem::path& path);

}  // namespace retrorag
