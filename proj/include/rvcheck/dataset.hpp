#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rvcheck/benchkit.hpp"
#include "rvcheck/core.hpp"
#include "rvcheck/eval.hpp"
#include "rvcheck/outcome.hpp"

namespace rvcheck {

struct LoadIssues {
    std::vector<std::string> errors;    // schema violations, with record context
    std::vector<std::string> warnings;  // quality notes (e.g. non-factual without spans)

    bool ok() const { return errors.empty(); }
};

// One JSON object per line. Final labels must be factual or non-factual;
// out-of-bounds or overlapping spans are rejected.
std::vector<PassageRecord> load_passage_dataset(const std::filesystem::path& path, LoadIssues& issues);
void save_passage_dataset(const std::filesystem::path& path, const std::vector<PassageRecord>& records);

std::vector<WikiBioRecord> load_wikibio_dataset(const std::filesystem::path& path, LoadIssues& issues);
void save_wikibio_dataset(const std::filesystem::path& path, const std::vector<WikiBioRecord>& records);

// Pseudo-labelled passage view: sentences joined with spaces, gold label
// aggregated, domain Unbucketed.
PassageRecord wikibio_to_passage(const WikiBioRecord& record);

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path, LoadIssues& issues);

// One result object per line, streamed and resumable.
struct ResultLine {
    std::string id;
    std::string method_id;
    Label verdict = Label::NonFactual;
    UsageStats usage;
    bool usage_estimated = false;
    std::string trace_digest;
    Trace trace;
    std::string config_digest;
};

ResultLine make_result_line(const std::string& record_id, const DetectionOutcome& outcome,
                            const std::string& config_digest);

std::vector<ResultLine> load_results(const std::filesystem::path& path);
void append_result_line(std::ostream& out, const ResultLine& line);

// 64-bit FNV-1a, 16 hex digits. Stable across platforms.
std::string fnv1a_hex(std::string_view bytes);
std::string digest_trace(const Trace& trace);

std::string report_to_json_string(const EvaluationReport& report);

// ---- batch execution ----

using DetectFn = std::function<DetectionOutcome(const PassageRecord&)>;

struct RunOptions {
    std::filesystem::path results_path;  // empty: keep results in memory only
    bool resume = false;
    bool allow_mixed_digests = false;  // accept resumed lines from other configs
    int max_in_flight = 1;
    std::optional<size_t> limit;  // process at most this many records
    std::string method_id;
    std::string config_digest;
};

struct RunOutcome {
    std::vector<ResultLine> results;  // one per processed record, input order
    size_t newly_run = 0;
    size_t resumed = 0;
    // set when a provider abort stopped the run early; completed results are
    // already flushed
    std::optional<std::string> abort_message;
};

// Executes the method over every record lacking a persisted result, streaming
// result lines in input order. Deterministic given a deterministic method.
RunOutcome run_detection(const std::vector<PassageRecord>& records, const DetectFn& method,
                         const RunOptions& options);

struct EvaluationInputs {
    std::string method_id;
    std::string dataset_id;
    std::string config_digest;
    bool wikibio_mode = false;
    // needed for hallucination ratios in wikibio mode
    const std::vector<WikiBioRecord>* wikibio = nullptr;
    std::optional<double> selfcheck_threshold;
    std::string threshold_objective;
};

// Joins result lines with gold labels and computes the full report.
// Throws UnknownRecordId when a result references a missing record.
EvaluationReport evaluate_results(const std::vector<PassageRecord>& records,
                                  const std::vector<ResultLine>& results,
                                  const EvaluationInputs& inputs);

}  // namespace rvcheck
