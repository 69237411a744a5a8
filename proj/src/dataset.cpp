#include "rvcheck/dataset.hpp"

#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "rvcheck/errors.hpp"

namespace rvcheck {

namespace {

using nlohmann::json;

std::string line_context(const std::filesystem::path& path, long long line_no) {
    return path.filename().string() + " line " + std::to_string(line_no);
}

std::string require_string(const json& obj, const char* key, const std::string& ctx) {
    if (!obj.contains(key) || !obj.at(key).is_string())
        throw SchemaViolation(ctx + ": missing string field '" + key + "'");
    return obj.at(key).get<std::string>();
}

json usage_to_json(const UsageStats& usage) {
    return json{{"prompt_tokens", usage.prompt_tokens},
                {"completion_tokens", usage.completion_tokens},
                {"total_tokens", usage.total_tokens},
                {"wall_time", usage.wall_time},
                {"call_count", usage.call_count}};
}

UsageStats usage_from_json(const json& obj, const std::string& ctx) {
    if (!obj.is_object()) throw SchemaViolation(ctx + ": usage must be an object");
    UsageStats usage;
    usage.prompt_tokens = obj.value("prompt_tokens", 0LL);
    usage.completion_tokens = obj.value("completion_tokens", 0LL);
    usage.total_tokens = obj.value("total_tokens", usage.prompt_tokens + usage.completion_tokens);
    usage.wall_time = obj.value("wall_time", 0.0);
    usage.call_count = obj.value("call_count", 0LL);
    return usage;
}

json trace_to_json(const Trace& trace) {
    json steps = json::array();
    for (const TraceStep& step : trace) {
        steps.push_back(json{{"kind", step.kind == TraceStep::Kind::Call ? "call" : "note"},
                             {"stage", step.stage},
                             {"prompt", step.prompt},
                             {"response", step.response},
                             {"note", step.note},
                             {"usage", usage_to_json(step.usage)}});
    }
    return steps;
}

Trace trace_from_json(const json& steps, const std::string& ctx) {
    if (!steps.is_array()) throw SchemaViolation(ctx + ": trace must be an array");
    Trace trace;
    for (const json& obj : steps) {
        TraceStep step;
        std::string kind = require_string(obj, "kind", ctx);
        if (kind == "call") step.kind = TraceStep::Kind::Call;
        else if (kind == "note") step.kind = TraceStep::Kind::Note;
        else throw SchemaViolation(ctx + ": unknown trace step kind: " + kind);
        step.stage = require_string(obj, "stage", ctx);
        step.prompt = obj.value("prompt", std::string{});
        step.response = obj.value("response", std::string{});
        step.note = obj.value("note", std::string{});
        if (obj.contains("usage")) step.usage = usage_from_json(obj.at("usage"), ctx);
        trace.push_back(std::move(step));
    }
    return trace;
}

json metrics_to_json(const MetricBundle& bundle) {
    return json{{"precision", bundle.precision},
                {"recall", bundle.recall},
                {"f1", bundle.f1},
                {"accuracy", bundle.accuracy},
                {"counts",
                 {{"tp", bundle.counts.tp},
                  {"fp", bundle.counts.fp},
                  {"fn", bundle.counts.fn},
                  {"tn", bundle.counts.tn}}}};
}

}  // namespace

std::vector<PassageRecord> load_passage_dataset(const std::filesystem::path& path,
                                                LoadIssues& issues) {
    std::ifstream in(path);
    if (!in) throw SchemaViolation("cannot open dataset: " + path.string());
    std::vector<PassageRecord> records;
    std::set<std::string> seen_ids;
    std::string line;
    long long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string ctx = line_context(path, line_no);
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            issues.errors.push_back(ctx + ": " + e.what());
            continue;
        }
        try {
            PassageRecord record;
            record.id = require_string(obj, "id", ctx);
            if (record.id.empty()) throw SchemaViolation(ctx + ": empty id");
            if (!seen_ids.insert(record.id).second)
                throw SchemaViolation(ctx + ": duplicate id: " + record.id);
            record.entity = EntityRef::make(require_string(obj, "entity", ctx));
            record.passage = require_string(obj, "passage", ctx);
            if (record.passage.empty()) throw SchemaViolation(ctx + ": empty passage");
            record.gold_label = label_from_string(require_string(obj, "label", ctx));
            if (record.gold_label == Label::Unverifiable)
                throw SchemaViolation(ctx + ": final labels must be factual or non-factual");
            record.domain = domain_from_string(obj.value("domain", std::string{}));
            if (obj.contains("marked_spans")) {
                for (const json& span : obj.at("marked_spans")) {
                    MarkedSpan marked;
                    marked.start = span.at("start").get<size_t>();
                    marked.end = span.at("end").get<size_t>();
                    marked.note = span.value("note", std::string{});
                    record.marked_spans.push_back(std::move(marked));
                }
                if (auto problem = check_spans(record.passage, record.marked_spans))
                    throw SchemaViolation(ctx + ": " + *problem);
            }
            if (obj.contains("provenance")) {
                const json& prov = obj.at("provenance");
                record.provenance.generator_model_id =
                    prov.value("generator_model_id", std::string{});
                if (prov.contains("generation_temperature") &&
                    prov.at("generation_temperature").is_number())
                    record.provenance.generation_temperature =
                        prov.at("generation_temperature").get<double>();
            }
            if (record.gold_label == Label::NonFactual && record.marked_spans.empty())
                issues.warnings.push_back(ctx + ": non-factual passage carries no marked spans");
            records.push_back(std::move(record));
        } catch (const json::exception& e) {
            issues.errors.push_back(ctx + ": " + e.what());
        } catch (const SchemaViolation& e) {
            issues.errors.push_back(e.what());
        }
    }
    return records;
}

void save_passage_dataset(const std::filesystem::path& path,
                          const std::vector<PassageRecord>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw SchemaViolation("cannot write dataset: " + path.string());
    for (const PassageRecord& record : records) {
        json obj{{"id", record.id},
                 {"entity", record.entity.name},
                 {"passage", record.passage},
                 {"label", to_string(record.gold_label)},
                 {"domain", to_string(record.domain)}};
        if (!record.marked_spans.empty()) {
            json spans = json::array();
            for (const MarkedSpan& span : record.marked_spans)
                spans.push_back(json{{"start", span.start}, {"end", span.end}, {"note", span.note}});
            obj["marked_spans"] = std::move(spans);
        }
        if (!record.provenance.generator_model_id.empty()) {
            json prov{{"generator_model_id", record.provenance.generator_model_id}};
            if (record.provenance.generation_temperature)
                prov["generation_temperature"] = *record.provenance.generation_temperature;
            obj["provenance"] = std::move(prov);
        }
        out << obj.dump() << '\n';
    }
}

std::vector<WikiBioRecord> load_wikibio_dataset(const std::filesystem::path& path,
                                                LoadIssues& issues) {
    std::ifstream in(path);
    if (!in) throw SchemaViolation("cannot open dataset: " + path.string());
    std::vector<WikiBioRecord> records;
    std::set<std::string> seen_ids;
    std::string line;
    long long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string ctx = line_context(path, line_no);
        try {
            json obj = json::parse(line);
            WikiBioRecord record;
            record.id = require_string(obj, "id", ctx);
            if (record.id.empty()) throw SchemaViolation(ctx + ": empty id");
            if (!seen_ids.insert(record.id).second)
                throw SchemaViolation(ctx + ": duplicate id: " + record.id);
            record.entity = EntityRef::make(require_string(obj, "entity", ctx));
            if (!obj.contains("sentences") || !obj.at("sentences").is_array() ||
                obj.at("sentences").empty())
                throw SchemaViolation(ctx + ": sentences must be a non-empty array");
            for (const json& sentence : obj.at("sentences")) {
                SentenceRecord parsed;
                parsed.text = require_string(sentence, "text", ctx);
                if (parsed.text.empty()) throw SchemaViolation(ctx + ": empty sentence text");
                parsed.label = label_from_string(require_string(sentence, "label", ctx));
                if (parsed.label == Label::Unverifiable)
                    throw SchemaViolation(ctx + ": sentence labels must be factual or non-factual");
                record.sentences.push_back(std::move(parsed));
            }
            records.push_back(std::move(record));
        } catch (const json::exception& e) {
            issues.errors.push_back(ctx + ": " + e.what());
        } catch (const SchemaViolation& e) {
            issues.errors.push_back(e.what());
        }
    }
    return records;
}

void save_wikibio_dataset(const std::filesystem::path& path,
                          const std::vector<WikiBioRecord>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw SchemaViolation("cannot write dataset: " + path.string());
    for (const WikiBioRecord& record : records) {
        json sentences = json::array();
        for (const SentenceRecord& sentence : record.sentences)
            sentences.push_back(json{{"text", sentence.text}, {"label", to_string(sentence.label)}});
        json obj{{"id", record.id}, {"entity", record.entity.name}, {"sentences", sentences}};
        out << obj.dump() << '\n';
    }
}

PassageRecord wikibio_to_passage(const WikiBioRecord& record) {
    PassageRecord passage;
    passage.id = record.id;
    passage.entity = record.entity;
    std::string joined;
    for (const SentenceRecord& sentence : record.sentences) {
        if (!joined.empty()) joined += ' ';
        joined += sentence.text;
    }
    passage.passage = std::move(joined);
    passage.gold_label = aggregate_sentence_labels(record.sentences);
    passage.domain = Domain::Unbucketed;
    return passage;
}

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path,
                                               LoadIssues& issues) {
    std::ifstream in(path);
    if (!in) throw SchemaViolation("cannot open annotations: " + path.string());
    std::vector<AnnotationRecord> records;
    std::string line;
    long long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string ctx = line_context(path, line_no);
        try {
            json obj = json::parse(line);
            AnnotationRecord record;
            record.passage_id = require_string(obj, "passage_id", ctx);
            record.annotator_id = require_string(obj, "annotator_id", ctx);
            record.stage1_label = label_from_string(require_string(obj, "stage1_label", ctx));
            if (obj.contains("stage2_label") && !obj.at("stage2_label").is_null())
                record.stage2_label =
                    label_from_string(obj.at("stage2_label").get<std::string>());
            if (obj.contains("marked_spans")) {
                for (const json& span : obj.at("marked_spans")) {
                    MarkedSpan marked;
                    marked.start = span.at("start").get<size_t>();
                    marked.end = span.at("end").get<size_t>();
                    marked.note = span.value("note", std::string{});
                    record.marked_spans.push_back(std::move(marked));
                }
            }
            records.push_back(std::move(record));
        } catch (const json::exception& e) {
            issues.errors.push_back(ctx + ": " + e.what());
        } catch (const SchemaViolation& e) {
            issues.errors.push_back(e.what());
        }
    }
    return records;
}

ResultLine make_result_line(const std::string& record_id, const DetectionOutcome& outcome,
                            const std::string& config_digest) {
    ResultLine line;
    line.id = record_id;
    line.method_id = outcome.method_id;
    line.verdict = outcome.verdict;
    line.usage = outcome.usage;
    line.usage_estimated = outcome.usage_estimated;
    line.trace = outcome.trace;
    line.trace_digest = digest_trace(outcome.trace);
    line.config_digest = config_digest;
    return line;
}

std::vector<ResultLine> load_results(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaViolation("cannot open results: " + path.string());
    std::vector<ResultLine> results;
    std::string line;
    long long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string ctx = line_context(path, line_no);
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw SchemaViolation(ctx + ": " + e.what());
        }
        ResultLine parsed;
        parsed.id = require_string(obj, "id", ctx);
        parsed.method_id = require_string(obj, "method_id", ctx);
        parsed.verdict = label_from_string(require_string(obj, "verdict", ctx));
        if (parsed.verdict == Label::Unverifiable)
            throw SchemaViolation(ctx + ": verdict must be factual or non-factual");
        if (!obj.contains("usage")) throw SchemaViolation(ctx + ": missing usage");
        parsed.usage = usage_from_json(obj.at("usage"), ctx);
        parsed.usage_estimated = obj.value("usage_estimated", false);
        parsed.trace_digest = require_string(obj, "trace_digest", ctx);
        if (obj.contains("trace")) parsed.trace = trace_from_json(obj.at("trace"), ctx);
        parsed.config_digest = require_string(obj, "config_digest", ctx);
        if (digest_trace(parsed.trace) != parsed.trace_digest)
            throw SchemaViolation(ctx + ": trace digest mismatch (corrupted line?)");
        results.push_back(std::move(parsed));
    }
    return results;
}

void append_result_line(std::ostream& out, const ResultLine& line) {
    json obj{{"id", line.id},
             {"method_id", line.method_id},
             {"verdict", to_string(line.verdict)},
             {"usage", usage_to_json(line.usage)},
             {"usage_estimated", line.usage_estimated},
             {"trace_digest", line.trace_digest},
             {"trace", trace_to_json(line.trace)},
             {"config_digest", line.config_digest}};
    out << obj.dump() << '\n';
}

std::string fnv1a_hex(std::string_view bytes) {
    uint64_t hash = 14695981039346656037ULL;
    for (unsigned char byte : bytes) {
        hash ^= byte;
        hash *= 1099511628211ULL;
    }
    static const char* digits = "0123456789abcdef";
    std::string hex(16, '0');
    for (int i = 15; i >= 0; --i) {
        hex[static_cast<size_t>(i)] = digits[hash & 0xF];
        hash >>= 4;
    }
    return hex;
}

std::string digest_trace(const Trace& trace) {
    return fnv1a_hex(trace_to_json(trace).dump());
}

std::string report_to_json_string(const EvaluationReport& report) {
    json obj;
    obj["method_id"] = report.method_id;
    obj["dataset_id"] = report.dataset_id;
    obj["config_digest"] = report.config_digest;
    obj["usage_estimated"] = report.usage_estimated;
    obj["overall"] = metrics_to_json(report.overall);
    json domains = json::object();
    for (const auto& [domain, bundle] : report.per_domain)
        domains[to_string(domain)] = metrics_to_json(bundle);
    obj["per_domain"] = std::move(domains);
    if (report.min_hal_ratio_rejected) obj["min_hal_ratio_rejected"] = *report.min_hal_ratio_rejected;
    else obj["min_hal_ratio_rejected"] = nullptr;
    obj["avg_token_cost"] = report.avg_token_cost;
    obj["avg_time_delay"] = report.avg_time_delay;
    if (report.selfcheck_threshold) obj["selfcheck_threshold"] = *report.selfcheck_threshold;
    else obj["selfcheck_threshold"] = nullptr;
    obj["threshold_objective"] = report.threshold_objective;
    return obj.dump(2) + "\n";
}

// ---- batch execution ----

namespace {

struct StreamWriter {
    std::ofstream out;
    bool enabled = false;

    void open(const std::filesystem::path& path, bool append) {
        if (path.empty()) return;
        out.open(path, append ? std::ios::app : std::ios::trunc);
        if (!out) throw SchemaViolation("cannot write results: " + path.string());
        enabled = true;
    }

    void write(const ResultLine& line) {
        if (!enabled) return;
        append_result_line(out, line);
        out.flush();
    }
};

}  // namespace

RunOutcome run_detection(const std::vector<PassageRecord>& records, const DetectFn& method,
                         const RunOptions& options) {
    std::map<std::string, ResultLine> persisted;
    bool resuming = false;
    if (options.resume && !options.results_path.empty() &&
        std::filesystem::exists(options.results_path)) {
        std::set<std::string> known;
        for (const PassageRecord& record : records) known.insert(record.id);
        for (ResultLine& line : load_results(options.results_path)) {
            if (!known.count(line.id)) throw UnknownRecordId(line.id);
            if (!options.allow_mixed_digests && line.config_digest != options.config_digest)
                throw SchemaViolation("resume config digest mismatch for record " + line.id +
                                      " (got " + line.config_digest + ", expected " +
                                      options.config_digest + ")");
            persisted[line.id] = std::move(line);
        }
        resuming = true;
    } else if (!options.resume && !options.results_path.empty() &&
               std::filesystem::exists(options.results_path) &&
               std::filesystem::file_size(options.results_path) > 0) {
        throw SchemaViolation("results file already exists: " + options.results_path.string() +
                              " (pass --resume to continue it)");
    }

    size_t count = records.size();
    if (options.limit) count = std::min(count, *options.limit);

    StreamWriter writer;
    writer.open(options.results_path, resuming);

    RunOutcome outcome;
    std::vector<std::optional<ResultLine>> slots(count);
    std::vector<bool> reused(count, false);

    std::mutex mutex;
    size_t flushed = 0;
    std::atomic<size_t> next{0};
    std::atomic<bool> stop{false};
    std::optional<std::string> abort_message;
    std::exception_ptr fatal;

    auto flush_ready = [&] {
        // caller holds the mutex
        while (flushed < count && slots[flushed]) {
            if (!reused[flushed]) writer.write(*slots[flushed]);
            outcome.results.push_back(*slots[flushed]);
            if (reused[flushed]) ++outcome.resumed;
            else ++outcome.newly_run;
            ++flushed;
        }
    };

    auto work = [&] {
        while (!stop.load()) {
            size_t index = next.fetch_add(1);
            if (index >= count) return;
            const PassageRecord& record = records[index];
            auto it = persisted.find(record.id);
            try {
                ResultLine line;
                bool from_cache = it != persisted.end();
                if (from_cache) {
                    line = it->second;
                } else {
                    DetectionOutcome detected = method(record);
                    line = make_result_line(record.id, detected, options.config_digest);
                }
                std::lock_guard<std::mutex> lock(mutex);
                slots[index] = std::move(line);
                reused[index] = from_cache;
                flush_ready();
            } catch (const AuthError& e) {
                std::lock_guard<std::mutex> lock(mutex);
                if (!abort_message) abort_message = std::string("auth error: ") + e.what();
                stop.store(true);
            } catch (const RateLimited& e) {
                std::lock_guard<std::mutex> lock(mutex);
                if (!abort_message) abort_message = std::string("rate limited: ") + e.what();
                stop.store(true);
            } catch (const TransportError& e) {
                std::lock_guard<std::mutex> lock(mutex);
                if (!abort_message) abort_message = std::string("transport error: ") + e.what();
                stop.store(true);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mutex);
                if (!fatal) fatal = std::current_exception();
                stop.store(true);
            }
        }
    };

    size_t workers = static_cast<size_t>(std::max(1, options.max_in_flight));
    workers = std::min(workers, std::max<size_t>(count, 1));
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (size_t i = 0; i < workers; ++i) pool.emplace_back(work);
        for (std::thread& thread : pool) thread.join();
    }

    if (fatal) std::rethrow_exception(fatal);
    outcome.abort_message = abort_message;
    return outcome;
}

EvaluationReport evaluate_results(const std::vector<PassageRecord>& records,
                                  const std::vector<ResultLine>& results,
                                  const EvaluationInputs& inputs) {
    std::map<std::string, const PassageRecord*> by_id;
    for (const PassageRecord& record : records) by_id[record.id] = &record;

    std::map<std::string, const WikiBioRecord*> wikibio_by_id;
    if (inputs.wikibio)
        for (const WikiBioRecord& record : *inputs.wikibio) wikibio_by_id[record.id] = &record;

    std::vector<std::pair<Label, Label>> overall_pairs;
    std::map<Domain, std::vector<std::pair<Label, Label>>> domain_pairs;
    std::vector<WikiBioRecord> rejected;
    std::set<std::string> seen;
    double tokens = 0.0;
    double seconds = 0.0;
    bool usage_estimated = false;

    for (const ResultLine& line : results) {
        auto it = by_id.find(line.id);
        if (it == by_id.end()) throw UnknownRecordId(line.id);
        if (!seen.insert(line.id).second)
            throw SchemaViolation("duplicate result for record " + line.id);
        const PassageRecord& record = *it->second;
        overall_pairs.emplace_back(line.verdict, record.gold_label);
        domain_pairs[record.domain].emplace_back(line.verdict, record.gold_label);
        tokens += static_cast<double>(line.usage.total_tokens);
        seconds += line.usage.wall_time;
        usage_estimated = usage_estimated || line.usage_estimated;
        if (inputs.wikibio_mode && line.verdict == Label::NonFactual) {
            auto wiki = wikibio_by_id.find(line.id);
            if (wiki == wikibio_by_id.end()) throw UnknownRecordId(line.id);
            rejected.push_back(*wiki->second);
        }
    }

    EvaluationReport report;
    report.overall = compute_metrics(overall_pairs);
    for (const auto& [domain, pairs] : domain_pairs)
        report.per_domain[domain] = compute_metrics(pairs);
    if (inputs.wikibio_mode)
        report.min_hal_ratio_rejected = min_hallucination_ratio_rejected(rejected);
    report.avg_token_cost = tokens / static_cast<double>(results.size());
    report.avg_time_delay = seconds / static_cast<double>(results.size());
    report.method_id = inputs.method_id;
    report.dataset_id = inputs.dataset_id;
    report.config_digest = inputs.config_digest;
    report.usage_estimated = usage_estimated;
    report.selfcheck_threshold = inputs.selfcheck_threshold;
    report.threshold_objective = inputs.threshold_objective;
    return report;
}

}  // namespace rvcheck
