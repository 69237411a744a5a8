#include "rvcheck/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rvcheck/baselines.hpp"
#include "rvcheck/benchkit.hpp"
#include "rvcheck/dataset.hpp"
#include "rvcheck/errors.hpp"
#include "rvcheck/eval.hpp"
#include "rvcheck/rv.hpp"

namespace rvcheck {

namespace {

std::string format_double(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.6g", value);
    return buffer;
}

void apply_profile(RunConfig& config, bool temperature_set, bool top_p_set, bool top_k_set) {
    if (config.profile != "small") return;
    if (!temperature_set) config.temperature = 0.1;
    if (!top_p_set) config.top_p = 0.05;
    if (!top_k_set) config.top_k = 1;
}

CompletionDefaults defaults_from(const RunConfig& config) {
    CompletionDefaults defaults;
    defaults.model_id = config.model_id;
    defaults.temperature = config.temperature;
    defaults.top_p = config.top_p;
    defaults.top_k = config.top_k;
    return defaults;
}

std::unique_ptr<Provider> build_provider(const RunConfig& config) {
    if (config.provider == "mock") {
        if (config.mock_script.empty())
            throw SchemaViolation("the mock provider needs --mock-script");
        return std::make_unique<MockProvider>(MockScript::from_file(config.mock_script));
    }
    HttpProviderConfig http = HttpProviderConfig::from_env();
    if (http.base_url.empty())
        throw SchemaViolation("the live provider needs RV_API_BASE in the environment");
    http.max_in_flight = config.max_in_flight;
    return std::make_unique<HttpProvider>(std::move(http));
}

PromptSet resolve_prompts(const RunConfig& config) {
    if (config.prompts_dir.empty()) return PromptSet::embedded();
    return PromptSet::load_dir(config.prompts_dir);
}

// The detection closure owns the provider, prompt set, and scorer so the
// runner stays method-agnostic.
DetectFn build_method(const RunConfig& config, std::shared_ptr<Provider> provider,
                      std::shared_ptr<const PromptSet> prompts) {
    CompletionDefaults defaults = defaults_from(config);
    if (config.method_id == "all-false") {
        return [](const PassageRecord& record) { return detect_all_false(record); };
    }
    if (config.method_id == "zero-shot") {
        return [provider, prompts, defaults](const PassageRecord& record) {
            return detect_zero_shot(record, *provider, *prompts, defaults);
        };
    }
    if (config.method_id == "lmvslm") {
        LmvslmOptions options;
        options.max_turns = config.max_turns;
        options.original_examinee_prompt = config.lmvslm_original_prompt;
        options.defaults = defaults;
        return [provider, prompts, options](const PassageRecord& record) {
            return detect_lmvslm_revised(record, *provider, *provider, options, *prompts);
        };
    }
    if (config.method_id == "selfcheck") {
        SelfCheckOptions options;
        options.n_samples = config.n_samples;
        options.defaults = defaults;
        ScorerFn scorer = resolve_scorer(config.scorer_id);
        double threshold = config.selfcheck_threshold;
        return [provider, prompts, options, scorer, threshold](const PassageRecord& record) {
            return detect_selfcheck(record, options, scorer, threshold, *provider, *prompts);
        };
    }
    RvOptions options;
    options.variant = config.method_id == "rv-qg" ? RvVariant::QG : RvVariant::EM;
    options.matching = config.matching == "fuzzy" ? Matching::Fuzzy : Matching::Exact;
    options.em_threshold = config.em_threshold;
    options.defaults = defaults;
    return [provider, prompts, options](const PassageRecord& record) {
        return detect_rv(record, options, *provider, *prompts);
    };
}

std::vector<PassageRecord> load_any_dataset(const std::string& path, bool wikibio_mode,
                                            std::vector<WikiBioRecord>& wikibio_out) {
    LoadIssues issues;
    std::vector<PassageRecord> records;
    if (wikibio_mode) {
        wikibio_out = load_wikibio_dataset(path, issues);
        records.reserve(wikibio_out.size());
        for (const WikiBioRecord& record : wikibio_out) records.push_back(wikibio_to_passage(record));
    } else {
        records = load_passage_dataset(path, issues);
    }
    for (const std::string& warning : issues.warnings)
        std::cerr << "warning: " << warning << "\n";
    if (!issues.ok()) {
        for (const std::string& error : issues.errors) std::cerr << "error: " << error << "\n";
        throw SchemaViolation("dataset failed validation with " +
                              std::to_string(issues.errors.size()) + " error(s)");
    }
    if (records.empty()) throw EmptyInput("dataset has no records: " + path);
    return records;
}

struct DetectArgs {
    RunConfig config;
    std::string dataset;
    std::string out;
    bool resume = false;
    bool allow_mixed_digests = false;
    bool wikibio_mode = false;
    bool nonfactual_only = false;
    std::optional<size_t> limit;
};

int run_detect(const DetectArgs& args) {
    std::vector<WikiBioRecord> wikibio;
    std::vector<PassageRecord> records = load_any_dataset(args.dataset, args.wikibio_mode, wikibio);
    if (args.nonfactual_only) {
        std::vector<PassageRecord> filtered;
        for (const PassageRecord& record : records)
            if (record.gold_label == Label::NonFactual) filtered.push_back(record);
        records = std::move(filtered);
        if (records.empty()) throw EmptyInput("no non-factual records in the dataset");
    }

    std::shared_ptr<Provider> provider;
    if (args.config.method_id != "all-false") provider = build_provider(args.config);
    auto prompts = std::make_shared<const PromptSet>(resolve_prompts(args.config));
    DetectFn method = build_method(args.config, provider, prompts);

    RunOptions options;
    options.results_path = args.out;
    options.resume = args.resume;
    options.allow_mixed_digests = args.allow_mixed_digests;
    options.max_in_flight = args.config.max_in_flight;
    options.limit = args.limit;
    options.method_id = args.config.method_id;
    options.config_digest = config_digest(args.config);

    RunOutcome outcome = run_detection(records, method, options);
    std::cout << "processed " << outcome.results.size() << " record(s) (" << outcome.newly_run
              << " new, " << outcome.resumed << " resumed) -> " << args.out << "\n";
    if (outcome.abort_message) {
        std::cerr << "provider abort: " << *outcome.abort_message << "\n";
        if (outcome.results.empty()) return kExitProviderAbort;
        std::cerr << "partial results kept; re-run with --resume to continue\n";
        return kExitPartial;
    }
    return kExitOk;
}

struct EvalArgs {
    std::string dataset;
    std::string results;
    std::string out;
    bool by_domain = false;
    bool wikibio_mode = false;
    bool allow_mixed_digests = false;
    std::optional<double> selfcheck_threshold;
    std::string threshold_objective = "f1";
};

int run_eval(const EvalArgs& args) {
    std::vector<WikiBioRecord> wikibio;
    std::vector<PassageRecord> records = load_any_dataset(args.dataset, args.wikibio_mode, wikibio);
    std::vector<ResultLine> results = load_results(args.results);
    if (results.empty()) throw EmptyInput("results file has no lines: " + args.results);

    const std::string& method_id = results.front().method_id;
    std::string digest = results.front().config_digest;
    for (const ResultLine& line : results) {
        if (line.method_id != method_id)
            throw SchemaViolation("results mix methods: " + method_id + " and " + line.method_id);
        if (line.config_digest != digest) {
            if (!args.allow_mixed_digests)
                throw SchemaViolation("results mix config digests (" + digest + " and " +
                                      line.config_digest +
                                      "); pass --allow-mixed-digests to accept");
            digest = "mixed";
        }
    }

    EvaluationInputs inputs;
    inputs.method_id = method_id;
    inputs.dataset_id = std::filesystem::path(args.dataset).stem().string();
    inputs.config_digest = digest;
    inputs.wikibio_mode = args.wikibio_mode;
    inputs.wikibio = args.wikibio_mode ? &wikibio : nullptr;
    inputs.selfcheck_threshold = args.selfcheck_threshold;
    if (args.selfcheck_threshold) inputs.threshold_objective = args.threshold_objective;

    EvaluationReport report = evaluate_results(records, results, inputs);
    std::cout << render_report_table(report, args.by_domain, args.wikibio_mode);
    if (!args.out.empty()) {
        std::ofstream out(args.out, std::ios::trunc);
        if (!out) throw SchemaViolation("cannot write report: " + args.out);
        out << report_to_json_string(report);
        std::cout << "report written to " << args.out << "\n";
    }
    return kExitOk;
}

struct CalibrateArgs {
    std::string scores;
    std::string out;
    std::string set_id;
};

int run_calibrate(const CalibrateArgs& args) {
    std::ifstream in(args.scores);
    if (!in) throw SchemaViolation("cannot open scores: " + args.scores);
    std::vector<std::pair<double, Label>> scores;
    std::string line;
    long long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw SchemaViolation("scores line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!obj.contains("score") || !obj.at("score").is_number())
            throw SchemaViolation("scores line " + std::to_string(line_no) +
                                  ": missing numeric field 'score'");
        Label label = label_from_string(obj.value("label", std::string{}));
        if (label == Label::Unverifiable)
            throw SchemaViolation("scores line " + std::to_string(line_no) +
                                  ": labels must be factual or non-factual");
        scores.emplace_back(obj.at("score").get<double>(), label);
    }
    std::string set_id =
        args.set_id.empty() ? std::filesystem::path(args.scores).stem().string() : args.set_id;
    Threshold threshold = optimize_threshold(scores, set_id);
    std::cout << "threshold: " << format_double(threshold.value) << "\n"
              << "f1 at threshold: " << format_double(threshold.objective_at_value) << "\n"
              << "calibration set: " << threshold.calibration_set_id << "\n";
    if (!args.out.empty()) {
        nlohmann::json obj{{"threshold", threshold.value},
                           {"objective_at_value", threshold.objective_at_value},
                           {"objective", "f1"},
                           {"calibration_set_id", threshold.calibration_set_id}};
        std::ofstream out(args.out, std::ios::trunc);
        if (!out) throw SchemaViolation("cannot write threshold: " + args.out);
        out << obj.dump(2) << "\n";
        std::cout << "threshold written to " << args.out << "\n";
    }
    return kExitOk;
}

std::ostream& open_or_stdout(const std::string& path, std::ofstream& file) {
    if (path.empty()) return std::cout;
    file.open(path, std::ios::trunc);
    if (!file) throw SchemaViolation("cannot write output: " + path);
    return file;
}

int run_bench_bucket(const std::string& hit_counts, const std::string& out_path) {
    std::vector<EntityCandidate> candidates = load_hit_counts(hit_counts);
    std::ofstream file;
    std::ostream& out = open_or_stdout(out_path, file);
    for (const EntityCandidate& candidate : candidates)
        out << candidate.entity.name << '\t' << candidate.hit_count << '\t'
            << to_string(bucket_entity(candidate)) << '\n';
    return kExitOk;
}

int run_bench_sample(const std::string& hit_counts, size_t n_per_bucket, uint64_t seed,
                     const std::string& out_path) {
    std::vector<EntityCandidate> candidates = load_hit_counts(hit_counts);
    auto sampled = sample_entities(candidates, n_per_bucket, seed);
    std::ofstream file;
    std::ostream& out = open_or_stdout(out_path, file);
    for (Domain domain : {Domain::Low, Domain::Medium, Domain::High}) {
        for (const EntityCandidate& candidate : sampled[domain])
            out << candidate.entity.name << '\t' << candidate.hit_count << '\t'
                << to_string(domain) << '\n';
    }
    return kExitOk;
}

struct BenchGenerateArgs {
    RunConfig config;
    std::vector<std::string> entities;
    std::string entities_file;
    std::string out;
    bool prompts_only = false;
};

int run_bench_generate(const BenchGenerateArgs& args) {
    std::vector<std::string> entities = args.entities;
    if (!args.entities_file.empty()) {
        std::ifstream in(args.entities_file);
        if (!in) throw SchemaViolation("cannot open entities file: " + args.entities_file);
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) entities.push_back(line);
        }
    }
    if (entities.empty()) throw EmptyInput("no entities given (use --entity or --entities-file)");

    PromptSet prompts = resolve_prompts(args.config);
    if (args.prompts_only) {
        std::ofstream file;
        std::ostream& out = open_or_stdout(args.out, file);
        for (const std::string& name : entities)
            out << generation_prompt(EntityRef::make(name), prompts) << '\n';
        return kExitOk;
    }

    std::unique_ptr<Provider> provider = build_provider(args.config);
    CompletionDefaults defaults = defaults_from(args.config);
    std::ofstream file;
    std::ostream& out = open_or_stdout(args.out, file);
    size_t index = 0;
    for (const std::string& name : entities) {
        EntityRef entity = EntityRef::make(name);
        CompletionResult result =
            provider->complete(make_request(defaults, generation_prompt(entity, prompts)));
        char id[32];
        std::snprintf(id, sizeof(id), "gen-%04zu", ++index);
        nlohmann::json obj{{"id", id},
                           {"entity", name},
                           {"passage", result.text},
                           {"provenance",
                            {{"generator_model_id", args.config.model_id},
                             {"generation_temperature", args.config.temperature}}}};
        out << obj.dump() << '\n';
    }
    return kExitOk;
}

int run_bench_validate(const std::string& annotations_path, const std::string& out_path) {
    LoadIssues issues;
    std::vector<AnnotationRecord> records = load_annotations(annotations_path, issues);
    for (const std::string& error : issues.errors) std::cerr << "error: " << error << "\n";
    AnnotationValidation validation = validate_annotations(records);
    size_t errors = issues.errors.size();
    for (const AnnotationIssue& issue : validation.issues) {
        std::cerr << (issue.is_error ? "error: " : "warning: ") << issue.passage_id << ": "
                  << issue.message << "\n";
        if (issue.is_error) ++errors;
    }
    std::cout << validation.finals.size() << " final annotation(s), " << errors << " error(s)\n";
    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::trunc);
        if (!out) throw SchemaViolation("cannot write finals: " + out_path);
        for (const FinalAnnotation& final : validation.finals) {
            nlohmann::json spans = nlohmann::json::array();
            for (const MarkedSpan& span : final.marked_spans)
                spans.push_back(nlohmann::json{
                    {"start", span.start}, {"end", span.end}, {"note", span.note}});
            nlohmann::json obj{{"passage_id", final.passage_id},
                               {"annotator_id", final.annotator_id},
                               {"label", to_string(final.label)},
                               {"marked_spans", spans}};
            out << obj.dump() << '\n';
        }
    }
    return errors == 0 ? kExitOk : kExitValidation;
}

struct BenchKappaArgs {
    std::string annotations;
    std::string fleiss_counts;
};

int run_bench_kappa(const BenchKappaArgs& args) {
    if (!args.fleiss_counts.empty()) {
        std::ifstream in(args.fleiss_counts);
        if (!in) throw SchemaViolation("cannot open counts: " + args.fleiss_counts);
        std::vector<std::vector<long long>> counts;
        std::string line;
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            std::vector<long long> row;
            std::istringstream fields(line);
            std::string field;
            while (fields >> field) row.push_back(std::stoll(field));
            counts.push_back(std::move(row));
        }
        char line_out[64];
        std::snprintf(line_out, sizeof(line_out), "fleiss kappa: %.6f", fleiss_kappa(counts));
        std::cout << line_out << "\n";
        return kExitOk;
    }

    LoadIssues issues;
    std::vector<AnnotationRecord> records = load_annotations(args.annotations, issues);
    if (!issues.ok()) {
        for (const std::string& error : issues.errors) std::cerr << "error: " << error << "\n";
        throw SchemaViolation("annotations failed to parse");
    }
    AnnotationValidation validation = validate_annotations(records);
    std::map<std::string, std::map<std::string, Label>> by_passage;
    std::set<std::string> annotators;
    for (const FinalAnnotation& final : validation.finals) {
        by_passage[final.passage_id][final.annotator_id] = final.label;
        annotators.insert(final.annotator_id);
    }
    if (annotators.size() != 2)
        throw SchemaViolation("cohen's kappa needs exactly 2 annotators, found " +
                              std::to_string(annotators.size()));
    auto it = annotators.begin();
    const std::string first = *it++;
    const std::string second = *it;
    std::vector<Label> rater_a;
    std::vector<Label> rater_b;
    for (const auto& [passage_id, labels] : by_passage) {
        auto a = labels.find(first);
        auto b = labels.find(second);
        if (a == labels.end() || b == labels.end()) continue;  // unpaired passage
        rater_a.push_back(a->second);
        rater_b.push_back(b->second);
    }
    char line_out[96];
    std::snprintf(line_out, sizeof(line_out), "cohen's kappa: %.6f (%zu paired passage(s))",
                  cohens_kappa(rater_a, rater_b), rater_a.size());
    std::cout << line_out << "\n";
    return kExitOk;
}

void add_provider_options(CLI::App* cmd, RunConfig& config) {
    cmd->add_option("--provider", config.provider, "Provider backend")
        ->check(CLI::IsMember({"mock", "live"}));
    cmd->add_option("--mock-script", config.mock_script, "Scripted responses for the mock provider")
        ->check(CLI::ExistingFile);
    cmd->add_option("--model", config.model_id, "Model identifier sent to the provider");
    cmd->add_option("--prompts-dir", config.prompts_dir, "Directory of prompt template overrides")
        ->check(CLI::ExistingDirectory);
}

}  // namespace

std::string config_digest(const RunConfig& config) {
    PromptSet prompts =
        config.prompts_dir.empty() ? PromptSet::embedded() : PromptSet::load_dir(config.prompts_dir);
    std::ostringstream canon;
    canon << "method=" << config.method_id << ";matching=" << config.matching
          << ";provider=" << config.provider << ";mock_script=" << config.mock_script
          << ";model=" << config.model_id << ";profile=" << config.profile
          << ";temperature=" << format_double(config.temperature)
          << ";top_p=" << format_double(config.top_p)
          << ";top_k=" << (config.top_k ? std::to_string(*config.top_k) : "none")
          << ";em_threshold=" << format_double(config.em_threshold)
          << ";n_samples=" << config.n_samples << ";scorer=" << config.scorer_id
          << ";selfcheck_threshold=" << format_double(config.selfcheck_threshold)
          << ";max_turns=" << config.max_turns
          << ";lmvslm_original=" << (config.lmvslm_original_prompt ? 1 : 0)
          << ";seed=" << config.seed;
    canon << ";prompts=" << fnv1a_hex(prompts.qg_construct + "\x1f" + prompts.qg_example + "\x1f" +
                                      prompts.qg_retry + "\x1f" + prompts.qg_access + "\x1f" +
                                      prompts.em_construct + "\x1f" + prompts.em_access + "\x1f" +
                                      prompts.fuzzy_match + "\x1f" + prompts.zero_shot + "\x1f" +
                                      prompts.generation + "\x1f" + prompts.lmvslm_examiner_open +
                                      "\x1f" + prompts.lmvslm_examiner_followup + "\x1f" +
                                      prompts.lmvslm_reprompt + "\x1f" + prompts.lmvslm_examinee +
                                      "\x1f" + prompts.lmvslm_examinee_original);
    return fnv1a_hex(canon.str());
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Zero-resource hallucination detection toolkit"};
    app.require_subcommand(1);

    DetectArgs detect;
    CLI::App* detect_cmd = app.add_subcommand("detect", "Run a detection method over a dataset");
    detect_cmd->add_option("--dataset", detect.dataset, "Input dataset (JSONL)")
        ->required()
        ->check(CLI::ExistingFile);
    detect_cmd->add_option("--method", detect.config.method_id, "Detection method")
        ->check(CLI::IsMember({"all-false", "zero-shot", "lmvslm", "selfcheck", "rv-qg", "rv-em"}));
    detect_cmd->add_option("--matching", detect.config.matching, "Entity-answer matching mode")
        ->check(CLI::IsMember({"exact", "fuzzy"}));
    add_provider_options(detect_cmd, detect.config);
    detect_cmd->add_option("--profile", detect.config.profile, "Request parameter profile")
        ->check(CLI::IsMember({"default", "small"}));
    CLI::Option* temp_opt =
        detect_cmd->add_option("--temperature", detect.config.temperature, "Sampling temperature");
    CLI::Option* top_p_opt = detect_cmd->add_option("--top-p", detect.config.top_p, "Nucleus mass");
    CLI::Option* top_k_opt = detect_cmd->add_option("--top-k", detect.config.top_k, "Top-k cutoff");
    detect_cmd->add_option("--em-threshold", detect.config.em_threshold,
                           "Match percentage needed for a factual verdict");
    detect_cmd->add_option("--n-samples", detect.config.n_samples,
                           "Stochastic samples for consistency checking");
    detect_cmd->add_option("--scorer", detect.config.scorer_id,
                           "Consistency scorer (overlap | subprocess:<command>)");
    detect_cmd->add_option("--selfcheck-threshold", detect.config.selfcheck_threshold,
                           "Inconsistency threshold for rejection");
    detect_cmd->add_option("--max-turns", detect.config.max_turns, "Interrogation round limit");
    detect_cmd->add_flag("--lmvslm-original-prompt", detect.config.lmvslm_original_prompt,
                         "Use the unrevised examinee prompt (demonstration only)");
    detect_cmd->add_option("--seed", detect.config.seed, "Deterministic sampling seed");
    detect_cmd->add_option("--max-in-flight", detect.config.max_in_flight,
                           "Concurrent record limit")
        ->check(CLI::PositiveNumber);
    detect_cmd->add_option("--out", detect.out, "Results file (JSONL)")->required();
    detect_cmd->add_flag("--resume", detect.resume, "Skip records already in the results file");
    detect_cmd->add_flag("--allow-mixed-digests", detect.allow_mixed_digests,
                         "Accept resumed lines written under a different config");
    detect_cmd->add_flag("--wikibio-mode", detect.wikibio_mode,
                         "Treat the dataset as sentence-labelled records");
    detect_cmd->add_flag("--nonfactual-only", detect.nonfactual_only,
                         "Keep only non-factual gold records");
    detect_cmd->add_option("--limit", detect.limit, "Process at most this many records");

    EvalArgs eval;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Score persisted results against gold labels");
    eval_cmd->add_option("--dataset", eval.dataset, "Input dataset (JSONL)")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--results", eval.results, "Results file from detect")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--out", eval.out, "Write the report as JSON");
    eval_cmd->add_flag("--by-domain", eval.by_domain, "Add per-domain rows to the table");
    eval_cmd->add_flag("--wikibio-mode", eval.wikibio_mode,
                       "Treat the dataset as sentence-labelled records");
    eval_cmd->add_flag("--allow-mixed-digests", eval.allow_mixed_digests,
                       "Accept results written under different configs");
    eval_cmd->add_option("--selfcheck-threshold", eval.selfcheck_threshold,
                         "Record the applied threshold in the report");
    eval_cmd->add_option("--threshold-objective", eval.threshold_objective,
                         "Objective the threshold optimizes");

    CalibrateArgs calibrate;
    CLI::App* calibrate_cmd =
        app.add_subcommand("calibrate", "Pick the F1-optimal rejection threshold");
    calibrate_cmd->add_option("--scores", calibrate.scores, "JSONL of {score, label} lines")
        ->required()
        ->check(CLI::ExistingFile);
    calibrate_cmd->add_option("--out", calibrate.out, "Write the threshold as JSON");
    calibrate_cmd->add_option("--set-id", calibrate.set_id, "Calibration set identifier");

    CLI::App* bench_cmd = app.add_subcommand("bench", "Benchmark construction utilities");
    bench_cmd->require_subcommand(1);

    std::string bucket_hits;
    std::string bucket_out;
    CLI::App* bucket_cmd = bench_cmd->add_subcommand("bucket", "Bucket entities by hit count");
    bucket_cmd->add_option("--hit-counts", bucket_hits, "Tab-separated entity/count lines")
        ->required()
        ->check(CLI::ExistingFile);
    bucket_cmd->add_option("--out", bucket_out, "Output file (default stdout)");

    std::string sample_hits;
    std::string sample_out;
    size_t sample_n = 100;
    uint64_t sample_seed = 0;
    CLI::App* sample_cmd = bench_cmd->add_subcommand("sample", "Sample entities per bucket");
    sample_cmd->add_option("--hit-counts", sample_hits, "Tab-separated entity/count lines")
        ->required()
        ->check(CLI::ExistingFile);
    sample_cmd->add_option("--n-per-bucket", sample_n, "Entities to draw from each bucket");
    sample_cmd->add_option("--seed", sample_seed, "Deterministic sampling seed");
    sample_cmd->add_option("--out", sample_out, "Output file (default stdout)");

    BenchGenerateArgs generate;
    CLI::App* generate_cmd =
        bench_cmd->add_subcommand("generate", "Draft passages for sampled entities");
    generate_cmd->add_option("--entity", generate.entities, "Entity name (repeatable)");
    generate_cmd->add_option("--entities-file", generate.entities_file,
                             "File with one entity per line")
        ->check(CLI::ExistingFile);
    add_provider_options(generate_cmd, generate.config);
    generate_cmd->add_option("--temperature", generate.config.temperature, "Sampling temperature");
    generate_cmd->add_flag("--prompts-only", generate.prompts_only,
                           "Print the generation prompts without calling a provider");
    generate_cmd->add_option("--out", generate.out, "Output file (default stdout)");

    std::string validate_annotations_path;
    std::string validate_out;
    CLI::App* validate_cmd =
        bench_cmd->add_subcommand("validate", "Check two-stage annotation records");
    validate_cmd->add_option("--annotations", validate_annotations_path, "Annotations (JSONL)")
        ->required()
        ->check(CLI::ExistingFile);
    validate_cmd->add_option("--out", validate_out, "Write resolved final annotations (JSONL)");

    BenchKappaArgs kappa;
    CLI::App* kappa_cmd = bench_cmd->add_subcommand("kappa", "Inter-annotator agreement");
    kappa_cmd->add_option("--annotations", kappa.annotations,
                          "Annotations (JSONL) for Cohen's kappa");
    kappa_cmd->add_option("--fleiss-counts", kappa.fleiss_counts,
                          "Per-item category count rows for Fleiss' kappa")
        ->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (*detect_cmd) {
            apply_profile(detect.config, temp_opt->count() > 0, top_p_opt->count() > 0,
                          top_k_opt->count() > 0);
            return run_detect(detect);
        }
        if (*eval_cmd) return run_eval(eval);
        if (*calibrate_cmd) return run_calibrate(calibrate);
        if (*bucket_cmd) return run_bench_bucket(bucket_hits, bucket_out);
        if (*sample_cmd) return run_bench_sample(sample_hits, sample_n, sample_seed, sample_out);
        if (*generate_cmd) return run_bench_generate(generate);
        if (*validate_cmd) return run_bench_validate(validate_annotations_path, validate_out);
        if (*kappa_cmd) {
            if (kappa.annotations.empty() && kappa.fleiss_counts.empty())
                throw SchemaViolation("kappa needs --annotations or --fleiss-counts");
            return run_bench_kappa(kappa);
        }
        return kExitValidation;
    } catch (const AuthError& e) {
        std::cerr << "provider abort: " << e.what() << "\n";
        return kExitProviderAbort;
    } catch (const RateLimited& e) {
        std::cerr << "provider abort: " << e.what() << "\n";
        return kExitProviderAbort;
    } catch (const TransportError& e) {
        std::cerr << "provider abort: " << e.what() << "\n";
        return kExitProviderAbort;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
}

}  // namespace rvcheck
