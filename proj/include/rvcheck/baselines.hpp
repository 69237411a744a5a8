#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rvcheck/core.hpp"
#include "rvcheck/outcome.hpp"
#include "rvcheck/prompts.hpp"
#include "rvcheck/provider.hpp"

namespace rvcheck {

struct ConsistencyScore {
    std::vector<double> per_sentence;  // inconsistency per passage sentence, in [0,1]
    double passage_score = 0.0;        // arithmetic mean of per_sentence
};

struct Threshold {
    double value = 1.0;
    double objective_at_value = 0.0;  // F1 with NonFactual as the positive class
    std::string calibration_set_id;
};

struct QaTurn {
    std::vector<std::string> questions;
    std::vector<std::string> answers;
};

struct InterrogationTranscript {
    std::string claim;
    std::vector<QaTurn> turns;
    Label final_verdict = Label::Factual;
    int turn_count = 0;  // <= max_turns
};

// Floor baseline: rejects everything, costs nothing.
DetectionOutcome detect_all_false(const PassageRecord& record);

// One claim-judger call; "non-factual" is checked before "factual" since the
// former contains the latter. An answer containing neither is treated as
// NonFactual with a trace warning.
DetectionOutcome detect_zero_shot(const PassageRecord& record, Provider& provider,
                                  const PromptSet& prompts, const CompletionDefaults& defaults);

struct LmvslmOptions {
    int max_turns = 3;
    // Demonstration flag: the unrevised examinee setup answers "regarding your
    // claim" with the claim text in context. No detection quality is expected.
    bool original_examinee_prompt = false;
    CompletionDefaults defaults;
};

// Cross-examination: the examiner sees the claim and the Q/A history; the
// examinee answers each round's questions with no claim and no history in
// context. Exhausting max_turns without a conclusion yields Factual with a
// warning; malformed examiner output yields NonFactual after one re-prompt.
DetectionOutcome detect_lmvslm_revised(const PassageRecord& record, Provider& examiner,
                                       Provider& examinee, const LmvslmOptions& options,
                                       const PromptSet& prompts,
                                       InterrogationTranscript* transcript_out = nullptr);

// Pluggable scorer: (sentence, sample passage) -> inconsistency in [0,1],
// higher meaning less consistent.
using ScorerFn = std::function<double(const std::string& sentence, const std::string& sample)>;

// 1 - content-word unigram F1 between sentence and sample (stop words removed).
double overlap_inconsistency(const std::string& sentence, const std::string& sample);

// "overlap", or "subprocess:<command>" for the external line protocol
// (tab-separated sentence/sample pair per input line, decimal score per
// output line). Throws Error for unknown ids.
ScorerFn resolve_scorer(const std::string& scorer_id);
ScorerFn make_subprocess_scorer(const std::string& command);

struct SelfCheckOptions {
    int n_samples = 5;
    double sample_temperature = 1.0;  // stochastic samples
    CompletionDefaults defaults;
};

// Draws n_samples completions of the generation prompt for the record's
// entity; per sentence, inconsistency is the minimum scorer value over the
// samples (one strongly supporting sample makes a sentence consistent).
ConsistencyScore score_consistency(const PassageRecord& record, const SelfCheckOptions& options,
                                   const ScorerFn& scorer, Provider& provider,
                                   const PromptSet& prompts, Trace* trace = nullptr,
                                   UsageStats* usage = nullptr, bool* usage_estimated = nullptr);

// score_consistency + threshold rule: passage_score > threshold => NonFactual.
DetectionOutcome detect_selfcheck(const PassageRecord& record, const SelfCheckOptions& options,
                                  const ScorerFn& scorer, double threshold, Provider& provider,
                                  const PromptSet& prompts);

// Maximizes F1 (NonFactual positive, rejection rule score > t) over the grid
// of midpoints between consecutive distinct scores plus {0, 1}. Ties go to the
// smallest threshold; when no threshold achieves F1 > 0 (no positive gold
// labels) the rejects-nothing threshold 1.0 is returned.
Threshold optimize_threshold(const std::vector<std::pair<double, Label>>& scores,
                             const std::string& calibration_set_id = "");

// Splits on . ! ? followed by whitespace and an uppercase letter or end of
// text, with a fixed abbreviation list guard. Never returns empty segments.
std::vector<std::string> split_sentences(const std::string& passage);

}  // namespace rvcheck
