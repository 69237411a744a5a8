#pragma once

#include <string>
#include <string_view>

#include "rvcheck/core.hpp"
#include "rvcheck/normalize.hpp"
#include "rvcheck/outcome.hpp"
#include "rvcheck/prompts.hpp"
#include "rvcheck/provider.hpp"

namespace rvcheck {

enum class RvVariant { QG, EM };
enum class Matching { Exact, Fuzzy };

std::string to_string(RvVariant variant);
std::string to_string(Matching matching);

struct Query {
    RvVariant variant = RvVariant::QG;
    // A question for QG; a numbered requirements list for EM.
    std::string body;
    std::string source_passage_id;
};

struct EmAnswer {
    std::string entity_guess;
    double match_percentage = 0.0;  // in [0,100]
    std::string raw_text;
};

// Leakage guard: the normalized entity name must not occur as a substring of
// the normalized question.
bool question_leaks_entity(const EntityRef& entity, std::string_view question);

// Stage 1, QG: one completion call; on a guard failure, one retry with the
// constraint restated, then LeakageGuardFailure.
Query construct_query_qg(const EntityRef& entity, const std::string& passage,
                         const std::string& passage_id, Provider& provider,
                         const PromptSet& prompts, const CompletionDefaults& defaults,
                         Trace& trace, UsageStats& usage, bool& usage_estimated);

// Stage 1, EM: one completion call; numbered lines become requirements, with
// entity mentions inside them redacted. Throws NoRequirementsParsed.
Query construct_query_em(const EntityRef& entity, const std::string& passage,
                         const std::string& passage_id, Provider& provider,
                         const PromptSet& prompts, const CompletionDefaults& defaults,
                         Trace& trace, UsageStats& usage, bool& usage_estimated);

// Stage 2, QG: the model's short answer, verbatim.
std::string access_qg(const Query& query, Provider& provider, const PromptSet& prompts,
                      const CompletionDefaults& defaults, Trace& trace, UsageStats& usage,
                      bool& usage_estimated);

// Stage 2, EM: completion parsed by parse_em_answer (ParseFailure propagates).
EmAnswer access_em(const Query& query, Provider& provider, const PromptSet& prompts,
                   const CompletionDefaults& defaults, Trace& trace, UsageStats& usage,
                   bool& usage_estimated);

// Extracts the first in-range percentage figure and an entity mention located
// by ordered heuristics: text following "is " up to the sentence end; text
// preceding "matches"; first title-cased span (words ending with ':' are
// labels, not span members). The guess is trimmed of quotes and terminal
// punctuation. Throws ParseFailure when either part is missing.
EmAnswer parse_em_answer(const std::string& raw);

// Stage 3, exact: normalize(entity.name) == normalize(answer).
bool match_exact(const EntityRef& entity, std::string_view answer);

// Stage 3, fuzzy: one completion call; a leading "yes" token means match.
// Unparseable verdicts count as non-matches with a trace warning, never throw.
bool match_fuzzy(const EntityRef& entity, const std::string& answer, Provider& provider,
                 const PromptSet& prompts, const CompletionDefaults& defaults, Trace& trace,
                 UsageStats& usage, bool& usage_estimated);

// EM verdict rule: factual iff the guess matches and percentage >= threshold.
bool em_factual_rule(bool entity_match, double match_percentage, double threshold);

struct RvOptions {
    RvVariant variant = RvVariant::EM;
    Matching matching = Matching::Exact;
    double em_threshold = 90.0;
    CompletionDefaults defaults;
};

// Full three-stage pipeline. Content-level failures (guard, parse) become
// NonFactual verdicts recorded in the trace; only provider transport, auth,
// and rate-limit errors abort.
DetectionOutcome detect_rv(const PassageRecord& record, const RvOptions& options,
                           Provider& provider, const PromptSet& prompts = PromptSet::embedded());

}  // namespace rvcheck
