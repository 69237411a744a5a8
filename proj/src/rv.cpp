#include "rvcheck/rv.hpp"

#include <cctype>
#include <regex>
#include <sstream>

#include "rvcheck/baselines.hpp"
#include "rvcheck/errors.hpp"

namespace rvcheck {

namespace {

std::string trim(std::string_view text) {
    size_t begin = 0;
    size_t end = text.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
    return std::string(text.substr(begin, end - begin));
}

char lower_ascii(char c) {
    return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

// Case-insensitive (ASCII) substring search.
size_t ifind(std::string_view haystack, std::string_view needle, size_t from) {
    if (needle.empty() || haystack.size() < needle.size()) return std::string_view::npos;
    for (size_t i = from; i + needle.size() <= haystack.size(); ++i) {
        size_t j = 0;
        while (j < needle.size() && lower_ascii(haystack[i + j]) == lower_ascii(needle[j])) ++j;
        if (j == needle.size()) return i;
    }
    return std::string_view::npos;
}

std::string redact_entity(const std::string& line, const std::string& entity_name) {
    std::string out;
    size_t pos = 0;
    while (pos < line.size()) {
        size_t hit = ifind(line, entity_name, pos);
        if (hit == std::string_view::npos) {
            out.append(line, pos, line.size() - pos);
            break;
        }
        out.append(line, pos, hit - pos);
        out.append("the entity");
        pos = hit + entity_name.size();
    }
    return out;
}

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

// Strips quotes, terminal punctuation, and leading percent figures until the
// candidate stops changing.
std::string clean_candidate(std::string candidate) {
    auto is_quote = [](char c) { return c == '"' || c == '\'' || c == '`'; };
    bool changed = true;
    while (changed) {
        changed = false;
        std::string trimmed = trim(candidate);
        if (trimmed != candidate) {
            candidate = trimmed;
            changed = true;
        }
        while (!candidate.empty() && is_quote(candidate.front())) {
            candidate.erase(candidate.begin());
            changed = true;
        }
        while (!candidate.empty()) {
            char back = candidate.back();
            if (is_quote(back) || back == '.' || back == ',' || back == '!' || back == '?' ||
                back == ';' || back == ':') {
                candidate.pop_back();
                changed = true;
            } else {
                break;
            }
        }
        std::smatch m;
        static const std::regex leading_percent(R"(^\s*\d+(\.\d+)?\s*%\s*)");
        if (std::regex_search(candidate, m, leading_percent)) {
            candidate.erase(0, m.length(0));
            changed = true;
        }
    }
    return candidate;
}

bool candidate_valid(const std::string& candidate) {
    for (char c : candidate) {
        if (std::isalpha(static_cast<unsigned char>(c)))
            return std::isupper(static_cast<unsigned char>(c)) != 0;
    }
    return false;
}

// Occurrences of `word` at word boundaries within `text`, in order.
std::vector<size_t> word_positions(const std::string& text, const std::string& word) {
    std::vector<size_t> positions;
    size_t pos = 0;
    while ((pos = text.find(word, pos)) != std::string::npos) {
        bool left_ok = pos == 0 || !is_word_char(text[pos - 1]);
        size_t after = pos + word.size();
        bool right_ok = after == text.size() || !is_word_char(text[after]);
        if (left_ok && right_ok) positions.push_back(pos);
        pos += 1;
    }
    return positions;
}

std::optional<std::string> guess_after_is(const std::vector<std::string>& sentences) {
    for (const std::string& sentence : sentences) {
        for (size_t pos : word_positions(sentence, "is")) {
            std::string candidate = clean_candidate(sentence.substr(pos + 2));
            if (candidate_valid(candidate)) return candidate;
        }
    }
    return std::nullopt;
}

std::optional<std::string> guess_before_matches(const std::vector<std::string>& sentences) {
    for (const std::string& sentence : sentences) {
        for (size_t pos : word_positions(sentence, "matches")) {
            std::string candidate = clean_candidate(sentence.substr(0, pos));
            if (candidate_valid(candidate)) return candidate;
        }
    }
    return std::nullopt;
}

std::optional<std::string> guess_title_case(const std::string& raw) {
    std::istringstream stream(raw);
    std::string word;
    std::vector<std::string> span;
    auto starts_upper = [](const std::string& w) {
        for (char c : w) {
            if (std::isalpha(static_cast<unsigned char>(c)))
                return std::isupper(static_cast<unsigned char>(c)) != 0;
        }
        return false;
    };
    while (stream >> word) {
        bool label = !word.empty() && word.back() == ':';
        if (!label && starts_upper(word)) {
            span.push_back(word);
            continue;
        }
        if (!span.empty()) break;
    }
    if (span.empty()) return std::nullopt;
    std::string joined;
    for (size_t i = 0; i < span.size(); ++i) {
        if (i > 0) joined += ' ';
        joined += span[i];
    }
    std::string candidate = clean_candidate(joined);
    if (candidate_valid(candidate)) return candidate;
    return std::nullopt;
}

}  // namespace

std::string to_string(RvVariant variant) {
    return variant == RvVariant::QG ? "qg" : "em";
}

std::string to_string(Matching matching) {
    return matching == Matching::Exact ? "exact" : "fuzzy";
}

bool question_leaks_entity(const EntityRef& entity, std::string_view question) {
    return contains_normalized(question, entity.name);
}

Query construct_query_qg(const EntityRef& entity, const std::string& passage,
                         const std::string& passage_id, Provider& provider,
                         const PromptSet& prompts, const CompletionDefaults& defaults,
                         Trace& trace, UsageStats& usage, bool& usage_estimated) {
    std::string prompt = fill_prompt(prompts.qg_construct, {{"Example", prompts.qg_example},
                                                            {"Entity", entity.name},
                                                            {"Response", passage}});
    CompletionResult result = provider.complete(make_request(defaults, prompt));
    record_call(trace, usage, usage_estimated, "construct_query", prompt, result.text, result.usage,
                result.usage_estimated);
    std::string question = trim(result.text);
    if (question_leaks_entity(entity, question)) {
        std::string retry_prompt =
            prompt + "\n" + fill_prompt(prompts.qg_retry, {{"Entity", entity.name}});
        CompletionResult retry = provider.complete(make_request(defaults, retry_prompt));
        record_call(trace, usage, usage_estimated, "construct_query", retry_prompt, retry.text,
                    retry.usage, retry.usage_estimated, "retry after leakage guard");
        question = trim(retry.text);
        if (question_leaks_entity(entity, question)) throw LeakageGuardFailure(entity.name);
    }
    return Query{RvVariant::QG, std::move(question), passage_id};
}

Query construct_query_em(const EntityRef& entity, const std::string& passage,
                         const std::string& passage_id, Provider& provider,
                         const PromptSet& prompts, const CompletionDefaults& defaults,
                         Trace& trace, UsageStats& usage, bool& usage_estimated) {
    std::string prompt = fill_prompt(prompts.em_construct,
                                     {{"Response", passage}, {"Entity", entity.name}});
    CompletionResult result = provider.complete(make_request(defaults, prompt));
    record_call(trace, usage, usage_estimated, "construct_query", prompt, result.text, result.usage,
                result.usage_estimated);

    static const std::regex numbered(R"(^\s*\d+[.)]\s*(.*\S)\s*$)");
    std::vector<std::string> requirements;
    std::istringstream lines(result.text);
    std::string line;
    while (std::getline(lines, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::smatch m;
        if (std::regex_match(line, m, numbered))
            requirements.push_back(redact_entity(m[1].str(), entity.name));
    }
    if (requirements.empty()) throw NoRequirementsParsed();

    std::string body;
    for (size_t i = 0; i < requirements.size(); ++i) {
        if (i > 0) body += '\n';
        body += std::to_string(i + 1) + ". " + requirements[i];
    }
    return Query{RvVariant::EM, std::move(body), passage_id};
}

std::string access_qg(const Query& query, Provider& provider, const PromptSet& prompts,
                      const CompletionDefaults& defaults, Trace& trace, UsageStats& usage,
                      bool& usage_estimated) {
    std::string prompt = fill_prompt(prompts.qg_access, {{"Question", query.body}});
    CompletionResult result = provider.complete(make_request(defaults, prompt));
    record_call(trace, usage, usage_estimated, "access_database", prompt, result.text, result.usage,
                result.usage_estimated);
    return trim(result.text);
}

EmAnswer access_em(const Query& query, Provider& provider, const PromptSet& prompts,
                   const CompletionDefaults& defaults, Trace& trace, UsageStats& usage,
                   bool& usage_estimated) {
    std::string prompt = fill_prompt(prompts.em_access, {{"Requirements", query.body}});
    CompletionResult result = provider.complete(make_request(defaults, prompt));
    record_call(trace, usage, usage_estimated, "access_database", prompt, result.text, result.usage,
                result.usage_estimated);
    return parse_em_answer(result.text);
}

EmAnswer parse_em_answer(const std::string& raw) {
    static const std::regex percent(R"((\d+(\.\d+)?)\s*%)");
    std::optional<double> percentage;
    for (auto it = std::sregex_iterator(raw.begin(), raw.end(), percent);
         it != std::sregex_iterator(); ++it) {
        double value = std::stod((*it)[1].str());
        if (value >= 0.0 && value <= 100.0) {
            percentage = value;
            break;
        }
    }
    if (!percentage) throw ParseFailure("no match percentage found in the answer");

    std::vector<std::string> sentences = split_sentences(raw);
    std::optional<std::string> guess = guess_after_is(sentences);
    if (!guess) guess = guess_before_matches(sentences);
    if (!guess) guess = guess_title_case(raw);
    if (!guess) throw ParseFailure("no entity mention found in the answer");

    return EmAnswer{*guess, *percentage, raw};
}

bool match_exact(const EntityRef& entity, std::string_view answer) {
    return normalize(entity.name) == normalize(answer);
}

bool match_fuzzy(const EntityRef& entity, const std::string& answer, Provider& provider,
                 const PromptSet& prompts, const CompletionDefaults& defaults, Trace& trace,
                 UsageStats& usage, bool& usage_estimated) {
    std::string prompt =
        fill_prompt(prompts.fuzzy_match, {{"Answer", answer}, {"Entity", entity.name}});
    CompletionResult result = provider.complete(make_request(defaults, prompt));
    std::string token;
    for (char c : result.text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            token += lower_ascii(c);
        } else if (!token.empty()) {
            break;
        }
    }
    bool match = false;
    std::string note;
    if (token == "yes") {
        match = true;
        note = "fuzzy verdict: yes";
    } else if (token == "no") {
        note = "fuzzy verdict: no";
    } else {
        note = "warning: unparseable fuzzy verdict treated as a non-match";
    }
    record_call(trace, usage, usage_estimated, "entity_answer_match", prompt, result.text,
                result.usage, result.usage_estimated, note);
    return match;
}

bool em_factual_rule(bool entity_match, double match_percentage, double threshold) {
    return entity_match && match_percentage >= threshold;
}

DetectionOutcome detect_rv(const PassageRecord& record, const RvOptions& options,
                           Provider& provider, const PromptSet& prompts) {
    DetectionOutcome outcome;
    outcome.method_id = options.variant == RvVariant::QG ? "rv-qg" : "rv-em";
    outcome.verdict = Label::NonFactual;

    auto resolve_match = [&](const std::string& answer) {
        if (options.matching == Matching::Exact) {
            bool match = match_exact(record.entity, answer);
            record_note(outcome.trace, "entity_answer_match",
                        match ? "exact match" : "exact mismatch");
            return match;
        }
        return match_fuzzy(record.entity, answer, provider, prompts, options.defaults,
                           outcome.trace, outcome.usage, outcome.usage_estimated);
    };

    try {
        if (options.variant == RvVariant::QG) {
            Query query = construct_query_qg(record.entity, record.passage, record.id, provider,
                                             prompts, options.defaults, outcome.trace,
                                             outcome.usage, outcome.usage_estimated);
            std::string answer = access_qg(query, provider, prompts, options.defaults,
                                           outcome.trace, outcome.usage, outcome.usage_estimated);
            bool match = false;
            if (answer.empty()) {
                record_note(outcome.trace, "entity_answer_match",
                            "empty answer treated as a non-match");
            } else {
                match = resolve_match(answer);
            }
            outcome.verdict = match ? Label::Factual : Label::NonFactual;
        } else {
            Query query = construct_query_em(record.entity, record.passage, record.id, provider,
                                             prompts, options.defaults, outcome.trace,
                                             outcome.usage, outcome.usage_estimated);
            EmAnswer answer = access_em(query, provider, prompts, options.defaults, outcome.trace,
                                        outcome.usage, outcome.usage_estimated);
            bool match = resolve_match(answer.entity_guess);
            bool factual = em_factual_rule(match, answer.match_percentage, options.em_threshold);
            std::ostringstream note;
            note << "guess: " << answer.entity_guess << "; percentage: " << answer.match_percentage
                 << "; threshold: " << options.em_threshold;
            record_note(outcome.trace, "entity_answer_match", note.str());
            outcome.verdict = factual ? Label::Factual : Label::NonFactual;
        }
    } catch (const LeakageGuardFailure& e) {
        record_note(outcome.trace, "construct_query",
                    std::string("leakage guard failure: ") + e.what());
        outcome.verdict = Label::NonFactual;
    } catch (const NoRequirementsParsed& e) {
        record_note(outcome.trace, "construct_query",
                    std::string("requirements parse failure: ") + e.what());
        outcome.verdict = Label::NonFactual;
    } catch (const ParseFailure& e) {
        record_note(outcome.trace, "access_database",
                    std::string("answer parse failure: ") + e.what());
        outcome.verdict = Label::NonFactual;
    }
    return outcome;
}

}  // namespace rvcheck
