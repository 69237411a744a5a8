#include "rvcheck/baselines.hpp"

#include <algorithm>
#include <cctype>
#include <csignal>
#include <cstdio>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "rvcheck/errors.hpp"
#include "rvcheck/eval.hpp"

namespace rvcheck {

namespace {

std::string trim(const std::string& text) {
    size_t begin = 0;
    size_t end = text.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
    return text.substr(begin, end - begin);
}

std::string lower_ascii(const std::string& text) {
    std::string out = text;
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream stream(text);
    std::string line;
    while (std::getline(stream, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        line = trim(line);
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

// "non-factual" is checked first: "factual" is a substring of it.
std::optional<Label> parse_verdict_text(const std::string& lowered) {
    if (lowered.find("non-factual") != std::string::npos) return Label::NonFactual;
    if (lowered.find("factual") != std::string::npos) return Label::Factual;
    return std::nullopt;
}

const std::set<std::string>& stop_words() {
    static const std::set<std::string> words = {
        "a",     "an",    "the",   "and",   "or",    "but",  "if",    "then",  "is",    "are",
        "was",   "were",  "be",    "been",  "being", "of",   "in",    "on",    "at",    "to",
        "for",   "with",  "by",    "from",  "as",    "that", "this",  "these", "those", "it",
        "its",   "he",    "she",   "they",  "them",  "his",  "her",   "their", "we",    "you",
        "i",     "not",   "no",    "do",    "does",  "did",  "have",  "has",   "had",   "will",
        "would", "can",   "could", "may",   "might", "shall", "should", "must", "which", "who",
        "whom",  "what",  "when",  "where", "also",  "such"};
    return words;
}

std::set<std::string> content_words(const std::string& text) {
    std::set<std::string> words;
    std::string current;
    auto flush = [&] {
        if (!current.empty() && stop_words().count(current) == 0) words.insert(current);
        current.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            current += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else {
            flush();
        }
    }
    flush();
    return words;
}

const std::set<std::string>& abbreviations() {
    static const std::set<std::string> abbrevs = {
        "Mr.",  "Mrs.", "Ms.",  "Dr.",  "Prof.", "Sr.",  "Jr.",  "St.",  "vs.", "etc.",
        "i.e.", "e.g.", "U.S.", "U.K.", "No.",   "Mt.",  "Inc.", "Ltd.", "Co."};
    return abbrevs;
}

}  // namespace

std::vector<std::string> split_sentences(const std::string& passage) {
    std::vector<std::string> sentences;
    const size_t n = passage.size();
    size_t start = 0;
    auto push_segment = [&](size_t begin, size_t end) {
        while (begin < end && std::isspace(static_cast<unsigned char>(passage[begin]))) ++begin;
        while (end > begin && std::isspace(static_cast<unsigned char>(passage[end - 1]))) --end;
        if (end > begin) sentences.push_back(passage.substr(begin, end - begin));
    };
    for (size_t i = 0; i < n; ++i) {
        char c = passage[i];
        if (c != '.' && c != '!' && c != '?') continue;
        size_t j = i + 1;
        if (j >= n) break;  // remainder handles the tail
        if (!std::isspace(static_cast<unsigned char>(passage[j]))) continue;
        while (j < n && std::isspace(static_cast<unsigned char>(passage[j]))) ++j;
        if (j >= n || !(passage[j] >= 'A' && passage[j] <= 'Z')) continue;
        if (c == '.') {
            size_t word_start = i;
            while (word_start > start &&
                   !std::isspace(static_cast<unsigned char>(passage[word_start - 1])))
                --word_start;
            std::string word = passage.substr(word_start, i - word_start + 1);
            if (abbreviations().count(word)) continue;
        }
        push_segment(start, i + 1);
        start = j;
        i = j - 1;
    }
    push_segment(start, n);
    return sentences;
}

DetectionOutcome detect_all_false(const PassageRecord& record) {
    (void)record;
    DetectionOutcome outcome;
    outcome.method_id = "all-false";
    outcome.verdict = Label::NonFactual;
    return outcome;
}

DetectionOutcome detect_zero_shot(const PassageRecord& record, Provider& provider,
                                  const PromptSet& prompts, const CompletionDefaults& defaults) {
    DetectionOutcome outcome;
    outcome.method_id = "zero-shot";
    std::string prompt = fill_prompt(prompts.zero_shot, {{"Claim", record.passage}});
    CompletionResult result = provider.complete(make_request(defaults, prompt));
    record_call(outcome.trace, outcome.usage, outcome.usage_estimated, "judge", prompt, result.text,
                result.usage, result.usage_estimated);
    std::optional<Label> verdict = parse_verdict_text(lower_ascii(result.text));
    if (verdict) {
        outcome.verdict = *verdict;
    } else {
        outcome.verdict = Label::NonFactual;
        record_note(outcome.trace, "judge",
                    "warning: answer contains neither factual nor non-factual");
    }
    return outcome;
}

DetectionOutcome detect_lmvslm_revised(const PassageRecord& record, Provider& examiner,
                                       Provider& examinee, const LmvslmOptions& options,
                                       const PromptSet& prompts,
                                       InterrogationTranscript* transcript_out) {
    DetectionOutcome outcome;
    outcome.method_id = "lmvslm";
    InterrogationTranscript transcript;
    transcript.claim = record.passage;

    auto history_text = [&transcript] {
        std::ostringstream out;
        for (const QaTurn& turn : transcript.turns) {
            for (const std::string& q : turn.questions) out << "Q: " << q << "\n";
            for (const std::string& a : turn.answers) out << "A: " << a << "\n";
        }
        return out.str();
    };

    auto examiner_reply = [&](const std::string& prompt) {
        CompletionResult result = examiner.complete(make_request(options.defaults, prompt));
        record_call(outcome.trace, outcome.usage, outcome.usage_estimated, "examiner", prompt,
                    result.text, result.usage, result.usage_estimated);
        return result.text;
    };

    std::optional<Label> final_verdict;
    for (int round = 0; round < options.max_turns && !final_verdict; ++round) {
        std::string prompt =
            round == 0
                ? fill_prompt(prompts.lmvslm_examiner_open, {{"Claim", record.passage}})
                : fill_prompt(prompts.lmvslm_examiner_followup,
                              {{"Claim", record.passage}, {"History", history_text()}});
        std::string reply = examiner_reply(prompt);

        std::vector<std::string> questions;
        bool malformed_once = false;
        for (int attempt = 0; attempt < 2; ++attempt) {
            std::string lowered = lower_ascii(reply);
            size_t conclusion = lowered.find("conclusion:");
            if (conclusion != std::string::npos) {
                std::optional<Label> verdict = parse_verdict_text(lowered.substr(conclusion));
                if (verdict) {
                    final_verdict = verdict;
                    break;
                }
            }
            questions.clear();
            for (const std::string& line : split_lines(reply)) {
                if (line.back() == '?') questions.push_back(line);
            }
            if (!questions.empty()) break;
            if (attempt == 0) {
                malformed_once = true;
                record_note(outcome.trace, "examiner", "warning: reply had no conclusion and no "
                                                       "questions; re-prompting once");
                reply = examiner_reply(prompt + "\n" + prompts.lmvslm_reprompt);
            }
        }
        if (final_verdict) break;
        if (questions.empty()) {
            record_note(outcome.trace, "examiner",
                        malformed_once ? "warning: reply still malformed after a re-prompt"
                                       : "warning: malformed examiner reply");
            final_verdict = Label::NonFactual;
            break;
        }

        std::string joined;
        for (size_t i = 0; i < questions.size(); ++i) {
            if (i > 0) joined += '\n';
            joined += questions[i];
        }
        std::string examinee_prompt =
            options.original_examinee_prompt
                ? fill_prompt(prompts.lmvslm_examinee_original,
                              {{"Claim", record.passage}, {"Questions", joined}})
                : fill_prompt(prompts.lmvslm_examinee, {{"Questions", joined}});
        CompletionResult answer = examinee.complete(make_request(options.defaults, examinee_prompt));
        record_call(outcome.trace, outcome.usage, outcome.usage_estimated, "examinee",
                    examinee_prompt, answer.text, answer.usage, answer.usage_estimated);

        QaTurn turn;
        turn.questions = std::move(questions);
        turn.answers = split_lines(answer.text);
        transcript.turns.push_back(std::move(turn));
        transcript.turn_count = static_cast<int>(transcript.turns.size());
    }

    if (!final_verdict) {
        record_note(outcome.trace, "examiner",
                    "warning: no conclusion after max turns; defaulting to factual");
        final_verdict = Label::Factual;
    }
    transcript.final_verdict = *final_verdict;
    outcome.verdict = *final_verdict;
    if (transcript_out) *transcript_out = std::move(transcript);
    return outcome;
}

double overlap_inconsistency(const std::string& sentence, const std::string& sample) {
    std::set<std::string> a = content_words(sentence);
    std::set<std::string> b = content_words(sample);
    if (a.empty() && b.empty()) return 0.0;  // vacuously consistent
    if (a.empty() || b.empty()) return 1.0;
    long long inter = 0;
    for (const std::string& word : a) inter += b.count(word) ? 1 : 0;
    if (inter == 0) return 1.0;
    double precision = static_cast<double>(inter) / static_cast<double>(a.size());
    double recall = static_cast<double>(inter) / static_cast<double>(b.size());
    double f1 = 2.0 * precision * recall / (precision + recall);
    return 1.0 - f1;
}

namespace {

// Long-lived child process speaking the line protocol over stdin/stdout.
struct SubprocessState {
    FILE* to_child = nullptr;
    FILE* from_child = nullptr;
    pid_t pid = -1;
    std::mutex mutex;
    std::string command;

    explicit SubprocessState(const std::string& cmd) : command(cmd) {
        // a dead child must surface as an Error, not kill us on write
        std::signal(SIGPIPE, SIG_IGN);
        int in_pipe[2];
        int out_pipe[2];
        if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0)
            throw Error("scorer subprocess: pipe() failed");
        pid = fork();
        if (pid < 0) throw Error("scorer subprocess: fork() failed");
        if (pid == 0) {
            dup2(in_pipe[0], STDIN_FILENO);
            dup2(out_pipe[1], STDOUT_FILENO);
            close(in_pipe[0]);
            close(in_pipe[1]);
            close(out_pipe[0]);
            close(out_pipe[1]);
            execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
            _exit(127);
        }
        close(in_pipe[0]);
        close(out_pipe[1]);
        to_child = fdopen(in_pipe[1], "w");
        from_child = fdopen(out_pipe[0], "r");
        if (!to_child || !from_child) throw Error("scorer subprocess: fdopen() failed");
    }

    ~SubprocessState() {
        if (to_child) fclose(to_child);
        if (from_child) fclose(from_child);
        if (pid > 0) waitpid(pid, nullptr, 0);
    }

    double score(const std::string& sentence, const std::string& sample) {
        std::lock_guard<std::mutex> lock(mutex);
        auto sanitize = [](std::string text) {
            for (char& c : text) {
                if (c == '\t' || c == '\n' || c == '\r') c = ' ';
            }
            return text;
        };
        std::string line = sanitize(sentence) + "\t" + sanitize(sample) + "\n";
        bool sent =
            fwrite(line.data(), 1, line.size(), to_child) == line.size() && fflush(to_child) == 0;
        std::string reply;
        int c = EOF;
        if (sent)
            while ((c = fgetc(from_child)) != EOF && c != '\n') reply += static_cast<char>(c);
        if (reply.empty() && c == EOF)
            throw Error("scorer subprocess: no reply (command: " + command + ")");
        try {
            double value = std::stod(reply);
            return std::clamp(value, 0.0, 1.0);
        } catch (const std::exception&) {
            throw Error("scorer subprocess: bad score line: " + reply);
        }
    }
};

}  // namespace

ScorerFn make_subprocess_scorer(const std::string& command) {
    auto state = std::make_shared<SubprocessState>(command);
    return [state](const std::string& sentence, const std::string& sample) {
        return state->score(sentence, sample);
    };
}

ScorerFn resolve_scorer(const std::string& scorer_id) {
    if (scorer_id == "overlap") return overlap_inconsistency;
    const std::string prefix = "subprocess:";
    if (scorer_id.rfind(prefix, 0) == 0) return make_subprocess_scorer(scorer_id.substr(prefix.size()));
    throw Error("unknown scorer: " + scorer_id);
}

ConsistencyScore score_consistency(const PassageRecord& record, const SelfCheckOptions& options,
                                   const ScorerFn& scorer, Provider& provider,
                                   const PromptSet& prompts, Trace* trace, UsageStats* usage,
                                   bool* usage_estimated) {
    if (options.n_samples < 1) throw SchemaViolation("n_samples must be at least 1");
    std::vector<std::string> sentences = split_sentences(record.passage);
    if (sentences.empty()) throw EmptyPassage();

    CompletionDefaults sample_defaults = options.defaults;
    sample_defaults.temperature = options.sample_temperature;
    std::string prompt = fill_prompt(prompts.generation, {{"Entity", record.entity.name}});

    std::vector<std::string> samples;
    samples.reserve(static_cast<size_t>(options.n_samples));
    for (int i = 0; i < options.n_samples; ++i) {
        CompletionResult result = provider.complete(make_request(sample_defaults, prompt));
        if (trace && usage && usage_estimated) {
            record_call(*trace, *usage, *usage_estimated, "sample", prompt, result.text,
                        result.usage, result.usage_estimated);
        }
        samples.push_back(std::move(result.text));
    }

    ConsistencyScore score;
    score.per_sentence.reserve(sentences.size());
    double sum = 0.0;
    for (const std::string& sentence : sentences) {
        double best = 1.0;
        for (const std::string& sample : samples)
            best = std::min(best, std::clamp(scorer(sentence, sample), 0.0, 1.0));
        score.per_sentence.push_back(best);
        sum += best;
    }
    score.passage_score = sum / static_cast<double>(score.per_sentence.size());
    return score;
}

DetectionOutcome detect_selfcheck(const PassageRecord& record, const SelfCheckOptions& options,
                                  const ScorerFn& scorer, double threshold, Provider& provider,
                                  const PromptSet& prompts) {
    DetectionOutcome outcome;
    outcome.method_id = "selfcheck";
    ConsistencyScore score = score_consistency(record, options, scorer, provider, prompts,
                                               &outcome.trace, &outcome.usage,
                                               &outcome.usage_estimated);
    outcome.verdict = score.passage_score > threshold ? Label::NonFactual : Label::Factual;
    std::ostringstream note;
    note << "passage score: " << score.passage_score << "; threshold: " << threshold;
    record_note(outcome.trace, "score", note.str());
    return outcome;
}

Threshold optimize_threshold(const std::vector<std::pair<double, Label>>& scores,
                             const std::string& calibration_set_id) {
    if (scores.empty()) throw EmptyCalibration();
    for (const auto& [score, label] : scores) {
        if (score < 0.0 || score > 1.0)
            throw SchemaViolation("calibration score outside [0, 1]");
        if (label == Label::Unverifiable)
            throw SchemaViolation("calibration labels must be Factual or NonFactual");
    }

    std::vector<double> distinct;
    distinct.reserve(scores.size());
    for (const auto& [score, label] : scores) distinct.push_back(score);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    std::vector<double> candidates = {0.0, 1.0};
    for (size_t i = 0; i + 1 < distinct.size(); ++i)
        candidates.push_back((distinct[i] + distinct[i + 1]) / 2.0);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    double best_f1 = -1.0;
    double best_t = 1.0;
    for (double t : candidates) {
        ConfusionCounts counts;
        for (const auto& [score, label] : scores) {
            bool predicted_nonfactual = score > t;
            bool gold_nonfactual = label == Label::NonFactual;
            if (predicted_nonfactual && gold_nonfactual) ++counts.tp;
            else if (predicted_nonfactual && !gold_nonfactual) ++counts.fp;
            else if (!predicted_nonfactual && gold_nonfactual) ++counts.fn;
            else ++counts.tn;
        }
        double f1 = metrics_from_counts(counts).f1;
        if (f1 > best_f1) {
            best_f1 = f1;
            best_t = t;
        }
    }
    if (best_f1 <= 0.0) return Threshold{1.0, 0.0, calibration_set_id};
    return Threshold{best_t, best_f1, calibration_set_id};
}

}  // namespace rvcheck
