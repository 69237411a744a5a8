#include "rvcheck/core.hpp"

#include <algorithm>

#include "rvcheck/normalize.hpp"

namespace rvcheck {

std::string to_string(Label label) {
    switch (label) {
        case Label::Factual: return "factual";
        case Label::NonFactual: return "non-factual";
        case Label::Unverifiable: return "unverifiable";
    }
    return "factual";
}

Label label_from_string(std::string_view text) {
    if (text == "factual") return Label::Factual;
    if (text == "non-factual" || text == "nonfactual") return Label::NonFactual;
    if (text == "unverifiable") return Label::Unverifiable;
    throw SchemaViolation("unknown label: " + std::string(text));
}

std::string to_string(Domain domain) {
    switch (domain) {
        case Domain::Low: return "low";
        case Domain::Medium: return "medium";
        case Domain::High: return "high";
        case Domain::Unbucketed: return "unbucketed";
    }
    return "unbucketed";
}

Domain domain_from_string(std::string_view text) {
    if (text == "low") return Domain::Low;
    if (text == "medium") return Domain::Medium;
    if (text == "high") return Domain::High;
    if (text == "unbucketed" || text.empty()) return Domain::Unbucketed;
    throw SchemaViolation("unknown domain: " + std::string(text));
}

EntityRef EntityRef::make(std::string name) {
    std::string key = normalize(name);
    if (key.empty()) throw SchemaViolation("entity name is empty after trimming");
    EntityRef ref;
    ref.name = std::move(name);
    ref.canonical_key = std::move(key);
    return ref;
}

std::optional<std::string> check_spans(std::string_view passage, const std::vector<MarkedSpan>& spans) {
    std::vector<MarkedSpan> sorted = spans;
    std::sort(sorted.begin(), sorted.end(),
              [](const MarkedSpan& a, const MarkedSpan& b) { return a.start < b.start; });
    size_t prev_end = 0;
    bool first = true;
    for (const auto& span : sorted) {
        if (span.start >= span.end)
            return "span [" + std::to_string(span.start) + "," + std::to_string(span.end) + ") is empty or inverted";
        if (span.end > passage.size())
            return "span end " + std::to_string(span.end) + " exceeds passage length " +
                   std::to_string(passage.size());
        if (!first && span.start < prev_end)
            return "span starting at " + std::to_string(span.start) + " overlaps the previous span";
        prev_end = span.end;
        first = false;
    }
    return std::nullopt;
}

UsageStats UsageStats::single(long long prompt, long long completion, double wall) {
    UsageStats u;
    u.prompt_tokens = prompt;
    u.completion_tokens = completion;
    u.total_tokens = prompt + completion;
    u.wall_time = wall;
    u.call_count = 1;
    return u;
}

UsageStats& UsageStats::operator+=(const UsageStats& other) {
    prompt_tokens += other.prompt_tokens;
    completion_tokens += other.completion_tokens;
    total_tokens += other.total_tokens;
    wall_time += other.wall_time;
    call_count += other.call_count;
    return *this;
}

Label aggregate_sentence_labels(const std::vector<SentenceRecord>& sentences) {
    if (sentences.empty()) throw EmptyPassage();
    for (const auto& sentence : sentences)
        if (sentence.label == Label::NonFactual) return Label::NonFactual;
    return Label::Factual;
}

double hallucination_ratio(const std::vector<SentenceRecord>& sentences) {
    if (sentences.empty()) throw EmptyPassage();
    size_t bad = 0;
    for (const auto& sentence : sentences)
        if (sentence.label == Label::NonFactual) ++bad;
    return static_cast<double>(bad) / static_cast<double>(sentences.size());
}

}  // namespace rvcheck
