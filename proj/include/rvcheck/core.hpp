#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rvcheck/errors.hpp"

namespace rvcheck {

// Unverifiable is a stage-1 annotation state only; final dataset labels and
// detection verdicts are always Factual or NonFactual.
enum class Label { Factual, NonFactual, Unverifiable };

enum class Domain { Low, Medium, High, Unbucketed };

std::string to_string(Label label);
Label label_from_string(std::string_view text);
std::string to_string(Domain domain);
Domain domain_from_string(std::string_view text);

struct EntityRef {
    std::string name;
    std::string canonical_key;  // normalize(name)

    static EntityRef make(std::string name);  // throws SchemaViolation on empty name
    bool operator==(const EntityRef&) const = default;
};

// Byte range [start, end) into the passage's UTF-8 text.
struct MarkedSpan {
    size_t start = 0;
    size_t end = 0;
    std::string note;

    bool operator==(const MarkedSpan&) const = default;
};

// Returns an error message if spans fall outside the passage or overlap;
// nullopt when they are well formed. Spans need not be pre-sorted.
std::optional<std::string> check_spans(std::string_view passage, const std::vector<MarkedSpan>& spans);

struct Provenance {
    std::string generator_model_id;
    std::optional<double> generation_temperature;

    bool operator==(const Provenance&) const = default;
};

struct PassageRecord {
    std::string id;
    EntityRef entity;
    std::string passage;
    Label gold_label = Label::Factual;
    Domain domain = Domain::Unbucketed;
    std::vector<MarkedSpan> marked_spans;
    Provenance provenance;

    bool operator==(const PassageRecord&) const = default;
};

struct SentenceRecord {
    std::string text;
    Label label = Label::Factual;

    bool operator==(const SentenceRecord&) const = default;
};

struct WikiBioRecord {
    std::string id;
    EntityRef entity;
    std::vector<SentenceRecord> sentences;

    bool operator==(const WikiBioRecord&) const = default;
};

struct UsageStats {
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
    long long total_tokens = 0;
    double wall_time = 0.0;  // seconds
    long long call_count = 0;

    static UsageStats single(long long prompt, long long completion, double wall = 0.0);

    UsageStats& operator+=(const UsageStats& other);
    friend UsageStats operator+(UsageStats a, const UsageStats& b) { return a += b; }
    bool operator==(const UsageStats&) const = default;
};

// NonFactual iff any sentence is NonFactual ("even a minor error"), else Factual.
Label aggregate_sentence_labels(const std::vector<SentenceRecord>& sentences);

// count(NonFactual) / count(all), in [0,1].
double hallucination_ratio(const std::vector<SentenceRecord>& sentences);

}  // namespace rvcheck
