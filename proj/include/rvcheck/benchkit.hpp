#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rvcheck/core.hpp"
#include "rvcheck/prompts.hpp"

namespace rvcheck {

struct EntityCandidate {
    EntityRef entity;
    long long hit_count = 0;  // search-result proxy of training-data volume
};

// < 100K -> Low; 100K..1M inclusive -> Medium; > 1M -> High.
Domain bucket_hit_count(long long hit_count);
Domain bucket_entity(const EntityCandidate& candidate);

// Uniform sampling without replacement per bucket, deterministic for a fixed
// seed. Throws InsufficientCandidates naming the deficient bucket.
std::map<Domain, std::vector<EntityCandidate>> sample_entities(
    const std::vector<EntityCandidate>& candidates, size_t n_per_bucket, uint64_t seed);

std::string generation_prompt(const EntityRef& entity,
                              const PromptSet& prompts = PromptSet::embedded());

// Generic agreement statistics over integer category ids.
double cohens_kappa(std::span<const int> rater_a, std::span<const int> rater_b);
double cohens_kappa(const std::vector<Label>& rater_a, const std::vector<Label>& rater_b);

// counts[item][category] = number of raters assigning the category; every item
// must have the same rater total n >= 2.
double fleiss_kappa(const std::vector<std::vector<long long>>& counts);

struct AnnotationRecord {
    std::string passage_id;
    std::string annotator_id;
    Label stage1_label = Label::Factual;          // may be Unverifiable
    std::optional<Label> stage2_label;            // present iff stage1 is Unverifiable
    std::vector<MarkedSpan> marked_spans;
};

struct AnnotationIssue {
    std::string passage_id;
    bool is_error = false;  // schema violations exclude the record; warnings do not
    std::string message;
};

struct FinalAnnotation {
    std::string passage_id;
    std::string annotator_id;
    Label label = Label::Factual;  // never Unverifiable
    std::vector<MarkedSpan> marked_spans;
};

struct AnnotationValidation {
    std::vector<FinalAnnotation> finals;
    std::vector<AnnotationIssue> issues;
};

// Enforces the two-stage invariants, collecting violations instead of
// throwing; NonFactual records without marked spans get a warning issue.
AnnotationValidation validate_annotations(const std::vector<AnnotationRecord>& records);

// Tab-separated (entity, count) lines, UTF-8.
std::vector<EntityCandidate> load_hit_counts(const std::filesystem::path& path);

}  // namespace rvcheck
