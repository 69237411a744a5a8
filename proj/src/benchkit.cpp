#include "rvcheck/benchkit.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "rvcheck/errors.hpp"

namespace rvcheck {

Domain bucket_hit_count(long long hit_count) {
    if (hit_count < 100000) return Domain::Low;
    if (hit_count <= 1000000) return Domain::Medium;
    return Domain::High;
}

Domain bucket_entity(const EntityCandidate& candidate) {
    return bucket_hit_count(candidate.hit_count);
}

namespace {

// Unbiased bounded draw; uniform_int_distribution output is not pinned across
// standard library implementations, this is.
uint64_t bounded_draw(std::mt19937_64& rng, uint64_t n) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x = rng();
    while (x >= limit) x = rng();
    return x % n;
}

}  // namespace

std::map<Domain, std::vector<EntityCandidate>> sample_entities(
    const std::vector<EntityCandidate>& candidates, size_t n_per_bucket, uint64_t seed) {
    std::map<Domain, std::vector<EntityCandidate>> pools;
    for (const EntityCandidate& candidate : candidates)
        pools[bucket_entity(candidate)].push_back(candidate);

    std::mt19937_64 rng(seed);
    std::map<Domain, std::vector<EntityCandidate>> sampled;
    for (Domain domain : {Domain::Low, Domain::Medium, Domain::High}) {
        std::vector<EntityCandidate>& pool = pools[domain];
        if (pool.size() < n_per_bucket)
            throw InsufficientCandidates(to_string(domain), pool.size(), n_per_bucket);
        for (size_t i = 0; i < n_per_bucket; ++i) {
            size_t j = i + static_cast<size_t>(bounded_draw(rng, pool.size() - i));
            std::swap(pool[i], pool[j]);
        }
        pool.resize(n_per_bucket);
        sampled[domain] = std::move(pool);
    }
    return sampled;
}

std::string generation_prompt(const EntityRef& entity, const PromptSet& prompts) {
    return fill_prompt(prompts.generation, {{"Entity", entity.name}});
}

double cohens_kappa(std::span<const int> rater_a, std::span<const int> rater_b) {
    if (rater_a.size() != rater_b.size())
        throw LengthMismatch("raters labeled different item counts");
    if (rater_a.empty()) throw EmptyInput("no items to compute agreement over");

    const double n = static_cast<double>(rater_a.size());
    std::map<int, long long> count_a;
    std::map<int, long long> count_b;
    long long agreements = 0;
    for (size_t i = 0; i < rater_a.size(); ++i) {
        ++count_a[rater_a[i]];
        ++count_b[rater_b[i]];
        if (rater_a[i] == rater_b[i]) ++agreements;
    }
    const double p_o = static_cast<double>(agreements) / n;
    double p_e = 0.0;
    for (const auto& [category, a] : count_a) {
        auto it = count_b.find(category);
        if (it == count_b.end()) continue;
        p_e += (static_cast<double>(a) / n) * (static_cast<double>(it->second) / n);
    }
    if (1.0 - p_e == 0.0) return p_o == 1.0 ? 1.0 : 0.0;
    return (p_o - p_e) / (1.0 - p_e);
}

double cohens_kappa(const std::vector<Label>& rater_a, const std::vector<Label>& rater_b) {
    std::vector<int> a;
    std::vector<int> b;
    a.reserve(rater_a.size());
    b.reserve(rater_b.size());
    for (Label label : rater_a) a.push_back(static_cast<int>(label));
    for (Label label : rater_b) b.push_back(static_cast<int>(label));
    return cohens_kappa(std::span<const int>(a), std::span<const int>(b));
}

double fleiss_kappa(const std::vector<std::vector<long long>>& counts) {
    if (counts.empty()) throw EmptyInput("no items to compute agreement over");
    size_t categories = 0;
    for (const auto& row : counts) categories = std::max(categories, row.size());
    if (categories == 0) throw EmptyInput("no category counts");

    long long n = 0;
    for (long long c : counts.front()) n += c;
    if (n < 2) throw SchemaViolation("fleiss kappa needs at least 2 ratings per item");

    const double items = static_cast<double>(counts.size());
    std::vector<double> column_sums(categories, 0.0);
    double p_bar = 0.0;
    for (const auto& row : counts) {
        long long row_sum = 0;
        long long sq_sum = 0;
        for (size_t j = 0; j < row.size(); ++j) {
            if (row[j] < 0) throw SchemaViolation("negative rating count");
            row_sum += row[j];
            sq_sum += row[j] * row[j];
            column_sums[j] += static_cast<double>(row[j]);
        }
        if (row_sum != n) throw UnequalRaterCounts("items have different rating totals");
        p_bar += static_cast<double>(sq_sum - n) / static_cast<double>(n * (n - 1));
    }
    p_bar /= items;

    double p_e = 0.0;
    for (double column : column_sums) {
        double p_j = column / (items * static_cast<double>(n));
        p_e += p_j * p_j;
    }
    if (1.0 - p_e == 0.0) return p_bar == 1.0 ? 1.0 : 0.0;
    return (p_bar - p_e) / (1.0 - p_e);
}

AnnotationValidation validate_annotations(const std::vector<AnnotationRecord>& records) {
    AnnotationValidation validation;
    for (const AnnotationRecord& record : records) {
        auto error = [&](const std::string& message) {
            validation.issues.push_back({record.passage_id, true, message});
        };
        auto warn = [&](const std::string& message) {
            validation.issues.push_back({record.passage_id, false, message});
        };

        if (record.passage_id.empty()) {
            error("annotation has an empty passage id");
            continue;
        }
        if (record.annotator_id.empty()) {
            error("annotation has an empty annotator id");
            continue;
        }

        Label final_label;
        if (record.stage1_label == Label::Unverifiable) {
            if (!record.stage2_label) {
                error("unverifiable stage-1 label without a stage-2 resolution");
                continue;
            }
            if (*record.stage2_label == Label::Unverifiable) {
                error("stage-2 label may not be unverifiable");
                continue;
            }
            final_label = *record.stage2_label;
        } else {
            if (record.stage2_label) {
                error("stage-2 label present although stage 1 was decisive");
                continue;
            }
            final_label = record.stage1_label;
        }

        bool span_error = false;
        std::vector<MarkedSpan> sorted = record.marked_spans;
        std::sort(sorted.begin(), sorted.end(),
                  [](const MarkedSpan& a, const MarkedSpan& b) { return a.start < b.start; });
        for (size_t i = 0; i < sorted.size(); ++i) {
            if (sorted[i].start >= sorted[i].end) {
                error("marked span is empty or inverted");
                span_error = true;
                break;
            }
            if (i > 0 && sorted[i].start < sorted[i - 1].end) {
                error("marked spans overlap");
                span_error = true;
                break;
            }
        }
        if (span_error) continue;

        if (final_label == Label::NonFactual && record.marked_spans.empty())
            warn("non-factual annotation carries no marked spans");

        validation.finals.push_back(
            {record.passage_id, record.annotator_id, final_label, record.marked_spans});
    }
    return validation;
}

std::vector<EntityCandidate> load_hit_counts(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaViolation("cannot open hit counts file: " + path.string());
    std::vector<EntityCandidate> candidates;
    std::string line;
    long long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw SchemaViolation("hit counts line " + std::to_string(line_no) + ": missing tab");
        std::string entity = line.substr(0, tab);
        std::string count_text = line.substr(tab + 1);
        if (entity.empty())
            throw SchemaViolation("hit counts line " + std::to_string(line_no) + ": empty entity");
        long long count = 0;
        try {
            size_t consumed = 0;
            count = std::stoll(count_text, &consumed);
            if (consumed != count_text.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw SchemaViolation("hit counts line " + std::to_string(line_no) +
                                  ": bad count: " + count_text);
        }
        if (count < 0)
            throw SchemaViolation("hit counts line " + std::to_string(line_no) + ": negative count");
        candidates.push_back({EntityRef::make(entity), count});
    }
    return candidates;
}

}  // namespace rvcheck
