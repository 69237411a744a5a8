#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rvcheck/core.hpp"
#include "rvcheck/outcome.hpp"

namespace rvcheck {

// NonFactual is the positive class: a method "rejects" a passage when it
// flags hallucination.
struct ConfusionCounts {
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;
    long long tn = 0;

    long long total() const { return tp + fp + fn + tn; }
    ConfusionCounts& operator+=(const ConfusionCounts& other);
    bool operator==(const ConfusionCounts&) const = default;
};

struct MetricBundle {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
    ConfusionCounts counts;
};

MetricBundle metrics_from_counts(const ConfusionCounts& counts);

// pairs are (verdict, gold); labels must be Factual or NonFactual.
MetricBundle compute_metrics(const std::vector<std::pair<Label, Label>>& pairs);

// Minimum hallucination ratio over the rejected records; nullopt ("N/A") when
// nothing was rejected.
std::optional<double> min_hallucination_ratio_rejected(const std::vector<WikiBioRecord>& rejected);

struct CostSummary {
    double avg_tokens = 0.0;
    double avg_seconds = 0.0;
};

CostSummary cost_report(const std::vector<DetectionOutcome>& outcomes);

struct EvaluationReport {
    MetricBundle overall;
    std::map<Domain, MetricBundle> per_domain;  // domains present in the dataset
    std::optional<double> min_hal_ratio_rejected;
    double avg_token_cost = 0.0;
    double avg_time_delay = 0.0;
    std::string method_id;
    std::string dataset_id;
    std::string config_digest;
    bool usage_estimated = false;
    // selfcheck metadata: the applied threshold and the objective it optimizes
    std::optional<double> selfcheck_threshold;
    std::string threshold_objective;
};

// Table formatting: percentages with one decimal, rounded half away from
// zero; an exact 100 prints without the decimal, as in "100".
std::string format_metric_percent(double value01);
// Ratio/accuracy formatting with a percent sign; exact 0 prints as "0%".
std::string format_ratio_percent(double value01);

std::string render_report_table(const EvaluationReport& report, bool by_domain, bool wikibio_mode);

}  // namespace rvcheck
