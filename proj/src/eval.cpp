#include "rvcheck/eval.hpp"

#include <cmath>
#include <sstream>

#include "rvcheck/errors.hpp"

namespace rvcheck {

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& other) {
    tp += other.tp;
    fp += other.fp;
    fn += other.fn;
    tn += other.tn;
    return *this;
}

MetricBundle metrics_from_counts(const ConfusionCounts& counts) {
    MetricBundle bundle;
    bundle.counts = counts;
    const double tp = static_cast<double>(counts.tp);
    if (counts.tp + counts.fp > 0) bundle.precision = tp / static_cast<double>(counts.tp + counts.fp);
    if (counts.tp + counts.fn > 0) bundle.recall = tp / static_cast<double>(counts.tp + counts.fn);
    if (bundle.precision + bundle.recall > 0.0)
        bundle.f1 = 2.0 * bundle.precision * bundle.recall / (bundle.precision + bundle.recall);
    if (counts.total() > 0)
        bundle.accuracy =
            static_cast<double>(counts.tp + counts.tn) / static_cast<double>(counts.total());
    return bundle;
}

MetricBundle compute_metrics(const std::vector<std::pair<Label, Label>>& pairs) {
    if (pairs.empty()) throw EmptyInput("no verdict/gold pairs to score");
    ConfusionCounts counts;
    for (const auto& [verdict, gold] : pairs) {
        if (verdict == Label::Unverifiable || gold == Label::Unverifiable)
            throw SchemaViolation("metrics accept only Factual and NonFactual labels");
        bool predicted = verdict == Label::NonFactual;
        bool actual = gold == Label::NonFactual;
        if (predicted && actual) ++counts.tp;
        else if (predicted && !actual) ++counts.fp;
        else if (!predicted && actual) ++counts.fn;
        else ++counts.tn;
    }
    return metrics_from_counts(counts);
}

std::optional<double> min_hallucination_ratio_rejected(const std::vector<WikiBioRecord>& rejected) {
    std::optional<double> minimum;
    for (const WikiBioRecord& record : rejected) {
        double ratio = hallucination_ratio(record.sentences);
        if (!minimum || ratio < *minimum) minimum = ratio;
    }
    return minimum;
}

CostSummary cost_report(const std::vector<DetectionOutcome>& outcomes) {
    CostSummary summary;
    if (outcomes.empty()) return summary;
    double tokens = 0.0;
    double seconds = 0.0;
    for (const DetectionOutcome& outcome : outcomes) {
        tokens += static_cast<double>(outcome.usage.total_tokens);
        seconds += outcome.usage.wall_time;
    }
    summary.avg_tokens = tokens / static_cast<double>(outcomes.size());
    summary.avg_seconds = seconds / static_cast<double>(outcomes.size());
    return summary;
}

std::string format_metric_percent(double value01) {
    if (value01 == 1.0) return "100";
    long long tenths = std::llround(value01 * 1000.0);
    std::ostringstream out;
    out << tenths / 10 << "." << tenths % 10;
    return out.str();
}

std::string format_ratio_percent(double value01) {
    if (value01 == 0.0) return "0%";
    long long tenths = std::llround(value01 * 1000.0);
    std::ostringstream out;
    out << tenths / 10 << "." << tenths % 10 << "%";
    return out.str();
}

namespace {

void append_metric_row(std::ostringstream& out, const std::string& name,
                       const MetricBundle& bundle) {
    out << "| " << name << " | " << format_metric_percent(bundle.f1) << " | "
        << format_metric_percent(bundle.precision) << " | "
        << format_metric_percent(bundle.recall) << " | "
        << format_metric_percent(bundle.accuracy) << " |\n";
}

std::string format_fixed(double value, int decimals) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(decimals);
    out << value;
    return out.str();
}

}  // namespace

std::string render_report_table(const EvaluationReport& report, bool by_domain, bool wikibio_mode) {
    std::ostringstream out;
    out << "method: " << report.method_id << "  dataset: " << report.dataset_id
        << "  config: " << report.config_digest;
    if (report.usage_estimated) out << "  (token usage estimated)";
    out << "\n";
    if (report.selfcheck_threshold) {
        out << "threshold: " << format_fixed(*report.selfcheck_threshold, 4);
        if (!report.threshold_objective.empty())
            out << " (objective: " << report.threshold_objective << ")";
        out << "\n";
    }
    out << "| split | F1 | Precision | Recall | Accuracy |\n";
    out << "| --- | --- | --- | --- | --- |\n";
    if (by_domain) {
        for (Domain domain : {Domain::Low, Domain::Medium, Domain::High}) {
            auto it = report.per_domain.find(domain);
            if (it != report.per_domain.end()) append_metric_row(out, to_string(domain), it->second);
        }
    }
    append_metric_row(out, "overall", report.overall);
    if (wikibio_mode) {
        out << "min hallucination ratio among rejected: "
            << (report.min_hal_ratio_rejected ? format_ratio_percent(*report.min_hal_ratio_rejected)
                                              : "N/A")
            << "\n";
    }
    out << "avg token cost: " << format_fixed(report.avg_token_cost, 1)
        << "  avg time delay: " << format_fixed(report.avg_time_delay, 2) << "s\n";
    return out.str();
}

}  // namespace rvcheck
