#include "rvcheck/outcome.hpp"

namespace rvcheck {

long long trace_call_count(const Trace& trace) {
    long long calls = 0;
    for (const auto& step : trace)
        if (step.kind == TraceStep::Kind::Call) ++calls;
    return calls;
}

void record_call(Trace& trace, UsageStats& total, bool& estimated, const std::string& stage,
                 const std::string& prompt, const std::string& response, const UsageStats& usage,
                 bool usage_estimated, const std::string& note) {
    TraceStep step;
    step.kind = TraceStep::Kind::Call;
    step.stage = stage;
    step.prompt = prompt;
    step.response = response;
    step.note = note;
    step.usage = usage;
    trace.push_back(std::move(step));
    total += usage;
    estimated = estimated || usage_estimated;
}

void record_note(Trace& trace, const std::string& stage, const std::string& note) {
    TraceStep step;
    step.kind = TraceStep::Kind::Note;
    step.stage = stage;
    step.note = note;
    trace.push_back(std::move(step));
}

}  // namespace rvcheck
