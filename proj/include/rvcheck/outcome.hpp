#pragma once

#include <string>
#include <vector>

#include "rvcheck/core.hpp"

namespace rvcheck {

struct TraceStep {
    enum class Kind { Call, Note };

    Kind kind = Kind::Call;
    std::string stage;
    std::string prompt;    // empty for notes
    std::string response;  // empty for notes
    std::string note;      // warnings, match decisions, failure records
    UsageStats usage;      // zero for notes; call_count == 1 for calls
};

using Trace = std::vector<TraceStep>;

// Number of provider calls recorded in a trace; equals usage.call_count of the
// outcome that owns it.
long long trace_call_count(const Trace& trace);

struct DetectionOutcome {
    Label verdict = Label::NonFactual;  // never Unverifiable
    Trace trace;                        // stages executed, in order
    UsageStats usage;                   // field-wise sum over trace calls
    std::string method_id;
    bool usage_estimated = false;  // any call carried estimated token counts
};

// Appends a call step and folds its usage into the running totals.
void record_call(Trace& trace, UsageStats& total, bool& estimated, const std::string& stage,
                 const std::string& prompt, const std::string& response, const UsageStats& usage,
                 bool usage_estimated, const std::string& note = "");

void record_note(Trace& trace, const std::string& stage, const std::string& note);

}  // namespace rvcheck
