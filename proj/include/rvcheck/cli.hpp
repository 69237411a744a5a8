#pragma once

#include <optional>
#include <string>

namespace rvcheck {

// Exit codes: 0 success, 2 validation error, 3 provider abort before any
// progress, 4 partial completion (resume with --resume).
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitProviderAbort = 3;
inline constexpr int kExitPartial = 4;

struct RunConfig {
    std::string method_id = "rv-em";  // all-false | zero-shot | lmvslm | selfcheck | rv-qg | rv-em
    std::string matching = "exact";   // exact | fuzzy
    std::string provider = "mock";    // mock | live
    std::string mock_script;
    std::string model_id = "mock";
    std::string profile = "default";  // default | small (low-temperature open-model settings)
    double temperature = 0.0;
    double top_p = 1.0;
    std::optional<int> top_k;
    double em_threshold = 90.0;
    int n_samples = 5;
    std::string scorer_id = "overlap";
    double selfcheck_threshold = 0.5;
    int max_turns = 3;
    bool lmvslm_original_prompt = false;
    uint64_t seed = 0;
    int max_in_flight = 1;
    std::string prompts_dir;
};

// Stable digest of the canonicalized config; stamped on every results line.
std::string config_digest(const RunConfig& config);

int run_cli(int argc, const char* const* argv);

}  // namespace rvcheck
