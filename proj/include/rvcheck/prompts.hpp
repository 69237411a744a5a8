#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>

namespace rvcheck {

// Prompt templates with {Placeholder} slots. The embedded set mirrors the
// files under assets/prompts/ byte for byte; load_dir() lets users override
// individual templates from an edited copy of that directory.
struct PromptSet {
    std::string qg_construct;
    std::string qg_example;  // fixed in-context example for the {Example} slot
    std::string qg_retry;    // appended after a leakage-guard failure
    std::string qg_access;
    std::string em_construct;
    std::string em_access;
    std::string fuzzy_match;
    std::string zero_shot;
    std::string generation;
    // The examinee templates are quoted forms; the examiner templates are our
    // reconstruction of the cross-examination roles and are meant to be edited.
    std::string lmvslm_examiner_open;
    std::string lmvslm_examiner_followup;
    std::string lmvslm_reprompt;
    std::string lmvslm_examinee;
    std::string lmvslm_examinee_original;

    static const PromptSet& embedded();
    // Missing files keep their embedded defaults.
    static PromptSet load_dir(const std::filesystem::path& dir);
};

// Replaces every "{Key}" occurrence; substitution values are inserted verbatim.
std::string fill_prompt(std::string_view tmpl,
                        std::initializer_list<std::pair<std::string_view, std::string_view>> subs);

}  // namespace rvcheck
