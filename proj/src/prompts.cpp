#include "rvcheck/prompts.hpp"

#include <fstream>
#include <sstream>

namespace rvcheck {

namespace {

constexpr const char* kQgConstruct =
    "I will give you some information about the entity. You should use all this information to "
    "generate a question, and the answer to your question is the entity. Do not include the entity "
    "in your question. {Example} Entity: {Entity} Information: {Response} Question:";

constexpr const char* kQgExample =
    "Entity: Mount Everest Information: It is the highest mountain above sea level, located in the "
    "Himalayas on the border between Nepal and China. Question: What is the name of the highest "
    "mountain above sea level?";

constexpr const char* kQgRetry =
    "Your question must not contain {Entity}. Please generate the question again.";

constexpr const char* kQgAccess =
    "You should answer the following question as short as possible. {Question}";

constexpr const char* kEmConstruct =
    "{Response} Please list all features of {Entity} which are mentioned above with numbers, do "
    "not include {Entity} in your list.";

constexpr const char* kEmAccess =
    "You should find an entity that conforms to the following description: {Requirements}. If you "
    "fail to find a perfect match, please say an entity that matches the requirements as much as "
    "possible. You need to give the percentage of the entity that meets requirements.";

constexpr const char* kFuzzyMatch =
    "{Answer}\nPlease identify whether the above answer refers to {Entity}";

constexpr const char* kZeroShot =
    "I want you to act as a claim judger. Given a claim about an entity, your objective is to "
    "determine if the provided claim contains non-factual or hallucinated information. You should "
    "give your judgment based on world knowledge, and answer with factual or non-factual. {Claim}";

constexpr const char* kGeneration = "Please write a brief Wikipedia for {Entity}.";

constexpr const char* kExaminerOpen =
    "Your goal is to verify the correctness of the following claim. Claim: {Claim} Ask short "
    "factual questions that would help you verify the claim, one question per line. Do not answer "
    "the questions yourself.";

constexpr const char* kExaminerFollowup =
    "Your goal is to verify the correctness of the following claim. Claim: {Claim} Here are the "
    "questions you asked and the answers you received: {History} If the answers let you reach a "
    "conclusion, reply with exactly one line: Conclusion: factual or Conclusion: non-factual. "
    "Otherwise ask more short factual questions, one question per line.";

constexpr const char* kReprompt =
    "Reply with either questions (one per line) or a single line reading Conclusion: factual or "
    "Conclusion: non-factual.";

constexpr const char* kExaminee = "Please answer the following questions: {Questions}";

constexpr const char* kExamineeOriginal =
    "Here is your claim: {Claim} Please answer the following questions regarding your claim: "
    "{Questions}";

void load_one(const std::filesystem::path& dir, const char* name, std::string& slot) {
    std::ifstream in(dir / name, std::ios::binary);
    if (!in) return;
    std::ostringstream buf;
    buf << in.rdbuf();
    slot = buf.str();
}

}  // namespace

const PromptSet& PromptSet::embedded() {
    static const PromptSet set = [] {
        PromptSet p;
        p.qg_construct = kQgConstruct;
        p.qg_example = kQgExample;
        p.qg_retry = kQgRetry;
        p.qg_access = kQgAccess;
        p.em_construct = kEmConstruct;
        p.em_access = kEmAccess;
        p.fuzzy_match = kFuzzyMatch;
        p.zero_shot = kZeroShot;
        p.generation = kGeneration;
        p.lmvslm_examiner_open = kExaminerOpen;
        p.lmvslm_examiner_followup = kExaminerFollowup;
        p.lmvslm_reprompt = kReprompt;
        p.lmvslm_examinee = kExaminee;
        p.lmvslm_examinee_original = kExamineeOriginal;
        return p;
    }();
    return set;
}

PromptSet PromptSet::load_dir(const std::filesystem::path& dir) {
    PromptSet p = embedded();
    load_one(dir, "qg_construct.txt", p.qg_construct);
    load_one(dir, "qg_example.txt", p.qg_example);
    load_one(dir, "qg_retry.txt", p.qg_retry);
    load_one(dir, "qg_access.txt", p.qg_access);
    load_one(dir, "em_construct.txt", p.em_construct);
    load_one(dir, "em_access.txt", p.em_access);
    load_one(dir, "fuzzy_match.txt", p.fuzzy_match);
    load_one(dir, "zero_shot.txt", p.zero_shot);
    load_one(dir, "generation.txt", p.generation);
    load_one(dir, "lmvslm_examiner_open.txt", p.lmvslm_examiner_open);
    load_one(dir, "lmvslm_examiner_followup.txt", p.lmvslm_examiner_followup);
    load_one(dir, "lmvslm_reprompt.txt", p.lmvslm_reprompt);
    load_one(dir, "lmvslm_examinee.txt", p.lmvslm_examinee);
    load_one(dir, "lmvslm_examinee_original.txt", p.lmvslm_examinee_original);
    return p;
}

std::string fill_prompt(std::string_view tmpl,
                        std::initializer_list<std::pair<std::string_view, std::string_view>> subs) {
    std::string out(tmpl);
    for (const auto& [key, value] : subs) {
        std::string marker = "{" + std::string(key) + "}";
        size_t pos = 0;
        while ((pos = out.find(marker, pos)) != std::string::npos) {
            out.replace(pos, marker.size(), value);
            pos += value.size();
        }
    }
    return out;
}

}  // namespace rvcheck
