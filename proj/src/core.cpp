#include "mhke/core.hpp"

#include <cctype>

namespace mhke {

namespace {

bool is_terminal_punct(unsigned char c) {
    return c == '.' || c == '!' || c == '?' || c == ',' || c == ';' || c == ':';
}

bool non_empty_normalized(const std::string& s) {
    return !normalize_entity(s).empty();
}

}  // namespace

std::string normalize_entity(const std::string& raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (unsigned char c : raw) {
        if (std::isspace(c)) {
            if (!out.empty()) pending_space = true;
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    while (!out.empty() &&
           (is_terminal_punct(static_cast<unsigned char>(out.back())) || out.back() == ' ')) {
        out.pop_back();
    }
    return out;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        const bool word_char = std::isalnum(c) || c >= 0x80;
        if (word_char) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

bool FactTriple::valid() const {
    return non_empty_normalized(subject) && non_empty_normalized(relation) &&
           non_empty_normalized(object);
}

bool FactEdit::valid() const {
    return non_empty_normalized(subject) && non_empty_normalized(relation) &&
           non_empty_normalized(new_object) && non_empty_normalized(atomic_question) &&
           non_empty_normalized(statement);
}

std::pair<std::string, std::string> FactEdit::slot_key() const {
    return {normalize_entity(subject), normalize_entity(relation)};
}

bool CaseRecord::valid() const {
    if (!succeeded) return true;
    if (steps.empty()) return false;
    return normalize_entity(final_answer) == normalize_entity(steps.back().answer);
}

std::string to_string(GuidedBy g) {
    switch (g) {
        case GuidedBy::None: return "none";
        case GuidedBy::Fact: return "fact";
        case GuidedBy::Case: return "case";
        case GuidedBy::Both: return "both";
    }
    return "none";
}

GuidedBy guided_by_from_string(const std::string& s) {
    if (s == "fact") return GuidedBy::Fact;
    if (s == "case") return GuidedBy::Case;
    if (s == "both") return GuidedBy::Both;
    if (s == "none") return GuidedBy::None;
    throw ConfigError("unknown guided_by value: " + s);
}

void EngineConfig::validate() const {
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in_unit(case_similarity_threshold))
        throw ConfigError("case_similarity_threshold must be in [0,1]");
    if (!in_unit(precise_retrieval_threshold))
        throw ConfigError("precise_retrieval_threshold must be in [0,1]");
    if (pre_retrieval_n < 1) throw ConfigError("pre_retrieval_n must be >= 1");
    if (max_hops < 1) throw ConfigError("max_hops must be >= 1");
    if (max_backtracks < 0) throw ConfigError("max_backtracks must be >= 0");
    if (llm_max_tokens < 1) throw ConfigError("llm_max_tokens must be >= 1");
}

void to_json(nlohmann::json& j, const FactTriple& t) {
    j = nlohmann::json{{"subject", t.subject}, {"relation", t.relation}, {"object", t.object}};
}

void from_json(const nlohmann::json& j, FactTriple& t) {
    j.at("subject").get_to(t.subject);
    j.at("relation").get_to(t.relation);
    j.at("object").get_to(t.object);
}

void to_json(nlohmann::json& j, const FactEdit& e) {
    j = nlohmann::json{{"subject", e.subject},
                       {"relation", e.relation},
                       {"old_object", e.old_object},
                       {"new_object", e.new_object},
                       {"atomic_question", e.atomic_question},
                       {"statement", e.statement}};
}

void from_json(const nlohmann::json& j, FactEdit& e) {
    j.at("subject").get_to(e.subject);
    j.at("relation").get_to(e.relation);
    e.old_object = j.value("old_object", "");
    j.at("new_object").get_to(e.new_object);
    j.at("atomic_question").get_to(e.atomic_question);
    j.at("statement").get_to(e.statement);
}

void to_json(nlohmann::json& j, const DecompositionStep& s) {
    j = nlohmann::json{{"subquestion", s.subquestion}, {"answer", s.answer}};
    if (s.retrieved_edit) j["retrieved_edit"] = *s.retrieved_edit;
    if (s.guided_by != GuidedBy::None) j["guided_by"] = to_string(s.guided_by);
}

void from_json(const nlohmann::json& j, DecompositionStep& s) {
    j.at("subquestion").get_to(s.subquestion);
    j.at("answer").get_to(s.answer);
    s.retrieved_edit.reset();
    if (j.contains("retrieved_edit") && !j["retrieved_edit"].is_null()) {
        s.retrieved_edit = j["retrieved_edit"].get<FactEdit>();
    }
    s.guided_by = guided_by_from_string(j.value("guided_by", "none"));
}

void to_json(nlohmann::json& j, const CaseRecord& r) {
    j = nlohmann::json{
        {"question", r.question}, {"steps", r.steps}, {"final_answer", r.final_answer}};
    if (!r.succeeded) j["succeeded"] = false;
}

void from_json(const nlohmann::json& j, CaseRecord& r) {
    j.at("question").get_to(r.question);
    r.steps = j.value("steps", std::vector<DecompositionStep>{});
    j.at("final_answer").get_to(r.final_answer);
    r.succeeded = j.value("succeeded", true);
}

void to_json(nlohmann::json& j, const EngineConfig& c) {
    j = nlohmann::json{
        {"pre_retrieval_n", c.pre_retrieval_n},
        {"case_similarity_threshold", c.case_similarity_threshold},
        {"precise_retrieval_threshold", c.precise_retrieval_threshold},
        {"max_hops", c.max_hops},
        {"max_backtracks", c.max_backtracks},
        {"fact_guidance_enabled", c.fact_guidance_enabled},
        {"case_guidance_enabled", c.case_guidance_enabled},
        {"backtracking_enabled", c.backtracking_enabled},
        {"guidance_payload",
         c.guidance_payload == GuidancePayload::Question ? "question" : "fact_statement"},
        {"random_case_selection", c.random_case_selection},
        {"random_case_seed", c.random_case_seed},
        {"llm_temperature", c.llm_temperature},
        {"llm_max_tokens", c.llm_max_tokens}};
}

void from_json(const nlohmann::json& j, EngineConfig& c) {
    EngineConfig defaults;
    c.pre_retrieval_n = j.value("pre_retrieval_n", defaults.pre_retrieval_n);
    c.case_similarity_threshold =
        j.value("case_similarity_threshold", defaults.case_similarity_threshold);
    c.precise_retrieval_threshold =
        j.value("precise_retrieval_threshold", defaults.precise_retrieval_threshold);
    c.max_hops = j.value("max_hops", defaults.max_hops);
    c.max_backtracks = j.value("max_backtracks", defaults.max_backtracks);
    c.fact_guidance_enabled = j.value("fact_guidance_enabled", defaults.fact_guidance_enabled);
    c.case_guidance_enabled = j.value("case_guidance_enabled", defaults.case_guidance_enabled);
    c.backtracking_enabled = j.value("backtracking_enabled", defaults.backtracking_enabled);
    const std::string payload = j.value("guidance_payload", "question");
    if (payload == "question") {
        c.guidance_payload = GuidancePayload::Question;
    } else if (payload == "fact_statement" || payload == "fact") {
        c.guidance_payload = GuidancePayload::FactStatement;
    } else {
        throw ConfigError("unknown guidance_payload: " + payload);
    }
    c.random_case_selection = j.value("random_case_selection", defaults.random_case_selection);
    c.random_case_seed = j.value("random_case_seed", defaults.random_case_seed);
    c.llm_temperature = j.value("llm_temperature", defaults.llm_temperature);
    c.llm_max_tokens = j.value("llm_max_tokens", defaults.llm_max_tokens);
}

}  // namespace mhke
