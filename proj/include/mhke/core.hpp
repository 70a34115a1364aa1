#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mhke/errors.hpp"

namespace mhke {

/// Canonical form used everywhere answers and entities are compared:
/// ASCII-lowercased, whitespace runs collapsed, trimmed, and a trailing run
/// of sentence punctuation removed. Bytes outside ASCII pass through
/// unchanged, so diacritics survive. Idempotent.
std::string normalize_entity(const std::string& raw);

/// Lowercased word tokens, split on ASCII non-alphanumerics. UTF-8
/// continuation bytes count as word characters.
std::vector<std::string> tokenize(const std::string& text);

/// A single (subject, relation, object) fact.
struct FactTriple {
    std::string subject;
    std::string relation;
    std::string object;

    bool valid() const;
    bool operator==(const FactTriple&) const = default;
};

/// One factual edit: the object of (subject, relation) changes to
/// new_object. Stored together with the single-hop question it answers and
/// a declarative statement form.
struct FactEdit {
    std::string subject;
    std::string relation;
    std::string old_object;  // may be empty when the dataset omits it
    std::string new_object;
    std::string atomic_question;
    std::string statement;

    bool valid() const;
    /// Normalized (subject, relation) pair; one edit per slot in memory.
    std::pair<std::string, std::string> slot_key() const;
    bool operator==(const FactEdit&) const = default;
};

enum class GuidedBy { None, Fact, Case, Both };

std::string to_string(GuidedBy g);
GuidedBy guided_by_from_string(const std::string& s);

/// One resolved hop: the subquestion asked and the answer used, plus where
/// the answer came from.
struct DecompositionStep {
    std::string subquestion;
    std::string answer;
    std::optional<FactEdit> retrieved_edit;
    GuidedBy guided_by = GuidedBy::None;

    bool operator==(const DecompositionStep&) const = default;
};

/// A question together with its full decomposition record. Only succeeded
/// records may enter the case library.
struct CaseRecord {
    std::string question;
    std::vector<DecompositionStep> steps;
    std::string final_answer;
    bool succeeded = false;

    bool valid() const;
    bool operator==(const CaseRecord&) const = default;
};

enum class GuidancePayload { Question, FactStatement };

/// Tunables for the solve loop. Defaults follow the reference setup:
/// top-3 pre-retrieval, case threshold 0.80, temperature 0, 200 max tokens.
struct EngineConfig {
    int pre_retrieval_n = 3;
    double case_similarity_threshold = 0.80;
    double precise_retrieval_threshold = 0.85;
    int max_hops = 8;
    int max_backtracks = 4;
    bool fact_guidance_enabled = true;
    bool case_guidance_enabled = true;
    bool backtracking_enabled = true;
    GuidancePayload guidance_payload = GuidancePayload::Question;
    bool random_case_selection = false;  // ablation: random record instead of argmax
    std::uint64_t random_case_seed = 0;
    double llm_temperature = 0.0;
    int llm_max_tokens = 200;

    /// Throws ConfigError when a field is out of range.
    void validate() const;
};

void to_json(nlohmann::json& j, const FactTriple& t);
void from_json(const nlohmann::json& j, FactTriple& t);
void to_json(nlohmann::json& j, const FactEdit& e);
void from_json(const nlohmann::json& j, FactEdit& e);
void to_json(nlohmann::json& j, const DecompositionStep& s);
void from_json(const nlohmann::json& j, DecompositionStep& s);
void to_json(nlohmann::json& j, const CaseRecord& r);
void from_json(const nlohmann::json& j, CaseRecord& r);
void to_json(nlohmann::json& j, const EngineConfig& c);
void from_json(const nlohmann::json& j, EngineConfig& c);

}  // namespace mhke
