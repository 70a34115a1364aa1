#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mhke/case_library.hpp"
#include "mhke/core.hpp"
#include "mhke/edited_memory.hpp"
#include "mhke/llm.hpp"

namespace mhke {

/// Snapshot pushed when a guided decomposition produces a subquestion:
/// restoring it replays that hop without fact guidance.
struct SavedState {
    std::string working_question;
    std::vector<DecompositionStep> trace_snapshot;
    int hop_index = 0;
};

/// Live state of one solve. hop_index always equals trace.size().
struct ReasoningState {
    std::string original_question;
    std::string working_question;
    int hop_index = 0;
    std::vector<DecompositionStep> trace;
    std::vector<SavedState> backtrack_stack;
    bool guidance_active = false;
};

struct GuidanceUses {
    int fact = 0;
    int case_records = 0;
};

struct SolveResult {
    std::string final_answer;
    std::vector<DecompositionStep> trace;
    int retrieved_edit_count = 0;
    int backtrack_count = 0;
    GuidanceUses guidance_uses;
    bool truncated = false;       // hit max_hops before a final answer
    int stack_depth_at_end = 0;
    std::int64_t tokens_in = 0;
    std::int64_t tokens_out = 0;
};

nlohmann::json solve_result_to_json(const SolveResult& result);

/// The decomposition could not be parsed even after one re-prompt; carries
/// whatever trace had been built so the harness can log it.
class AbortedCaseError : public Error {
public:
    AbortedCaseError(const std::string& message, std::vector<DecompositionStep> partial_trace)
        : Error(message), partial_trace_(std::move(partial_trace)) {}

    const std::vector<DecompositionStep>& partial_trace() const { return partial_trace_; }

private:
    std::vector<DecompositionStep> partial_trace_;
};

/// Everything one solve needs. memory, backend and templates are required;
/// library may be null (no case guidance possible then).
struct SolveContext {
    const EditedFactMemory* memory = nullptr;
    const CaseLibrary* library = nullptr;
    LlmBackend* backend = nullptr;
    const TemplateCatalog* templates = nullptr;
};

/// Runs the iterative solve loop on one multi-hop question:
/// look up a similar solved case once, then per hop pre-retrieve candidate
/// edits, let the model judge whether one should guide the decomposition,
/// decompose, resolve the subquestion by precise retrieval or by asking the
/// model directly, rewrite the working question, and repeat until a final
/// answer or max_hops. When a final answer arrives while saved unguided
/// states are still on the stack, the most recent one is restored and that
/// hop is replayed without guidance (at most max_backtracks times).
SolveResult solve(const std::string& question, const SolveContext& ctx,
                  const EngineConfig& config);

/// Renders a case record the way it is spliced into decomposition prompts.
std::string render_case_record(const CaseRecord& record);

}  // namespace mhke
