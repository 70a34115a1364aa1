#include "mhke/controller.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace mhke {

namespace {

std::string trim_copy(const std::string& s) {
    std::size_t begin = 0;
    std::size_t end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return s.substr(begin, end - begin);
}

/// First non-empty line, with an echoed label (e.g. "Answer:") stripped.
std::string extract_line_payload(const std::string& reply,
                                 std::initializer_list<const char*> labels) {
    std::istringstream lines(reply);
    std::string line;
    while (std::getline(lines, line)) {
        std::string candidate = trim_copy(line);
        if (candidate.empty()) continue;
        for (const char* label : labels) {
            const std::size_t len = std::string(label).size();
            if (candidate.size() >= len) {
                std::string head = candidate.substr(0, len);
                std::transform(head.begin(), head.end(), head.begin(), [](unsigned char c) {
                    return static_cast<char>(std::tolower(c));
                });
                if (head == label) {
                    candidate = trim_copy(candidate.substr(len));
                    break;
                }
            }
        }
        if (!candidate.empty()) return candidate;
    }
    return trim_copy(reply);
}

std::string render_trace(const std::vector<DecompositionStep>& trace) {
    std::string out;
    for (const auto& step : trace) {
        out += "Subquestion: " + step.subquestion + "\nAnswer: " + step.answer + "\n";
    }
    if (out.empty()) out = "(none yet)\n";
    return out;
}

std::string render_candidates(const std::vector<FactEdit>& candidates) {
    std::string out;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        out += std::to_string(i + 1) + ". " + candidates[i].atomic_question + "\n";
    }
    return out;
}

GuidedBy guided_by_of(bool fact, bool case_active) {
    if (fact && case_active) return GuidedBy::Both;
    if (fact) return GuidedBy::Fact;
    if (case_active) return GuidedBy::Case;
    return GuidedBy::None;
}

struct TokenTally {
    std::int64_t in = 0;
    std::int64_t out = 0;

    void add(const LlmReply& reply) {
        in += reply.input_tokens;
        out += reply.output_tokens;
    }
};

}  // namespace

std::string render_case_record(const CaseRecord& record) {
    std::string out = "Question: " + record.question + "\n";
    for (const auto& step : record.steps) {
        out += "Subquestion: " + step.subquestion + "\nAnswer: " + step.answer + "\n";
    }
    out += "Final answer: " + record.final_answer + "\n";
    return out;
}

SolveResult solve(const std::string& question, const SolveContext& ctx,
                  const EngineConfig& config) {
    if (question.empty()) throw EmptyTextError("solve: empty question");
    if (!ctx.memory || !ctx.backend || !ctx.templates) {
        throw ConfigError("solve: memory, backend and templates are required");
    }
    config.validate();

    const GenerationParams params{config.llm_temperature, config.llm_max_tokens, std::nullopt};
    TokenTally tokens;
    auto generate = [&](const std::string& prompt) {
        LlmReply reply = ctx.backend->generate(prompt, params);
        tokens.add(reply);
        return reply;
    };

    ReasoningState state;
    state.original_question = question;
    state.working_question = question;

    // Case-level guidance happens once per solve, on the original question.
    std::string case_block;
    bool case_active = false;
    if (config.case_guidance_enabled && ctx.library) {
        auto similar = config.random_case_selection
                           ? ctx.library->lookup_random(question, config.random_case_seed)
                           : ctx.library->lookup(question, config.case_similarity_threshold);
        if (similar) {
            case_block = "Here is the decomposition record of a similar solved question:\n" +
                         render_case_record(*similar) + "\n";
            case_active = true;
        }
    }

    SolveResult result;
    result.guidance_uses.case_records = case_active ? 1 : 0;

    bool forced_unguided = false;
    while (true) {
        // Fact-level guidance: pre-retrieve candidates from the edited-fact
        // memory and let the model judge whether one of them should steer
        // this hop. Hop 0 queries with the original question (the working
        // question has not been rewritten yet at that point).
        std::optional<FactEdit> guide;
        if (config.fact_guidance_enabled && !forced_unguided && !ctx.memory->empty()) {
            auto candidates =
                ctx.memory->pre_retrieve(state.working_question, config.pre_retrieval_n);
            if (!candidates.empty()) {
                const std::string judge_prompt = ctx.templates->get(TemplateName::Judge)
                                                     .render({{"question", state.working_question},
                                                              {"candidates",
                                                               render_candidates(candidates)}});
                const LlmReply reply = generate(judge_prompt);
                std::optional<int> selected;
                try {
                    selected = parse_judgment(reply.text, static_cast<int>(candidates.size()));
                } catch (const UnparseableJudgmentError&) {
                    selected = std::nullopt;  // unreadable judgment means no guidance
                }
                if (selected) guide = candidates[static_cast<std::size_t>(*selected - 1)];
            }
        }
        forced_unguided = false;

        // Decompose: guided template with the payload, or the static one.
        const std::string trace_block = render_trace(state.trace);
        std::string prompt;
        if (guide) {
            const std::string payload = config.guidance_payload == GuidancePayload::Question
                                            ? guide->atomic_question
                                            : guide->statement;
            prompt = ctx.templates->get(TemplateName::DecomposeGuided)
                         .render({{"case_block", case_block},
                                  {"question", state.original_question},
                                  {"trace", trace_block},
                                  {"guidance", payload}});
        } else {
            prompt = ctx.templates->get(TemplateName::DecomposeStatic)
                         .render({{"case_block", case_block},
                                  {"question", state.original_question},
                                  {"trace", trace_block}});
        }

        StepOutput parsed;
        try {
            parsed = parse_decomposition(generate(prompt).text);
        } catch (const UnparseableDecompositionError&) {
            // One re-prompt with an explicit format reminder before aborting.
            const std::string retry_prompt =
                prompt +
                "\nRespond with exactly one line starting with \"Subquestion:\" or \"Final "
                "answer:\".";
            try {
                parsed = parse_decomposition(generate(retry_prompt).text);
            } catch (const UnparseableDecompositionError& e) {
                throw AbortedCaseError(std::string("decomposition unparseable after retry: ") +
                                           e.what(),
                                       state.trace);
            }
        }
        if (guide) ++result.guidance_uses.fact;

        if (parsed.kind == StepOutput::Kind::FinalAnswer) {
            // A final answer while saved states remain means no edit was hit
            // since the last guided decomposition: restore the most recent
            // unguided state and replay that hop without guidance.
            if (config.backtracking_enabled && !state.backtrack_stack.empty() &&
                result.backtrack_count < config.max_backtracks) {
                SavedState saved = std::move(state.backtrack_stack.back());
                state.backtrack_stack.pop_back();
                state.working_question = std::move(saved.working_question);
                state.trace = std::move(saved.trace_snapshot);
                state.hop_index = saved.hop_index;
                ++result.backtrack_count;
                forced_unguided = true;
                continue;
            }
            result.final_answer = parsed.text;
            break;
        }

        // Subquestion. A guided decomposition that produced a subquestion
        // saves the unguided state it replaced.
        const std::string& subquestion = parsed.text;
        if (guide) {
            state.backtrack_stack.push_back(
                SavedState{state.working_question, state.trace, state.hop_index});
        }

        auto hit = ctx.memory->precise_retrieve(subquestion, config.precise_retrieval_threshold);
        std::string answer;
        if (hit) {
            answer = hit->new_object;
            state.backtrack_stack.clear();  // a retrieved edit validates the guided path
        } else {
            const std::string qa_prompt =
                ctx.templates->get(TemplateName::Answer).render({{"question", subquestion}});
            answer = extract_line_payload(generate(qa_prompt).text, {"answer:"});
        }

        state.trace.push_back(DecompositionStep{subquestion, answer, hit,
                                                guided_by_of(guide.has_value(), case_active)});

        const std::string rewrite_prompt =
            ctx.templates->get(TemplateName::Rewrite)
                .render({{"question", state.working_question},
                         {"subquestion", subquestion},
                         {"answer", answer}});
        state.working_question =
            extract_line_payload(generate(rewrite_prompt).text, {"rewritten question:"});

        ++state.hop_index;
        if (state.hop_index >= config.max_hops) {
            result.final_answer = answer;
            result.truncated = true;
            break;
        }
    }

    result.trace = std::move(state.trace);
    result.retrieved_edit_count = static_cast<int>(
        std::count_if(result.trace.begin(), result.trace.end(),
                      [](const DecompositionStep& s) { return s.retrieved_edit.has_value(); }));
    result.stack_depth_at_end = static_cast<int>(state.backtrack_stack.size());
    result.tokens_in = tokens.in;
    result.tokens_out = tokens.out;
    return result;
}

nlohmann::json solve_result_to_json(const SolveResult& result) {
    return nlohmann::json{
        {"final_answer", result.final_answer},
        {"truncated", result.truncated},
        {"backtrack_count", result.backtrack_count},
        {"retrieved_edit_count", result.retrieved_edit_count},
        {"stack_depth_at_end", result.stack_depth_at_end},
        {"guidance_uses",
         {{"fact", result.guidance_uses.fact}, {"case", result.guidance_uses.case_records}}},
        {"tokens", {{"input", result.tokens_in}, {"output", result.tokens_out}}},
        {"steps", result.trace}};
}

}  // namespace mhke
