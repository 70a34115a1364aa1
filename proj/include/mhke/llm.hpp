#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mhke/errors.hpp"

namespace mhke {

// ---------------------------------------------------------------------------
// Prompt templates
// ---------------------------------------------------------------------------

enum class TemplateName { Judge, Rewrite, DecomposeStatic, DecomposeGuided, Answer };

std::string template_file_name(TemplateName name);

/// Text with named {slot} placeholders. Rendering with a complete slot map
/// yields text containing every value verbatim and no unresolved markers.
class PromptTemplate {
public:
    PromptTemplate() = default;
    PromptTemplate(TemplateName name, std::string text);

    std::string render(const std::map<std::string, std::string>& values) const;

    TemplateName name() const { return name_; }
    const std::string& text() const { return text_; }
    const std::vector<std::string>& slots() const { return slots_; }

private:
    TemplateName name_ = TemplateName::Judge;
    std::string text_;
    std::vector<std::string> slots_;
};

/// Loads the five templates from a directory of UTF-8 text files
/// (judge.txt, rewrite.txt, decompose_static.txt, decompose_guided.txt,
/// answer.txt). Templates are files rather than code constants so wording
/// can be tuned without a rebuild.
class TemplateCatalog {
public:
    static TemplateCatalog load_dir(const std::filesystem::path& dir);

    const PromptTemplate& get(TemplateName name) const;

private:
    std::map<TemplateName, PromptTemplate> templates_;
};

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

struct GenerationParams {
    double temperature = 0.0;
    int max_tokens = 200;
    std::optional<double> repetition_penalty;  // pass-through, backend-defined
};

struct LlmReply {
    std::string text;
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
};

/// Rough token estimate (whitespace chunks) for backends that do not report
/// usage.
std::int64_t estimate_tokens(const std::string& text);

/// Chat backend interface. generate() is safe to call concurrently; session
/// token counters only grow until reset_counters(). An optional call log
/// records every rendered prompt for tests.
class LlmBackend {
public:
    virtual ~LlmBackend() = default;

    LlmReply generate(const std::string& prompt, const GenerationParams& params);

    std::int64_t total_input_tokens() const { return total_input_tokens_.load(); }
    std::int64_t total_output_tokens() const { return total_output_tokens_.load(); }
    void reset_counters();

    void set_call_logging(bool enabled) { call_logging_ = enabled; }
    std::vector<std::string> call_log() const;
    void clear_call_log();

private:
    virtual LlmReply do_generate(const std::string& prompt, const GenerationParams& params) = 0;

    std::atomic<std::int64_t> total_input_tokens_{0};
    std::atomic<std::int64_t> total_output_tokens_{0};
    std::atomic<bool> call_logging_{false};
    mutable std::mutex log_mutex_;
    std::vector<std::string> call_log_;
};

/// Deterministic backend for tests and offline runs: an ordered rule list
/// matched against the rendered prompt; the first matching rule answers.
class ScriptedBackend final : public LlmBackend {
public:
    struct Rule {
        std::string match;     // substring, or ECMAScript regex when is_regex
        std::string response;
        bool is_regex = false;
    };

    ScriptedBackend() = default;
    ScriptedBackend(std::vector<Rule> rules, std::string default_response);
    /// From {"rules": [{"match", "response", "regex"?}, ...],
    ///       "default_response": "..."}.
    explicit ScriptedBackend(const nlohmann::json& spec);

    static std::unique_ptr<ScriptedBackend> load_file(const std::filesystem::path& path);

    const std::vector<Rule>& rules() const { return rules_; }

private:
    LlmReply do_generate(const std::string& prompt, const GenerationParams& params) override;

    std::vector<Rule> rules_;
    std::string default_response_ = "Final answer: unknown";
};

/// OpenAI-compatible chat-completions client. One retry on timeout, then
/// the call fails loudly instead of hanging an eval run.
class HttpChatBackend final : public LlmBackend {
public:
    struct Options {
        std::string endpoint;  // full URL, e.g. http://host:8080/v1/chat/completions
        std::string model;
        std::string api_key;
        double timeout_seconds = 60.0;
        std::optional<double> repetition_penalty;  // applied when the call has none
    };

    explicit HttpChatBackend(Options options);

private:
    LlmReply do_generate(const std::string& prompt, const GenerationParams& params) override;

    Options options_;
};

// ---------------------------------------------------------------------------
// Structured output parsing
// ---------------------------------------------------------------------------

/// Extracts the judged candidate from a reply: the first integer token.
/// 1..candidate_count selects that candidate (1-based); 0 or out-of-range
/// means no guidance (nullopt). Throws UnparseableJudgmentError when the
/// reply holds no integer at all.
std::optional<int> parse_judgment(const std::string& text, int candidate_count);

struct StepOutput {
    enum class Kind { Subquestion, FinalAnswer };
    Kind kind = Kind::Subquestion;
    std::string text;

    bool operator==(const StepOutput&) const = default;
};

/// Scans reply lines for "Subquestion: ..." / "Final answer: ..." markers
/// (case-insensitive, leading whitespace ignored). A final answer wins when
/// both appear. Throws UnparseableDecompositionError when neither marker is
/// present.
StepOutput parse_decomposition(const std::string& text);

}  // namespace mhke
