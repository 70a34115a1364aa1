#include "mhke/llm.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

#include <httplib.h>

#include "http_util.hpp"

namespace mhke {

namespace {

std::string lower_ascii(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(const std::string& s) {
    std::size_t begin = 0;
    std::size_t end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return s.substr(begin, end - begin);
}

bool is_slot_char(char c) {
    return (c >= 'a' && c <= 'z') || c == '_';
}

}  // namespace

std::string template_file_name(TemplateName name) {
    switch (name) {
        case TemplateName::Judge: return "judge.txt";
        case TemplateName::Rewrite: return "rewrite.txt";
        case TemplateName::DecomposeStatic: return "decompose_static.txt";
        case TemplateName::DecomposeGuided: return "decompose_guided.txt";
        case TemplateName::Answer: return "answer.txt";
    }
    throw ConfigError("unknown template name");
}

PromptTemplate::PromptTemplate(TemplateName name, std::string text)
    : name_(name), text_(std::move(text)) {
    for (std::size_t i = 0; i < text_.size(); ++i) {
        if (text_[i] != '{') continue;
        std::size_t j = i + 1;
        while (j < text_.size() && is_slot_char(text_[j])) ++j;
        if (j > i + 1 && j < text_.size() && text_[j] == '}') {
            const std::string slot = text_.substr(i + 1, j - i - 1);
            if (std::find(slots_.begin(), slots_.end(), slot) == slots_.end()) {
                slots_.push_back(slot);
            }
            i = j;
        }
    }
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
    std::string out;
    out.reserve(text_.size());
    for (std::size_t i = 0; i < text_.size(); ++i) {
        if (text_[i] == '{') {
            std::size_t j = i + 1;
            while (j < text_.size() && is_slot_char(text_[j])) ++j;
            if (j > i + 1 && j < text_.size() && text_[j] == '}') {
                const std::string slot = text_.substr(i + 1, j - i - 1);
                auto it = values.find(slot);
                if (it == values.end()) {
                    throw ConfigError("render: no value for slot {" + slot + "} in " +
                                      template_file_name(name_));
                }
                out += it->second;
                i = j;
                continue;
            }
        }
        out.push_back(text_[i]);
    }
    return out;
}

TemplateCatalog TemplateCatalog::load_dir(const std::filesystem::path& dir) {
    TemplateCatalog catalog;
    for (TemplateName name :
         {TemplateName::Judge, TemplateName::Rewrite, TemplateName::DecomposeStatic,
          TemplateName::DecomposeGuided, TemplateName::Answer}) {
        const auto path = dir / template_file_name(name);
        std::ifstream in(path);
        if (!in) throw ConfigError("missing prompt template: " + path.string());
        std::ostringstream buffer;
        buffer << in.rdbuf();
        catalog.templates_.emplace(name, PromptTemplate(name, buffer.str()));
    }
    return catalog;
}

const PromptTemplate& TemplateCatalog::get(TemplateName name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) {
        throw ConfigError("template not loaded: " + template_file_name(name));
    }
    return it->second;
}

std::int64_t estimate_tokens(const std::string& text) {
    std::int64_t count = 0;
    bool in_chunk = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            in_chunk = false;
        } else if (!in_chunk) {
            in_chunk = true;
            ++count;
        }
    }
    return count;
}

LlmReply LlmBackend::generate(const std::string& prompt, const GenerationParams& params) {
    if (prompt.empty()) throw EmptyTextError("generate: empty prompt");
    if (call_logging_.load()) {
        std::lock_guard<std::mutex> lock(log_mutex_);
        call_log_.push_back(prompt);
    }
    LlmReply reply = do_generate(prompt, params);
    if (reply.input_tokens == 0) reply.input_tokens = estimate_tokens(prompt);
    if (reply.output_tokens == 0) reply.output_tokens = estimate_tokens(reply.text);
    total_input_tokens_ += reply.input_tokens;
    total_output_tokens_ += reply.output_tokens;
    return reply;
}

void LlmBackend::reset_counters() {
    total_input_tokens_ = 0;
    total_output_tokens_ = 0;
}

std::vector<std::string> LlmBackend::call_log() const {
    std::lock_guard<std::mutex> lock(log_mutex_);
    return call_log_;
}

void LlmBackend::clear_call_log() {
    std::lock_guard<std::mutex> lock(log_mutex_);
    call_log_.clear();
}

ScriptedBackend::ScriptedBackend(std::vector<Rule> rules, std::string default_response)
    : rules_(std::move(rules)), default_response_(std::move(default_response)) {}

LlmReply ScriptedBackend::do_generate(const std::string& prompt, const GenerationParams&) {
    const std::string* response = &default_response_;
    for (const auto& rule : rules_) {
        const bool hit = rule.is_regex
                             ? std::regex_search(prompt, std::regex(rule.match))
                             : prompt.find(rule.match) != std::string::npos;
        if (hit) {
            response = &rule.response;
            break;
        }
    }
    if (response->empty()) throw EmptyCompletionError("scripted backend produced empty text");
    return LlmReply{*response, 0, 0};
}

ScriptedBackend::ScriptedBackend(const nlohmann::json& spec) {
    for (const auto& item : spec.value("rules", nlohmann::json::array())) {
        Rule rule;
        item.at("match").get_to(rule.match);
        item.at("response").get_to(rule.response);
        rule.is_regex = item.value("regex", false);
        rules_.push_back(std::move(rule));
    }
    default_response_ = spec.value("default_response", std::string("Final answer: unknown"));
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scripted rules file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid scripted rules JSON in " + path.string() + ": " + e.what());
    }
    return std::make_unique<ScriptedBackend>(j);
}

HttpChatBackend::HttpChatBackend(Options options) : options_(std::move(options)) {
    if (options_.endpoint.empty()) throw ConfigError("HttpChatBackend: endpoint is empty");
}

LlmReply HttpChatBackend::do_generate(const std::string& prompt, const GenerationParams& params) {
    const auto [base, path] = split_url(options_.endpoint);

    nlohmann::json body{{"model", options_.model},
                        {"messages", nlohmann::json::array({nlohmann::json{
                                         {"role", "user"}, {"content", prompt}}})},
                        {"temperature", params.temperature},
                        {"max_tokens", params.max_tokens}};
    const auto repetition_penalty =
        params.repetition_penalty ? params.repetition_penalty : options_.repetition_penalty;
    if (repetition_penalty) body["repetition_penalty"] = *repetition_penalty;
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (!options_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + options_.api_key);
    }

    auto send = [&]() {
        httplib::Client client(base);
        client.set_connection_timeout(std::chrono::duration<double>(options_.timeout_seconds));
        client.set_read_timeout(std::chrono::duration<double>(options_.timeout_seconds));
        return client.Post(path, headers, payload, "application/json");
    };

    auto is_timeout = [](httplib::Error e) {
        return e == httplib::Error::ConnectionTimeout || e == httplib::Error::Read ||
               e == httplib::Error::Write;
    };

    auto result = send();
    if (!result && is_timeout(result.error())) {
        result = send();  // single retry on timeout
        if (!result && is_timeout(result.error())) {
            throw BackendTimeoutError("chat endpoint timed out twice: " + options_.endpoint);
        }
    }
    if (!result) {
        throw BackendUnavailableError("chat endpoint unreachable: " +
                                      httplib::to_string(result.error()));
    }
    if (result->status != 200) {
        throw BackendUnavailableError("chat endpoint returned status " +
                                      std::to_string(result->status) + ": " + result->body);
    }

    try {
        auto parsed = nlohmann::json::parse(result->body);
        const auto& choices = parsed.at("choices");
        if (!choices.is_array() || choices.empty()) {
            throw EmptyCompletionError("chat response has no choices");
        }
        LlmReply reply;
        reply.text = choices[0].at("message").at("content").get<std::string>();
        if (reply.text.empty()) throw EmptyCompletionError("chat response text is empty");
        if (parsed.contains("usage")) {
            reply.input_tokens = parsed["usage"].value("prompt_tokens", std::int64_t{0});
            reply.output_tokens = parsed["usage"].value("completion_tokens", std::int64_t{0});
        }
        return reply;
    } catch (const nlohmann::json::exception& e) {
        throw BackendUnavailableError(std::string("malformed chat response: ") + e.what());
    }
}

std::optional<int> parse_judgment(const std::string& text, int candidate_count) {
    if (candidate_count < 1) throw ConfigError("parse_judgment: candidate_count must be >= 1");

    static const std::regex integer_re(R"([-+]?\d+)");
    std::smatch match;
    if (!std::regex_search(text, match, integer_re)) {
        throw UnparseableJudgmentError("no integer token in judgment reply: " + text);
    }
    long long value = 0;
    try {
        value = std::stoll(match.str());
    } catch (const std::exception&) {
        return std::nullopt;  // absurdly long digit run: treat as out of range
    }
    if (value < 1 || value > candidate_count) return std::nullopt;
    return static_cast<int>(value);
}

StepOutput parse_decomposition(const std::string& text) {
    static const std::string kSubquestion = "subquestion:";
    static const std::string kFinalAnswer = "final answer:";

    std::optional<std::string> subquestion;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        const std::string trimmed = trim(line);
        const std::string lowered = lower_ascii(trimmed);
        if (lowered.rfind(kFinalAnswer, 0) == 0) {
            return StepOutput{StepOutput::Kind::FinalAnswer,
                              trim(trimmed.substr(kFinalAnswer.size()))};
        }
        if (!subquestion && lowered.rfind(kSubquestion, 0) == 0) {
            subquestion = trim(trimmed.substr(kSubquestion.size()));
        }
    }
    if (subquestion) return StepOutput{StepOutput::Kind::Subquestion, *subquestion};
    throw UnparseableDecompositionError("no subquestion or final answer marker in: " + text);
}

}  // namespace mhke
