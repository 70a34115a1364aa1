#include "mhke/run_config.hpp"

#include <cstdlib>
#include <fstream>

namespace mhke {

RunConfig RunConfig::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid config JSON in " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig config;
    if (j.contains("engine")) config.engine = j["engine"].get<EngineConfig>();

    if (j.contains("backends")) {
        const auto& b = j["backends"];
        config.backends.offline = b.value("offline", config.backends.offline);
        config.backends.chat_endpoint = b.value("chat_endpoint", "");
        config.backends.chat_model = b.value("chat_model", "");
        config.backends.embed_endpoint = b.value("embed_endpoint", "");
        config.backends.embed_model = b.value("embed_model", "");
        config.backends.case_embed_model = b.value("case_embed_model", "");
        config.backends.api_key_env_var = b.value("api_key_env_var", "");
        config.backends.scripted_rules = b.value("scripted_rules", "");
        if (b.contains("repetition_penalty") && !b["repetition_penalty"].is_null()) {
            config.backends.repetition_penalty = b["repetition_penalty"].get<double>();
        }
        config.backends.timeout_seconds =
            b.value("timeout_seconds", config.backends.timeout_seconds);
    }

    if (j.contains("paths")) {
        const auto& p = j["paths"];
        config.paths.dataset = p.value("dataset", "");
        config.paths.prompts_dir = p.value("prompts_dir", config.paths.prompts_dir);
        config.paths.case_library = p.value("case_library", "");
        config.paths.report_out = p.value("report_out", config.paths.report_out);
        config.paths.embed_cache = p.value("embed_cache", "");
    }
    return config;
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json backends_json{{"offline", backends.offline},
                                 {"chat_endpoint", backends.chat_endpoint},
                                 {"chat_model", backends.chat_model},
                                 {"embed_endpoint", backends.embed_endpoint},
                                 {"embed_model", backends.embed_model},
                                 {"case_embed_model", backends.case_embed_model},
                                 {"api_key_env_var", backends.api_key_env_var},
                                 {"scripted_rules", backends.scripted_rules},
                                 {"timeout_seconds", backends.timeout_seconds}};
    if (backends.repetition_penalty) {
        backends_json["repetition_penalty"] = *backends.repetition_penalty;
    }
    return nlohmann::json{{"engine", engine},
                          {"backends", backends_json},
                          {"paths",
                           {{"dataset", paths.dataset},
                            {"prompts_dir", paths.prompts_dir},
                            {"case_library", paths.case_library},
                            {"report_out", paths.report_out},
                            {"embed_cache", paths.embed_cache}}}};
}

Runtime make_runtime(const RunConfig& config) {
    Runtime runtime;
    runtime.templates = TemplateCatalog::load_dir(config.paths.prompts_dir);

    if (config.backends.offline) {
        auto embedder = std::make_shared<HashBagEmbedder>();
        runtime.fact_embedder = embedder;
        runtime.case_embedder = embedder;
        if (!config.backends.scripted_rules.empty()) {
            runtime.backend = ScriptedBackend::load_file(config.backends.scripted_rules);
        } else {
            runtime.backend = std::make_unique<ScriptedBackend>();
        }
        return runtime;
    }

    std::string api_key;
    if (!config.backends.api_key_env_var.empty()) {
        if (const char* value = std::getenv(config.backends.api_key_env_var.c_str())) {
            api_key = value;
        }
    }

    if (config.backends.embed_endpoint.empty()) {
        throw ConfigError("backends.embed_endpoint is required when offline is false");
    }
    auto make_embedder = [&](const std::string& model) -> std::shared_ptr<Embedder> {
        HttpEmbedder::Options options;
        options.endpoint = config.backends.embed_endpoint;
        options.model = model;
        options.api_key = api_key;
        options.timeout_seconds = config.backends.timeout_seconds;
        std::shared_ptr<Embedder> embedder = std::make_shared<HttpEmbedder>(options);
        return std::make_shared<CachingEmbedder>(std::move(embedder),
                                                 config.paths.embed_cache);
    };
    runtime.fact_embedder = make_embedder(config.backends.embed_model);
    runtime.case_embedder = config.backends.case_embed_model.empty()
                                ? runtime.fact_embedder
                                : make_embedder(config.backends.case_embed_model);

    if (config.backends.chat_endpoint.empty()) {
        throw ConfigError("backends.chat_endpoint is required when offline is false");
    }
    HttpChatBackend::Options chat;
    chat.endpoint = config.backends.chat_endpoint;
    chat.model = config.backends.chat_model;
    chat.api_key = api_key;
    chat.timeout_seconds = config.backends.timeout_seconds;
    chat.repetition_penalty = config.backends.repetition_penalty;
    runtime.backend = std::make_unique<HttpChatBackend>(chat);
    return runtime;
}

}  // namespace mhke
