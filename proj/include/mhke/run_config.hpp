#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "mhke/core.hpp"
#include "mhke/embedding.hpp"
#include "mhke/llm.hpp"

namespace mhke {

/// Backend wiring. offline == true selects the deterministic hash-bag
/// embedder and the scripted chat backend, so a run needs no network at
/// all. Secrets never live in the file; api_key_env_var names the
/// environment variable to read.
struct BackendsConfig {
    bool offline = true;
    std::string chat_endpoint;
    std::string chat_model;
    std::string embed_endpoint;
    std::string embed_model;
    std::string case_embed_model;  // optional separate model for case lookup
    std::string api_key_env_var;
    std::string scripted_rules;  // rules file for the offline chat backend
    std::optional<double> repetition_penalty;
    double timeout_seconds = 60.0;
};

struct PathsConfig {
    std::string dataset;
    std::string prompts_dir = "prompts";
    std::string case_library;
    std::string report_out = "report";
    std::string embed_cache;  // optional embedding-cache spill file
};

/// Full run configuration: engine tunables + backend wiring + paths.
/// Resolution order everywhere is flag > config file > default.
struct RunConfig {
    EngineConfig engine;
    BackendsConfig backends;
    PathsConfig paths;

    static RunConfig load_file(const std::filesystem::path& path);
    static RunConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

/// Instantiated backends for one run.
struct Runtime {
    std::shared_ptr<Embedder> fact_embedder;
    std::shared_ptr<Embedder> case_embedder;
    std::unique_ptr<LlmBackend> backend;
    TemplateCatalog templates;
};

/// Builds embedders, chat backend and templates from the config. Offline
/// configs construct no HTTP clients and perform no network calls.
Runtime make_runtime(const RunConfig& config);

}  // namespace mhke
