#include "mhke/embedding.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "http_util.hpp"
#include "mhke/core.hpp"

namespace mhke {

double EmbeddingVector::norm() const {
    double sum = 0.0;
    for (double v : values) sum += v * v;
    return std::sqrt(sum);
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension()) {
        throw DimensionMismatchError("cosine: dimensions " + std::to_string(a.dimension()) +
                                     " vs " + std::to_string(b.dimension()));
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) dot += a.values[i] * b.values[i];
    return dot;
}

EmbeddingVector l2_normalize(std::vector<double> values) {
    double sum = 0.0;
    for (double v : values) sum += v * v;
    const double norm = std::sqrt(sum);
    if (norm > 0.0) {
        for (double& v : values) v /= norm;
    }
    return EmbeddingVector{std::move(values)};
}

std::uint64_t HashBagEmbedder::fnv1a(const std::string& token) {
    std::uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : token) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash;
}

EmbeddingVector HashBagEmbedder::embed(const std::string& text) {
    if (text.empty()) throw EmptyTextError("embed: empty text");
    std::vector<double> counts(kDimension, 0.0);
    auto tokens = tokenize(text);
    if (tokens.empty()) {
        // No word characters at all; hash the raw bytes so the vector is
        // still deterministic and non-zero.
        tokens.push_back(text);
    }
    for (const auto& token : tokens) {
        counts[fnv1a(token) % kDimension] += 1.0;
    }
    return l2_normalize(std::move(counts));
}

HttpEmbedder::HttpEmbedder(Options options) : options_(std::move(options)) {
    if (options_.endpoint.empty()) throw ConfigError("HttpEmbedder: endpoint is empty");
}

std::string HttpEmbedder::id() const {
    return "http:" + options_.endpoint + ":" + options_.model;
}

EmbeddingVector HttpEmbedder::embed(const std::string& text) {
    if (text.empty()) throw EmptyTextError("embed: empty text");

    const auto [base, path] = split_url(options_.endpoint);
    nlohmann::json body{{"model", options_.model}, {"input", text}};

    httplib::Client client(base);
    client.set_connection_timeout(std::chrono::duration<double>(options_.timeout_seconds));
    client.set_read_timeout(std::chrono::duration<double>(options_.timeout_seconds));
    httplib::Headers headers;
    if (!options_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + options_.api_key);
    }

    auto result = client.Post(path, headers, body.dump(), "application/json");
    if (!result) {
        throw BackendUnavailableError("embedding endpoint unreachable: " +
                                      httplib::to_string(result.error()));
    }
    if (result->status != 200) {
        throw BackendUnavailableError("embedding endpoint returned status " +
                                      std::to_string(result->status) + ": " + result->body);
    }

    try {
        auto parsed = nlohmann::json::parse(result->body);
        const auto& data = parsed.at("data");
        if (!data.is_array() || data.empty()) {
            throw BackendUnavailableError("embedding response has no data entries");
        }
        auto values = data[0].at("embedding").get<std::vector<double>>();
        if (values.empty()) {
            throw BackendUnavailableError("embedding response vector is empty");
        }
        return l2_normalize(std::move(values));
    } catch (const nlohmann::json::exception& e) {
        throw BackendUnavailableError(std::string("malformed embedding response: ") + e.what());
    }
}

CachingEmbedder::CachingEmbedder(std::shared_ptr<Embedder> inner, std::string spill_path)
    : inner_(std::move(inner)), spill_path_(std::move(spill_path)) {
    if (!spill_path_.empty()) load_spill();
}

EmbeddingVector CachingEmbedder::embed(const std::string& text) {
    const std::string key = inner_->id() + '\x1f' + text;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
    }
    EmbeddingVector vec = inner_->embed(text);
    std::lock_guard<std::mutex> lock(mutex_);
    cache_.emplace(key, vec);
    return vec;
}

std::size_t CachingEmbedder::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return cache_.size();
}

void CachingEmbedder::save_spill() const {
    if (spill_path_.empty()) return;
    nlohmann::json j = nlohmann::json::object();
    {
        std::lock_guard<std::mutex> lock(mutex_);
        for (const auto& [key, vec] : cache_) j[key] = vec.values;
    }
    std::ofstream out(spill_path_);
    out << j.dump();
}

void CachingEmbedder::load_spill() {
    if (!std::filesystem::exists(spill_path_)) return;
    std::ifstream in(spill_path_);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception&) {
        return;  // unreadable spill files are ignored, the cache refills
    }
    std::lock_guard<std::mutex> lock(mutex_);
    for (const auto& [key, values] : j.items()) {
        cache_[key] = EmbeddingVector{values.get<std::vector<double>>()};
    }
}

}  // namespace mhke
