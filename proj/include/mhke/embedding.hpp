#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mhke/errors.hpp"

namespace mhke {

/// L2-normalized dense vector. Since every embedder normalizes its output,
/// cosine similarity reduces to a plain dot product.
struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dimension() const { return values.size(); }
    double norm() const;
};

/// Dot product of two normalized vectors, exactly symmetric in its
/// arguments. Throws DimensionMismatchError when dimensions differ.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

/// Scales a raw vector to unit L2 norm. Zero vectors are left as-is.
EmbeddingVector l2_normalize(std::vector<double> values);

/// Text-to-vector interface. Implementations must be safe for concurrent
/// embed() calls and must return identical vectors for identical input.
class Embedder {
public:
    virtual ~Embedder() = default;

    /// Throws EmptyTextError on empty input.
    virtual EmbeddingVector embed(const std::string& text) = 0;

    /// Stable identifier of the backend + model, used as a cache key part.
    virtual std::string id() const = 0;
};

/// Deterministic offline embedder: lowercased tokens hashed (FNV-1a) into a
/// 256-bucket count vector, then L2-normalized. Lexical overlap produces
/// meaningful similarity, which is enough to drive retrieval in tests.
class HashBagEmbedder final : public Embedder {
public:
    static constexpr std::size_t kDimension = 256;

    EmbeddingVector embed(const std::string& text) override;
    std::string id() const override { return "hashbag-256"; }

    static std::uint64_t fnv1a(const std::string& token);
};

/// Client for an OpenAI-compatible embeddings endpoint.
/// POST {model, input} -> {data: [{embedding: [...]}] }.
class HttpEmbedder final : public Embedder {
public:
    struct Options {
        std::string endpoint;  // full URL, e.g. http://host:8080/v1/embeddings
        std::string model;
        std::string api_key;
        double timeout_seconds = 30.0;
    };

    explicit HttpEmbedder(Options options);

    EmbeddingVector embed(const std::string& text) override;
    std::string id() const override;

private:
    Options options_;
};

/// Wraps another embedder with a synchronized in-memory cache keyed by
/// (backend id, text). Optionally spills to / reloads from a JSON file so
/// repeated runs against a remote embedder stay cheap.
class CachingEmbedder final : public Embedder {
public:
    explicit CachingEmbedder(std::shared_ptr<Embedder> inner, std::string spill_path = "");

    EmbeddingVector embed(const std::string& text) override;
    std::string id() const override { return inner_->id(); }

    std::size_t size() const;
    void save_spill() const;

private:
    void load_spill();

    std::shared_ptr<Embedder> inner_;
    std::string spill_path_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, EmbeddingVector> cache_;
};

}  // namespace mhke
