#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mhke/core.hpp"
#include "mhke/embedding.hpp"

namespace mhke {

/// Library of successfully solved cases, keyed by question. Lookup returns
/// the stored record whose question is most similar to the query, provided
/// the similarity reaches the threshold; its decomposition record then
/// serves as the dynamic part of the decomposition prompt.
///
/// Reads may run concurrently; append requires exclusive access.
class CaseLibrary {
public:
    struct Entry {
        CaseRecord record;
        EmbeddingVector question_vector;
    };

    explicit CaseLibrary(std::shared_ptr<Embedder> embedder, bool frozen = false);

    /// Most similar record with cosine >= theta; nullopt when none
    /// qualifies. Argmax ties resolve to the earliest-inserted entry.
    std::optional<CaseRecord> lookup(const std::string& question, double theta) const;

    /// Ablation mode: a uniformly random record regardless of similarity.
    /// Deterministic for a fixed (seed, question) pair.
    std::optional<CaseRecord> lookup_random(const std::string& question, std::uint64_t seed) const;

    /// Throws LibraryFrozenError / RecordNotSuccessfulError.
    void append(const CaseRecord& record);

    bool frozen() const { return frozen_; }
    void set_frozen(bool frozen) { frozen_ = frozen; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::vector<Entry>& entries() const { return entries_; }

    /// Uniform sample (without replacement) of successful records under a
    /// fixed RNG seed. sample_size larger than available keeps everything.
    static CaseLibrary seed_from_cases(std::shared_ptr<Embedder> embedder,
                                       const std::vector<CaseRecord>& records,
                                       std::size_t sample_size, std::uint64_t seed);

    static CaseLibrary load_file(std::shared_ptr<Embedder> embedder,
                                 const std::filesystem::path& path);
    void save_file(const std::filesystem::path& path) const;
    nlohmann::json to_json() const;

private:
    std::shared_ptr<Embedder> embedder_;
    std::vector<Entry> entries_;
    bool frozen_ = false;
};

}  // namespace mhke
