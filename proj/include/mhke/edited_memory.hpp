#pragma once

#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "mhke/core.hpp"
#include "mhke/embedding.hpp"

namespace mhke {

/// The edited-fact memory: every stored edit is paired with embeddings of
/// its atomic question and its statement form. Holds at most one edit per
/// normalized (subject, relation) slot; a later insert replaces the earlier
/// one in place.
///
/// Built once per batch, then read-only while solving; concurrent reads are
/// fine, concurrent mutation is not.
class EditedFactMemory {
public:
    struct Entry {
        FactEdit edit;
        EmbeddingVector question_vector;
        EmbeddingVector statement_vector;
    };

    explicit EditedFactMemory(std::shared_ptr<Embedder> embedder);

    /// Stores the edit with both vectors. Replaces any prior entry with the
    /// same normalized (subject, relation), keeping its position.
    void insert(const FactEdit& edit);

    /// Coarse retrieval: the n entries most similar to the query, by cosine
    /// against the atomic-question vectors, descending. Ties keep insertion
    /// order. No threshold; fewer than n entries means all of them.
    std::vector<FactEdit> pre_retrieve(const std::string& query, int n) const;

    /// Fine retrieval: the single best entry by question-vector cosine, but
    /// only when the score reaches tau AND the token-overlap re-rank check
    /// passes (shared distinct tokens / tokens of the shorter side >= 0.5).
    std::optional<FactEdit> precise_retrieve(const std::string& subquestion, double tau) const;

    /// True if an equal edit is stored.
    bool contains(const FactEdit& edit) const;

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::vector<Entry>& entries() const { return entries_; }
    const std::shared_ptr<Embedder>& embedder() const { return embedder_; }

    nlohmann::json export_json() const;

    /// |shared distinct tokens| / |distinct tokens of the side with fewer|.
    static double token_overlap(const std::string& a, const std::string& b);

    static constexpr double kRerankOverlapThreshold = 0.5;

private:
    std::shared_ptr<Embedder> embedder_;
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> slot_index_;
};

}  // namespace mhke
