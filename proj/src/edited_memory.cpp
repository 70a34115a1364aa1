#include "mhke/edited_memory.hpp"

#include <algorithm>
#include <set>

namespace mhke {

namespace {

std::string slot_key_string(const FactEdit& edit) {
    auto [subject, relation] = edit.slot_key();
    return subject + '\x1f' + relation;
}

}  // namespace

EditedFactMemory::EditedFactMemory(std::shared_ptr<Embedder> embedder)
    : embedder_(std::move(embedder)) {
    if (!embedder_) throw ConfigError("EditedFactMemory: embedder is null");
}

void EditedFactMemory::insert(const FactEdit& edit) {
    if (!edit.valid()) {
        throw ConfigError("insert: edit is missing a mandatory field (subject '" + edit.subject +
                          "', relation '" + edit.relation + "')");
    }
    Entry entry{edit, embedder_->embed(edit.atomic_question), embedder_->embed(edit.statement)};
    const std::string key = slot_key_string(edit);
    auto it = slot_index_.find(key);
    if (it != slot_index_.end()) {
        entries_[it->second] = std::move(entry);
        return;
    }
    slot_index_.emplace(key, entries_.size());
    entries_.push_back(std::move(entry));
}

std::vector<FactEdit> EditedFactMemory::pre_retrieve(const std::string& query, int n) const {
    if (n < 1) throw ConfigError("pre_retrieve: n must be >= 1");
    if (entries_.empty()) return {};

    const EmbeddingVector query_vector = embedder_->embed(query);
    std::vector<std::size_t> order(entries_.size());
    std::vector<double> scores(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        order[i] = i;
        scores[i] = cosine(query_vector, entries_[i].question_vector);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&scores](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(n), order.size());
    std::vector<FactEdit> result;
    result.reserve(count);
    for (std::size_t i = 0; i < count; ++i) result.push_back(entries_[order[i]].edit);
    return result;
}

std::optional<FactEdit> EditedFactMemory::precise_retrieve(const std::string& subquestion,
                                                           double tau) const {
    if (subquestion.empty()) throw EmptyTextError("precise_retrieve: empty subquestion");
    if (entries_.empty()) return std::nullopt;

    const EmbeddingVector query_vector = embedder_->embed(subquestion);
    std::size_t best = 0;
    double best_score = -2.0;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const double score = cosine(query_vector, entries_[i].question_vector);
        if (score > best_score) {
            best_score = score;
            best = i;
        }
    }
    if (best_score < tau) return std::nullopt;
    const FactEdit& candidate = entries_[best].edit;
    if (token_overlap(subquestion, candidate.atomic_question) < kRerankOverlapThreshold) {
        return std::nullopt;
    }
    return candidate;
}

bool EditedFactMemory::contains(const FactEdit& edit) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&edit](const Entry& e) { return e.edit == edit; });
}

double EditedFactMemory::token_overlap(const std::string& a, const std::string& b) {
    const auto ta = tokenize(a);
    const auto tb = tokenize(b);
    const std::set<std::string> sa(ta.begin(), ta.end());
    const std::set<std::string> sb(tb.begin(), tb.end());
    if (sa.empty() || sb.empty()) return 0.0;
    std::size_t shared = 0;
    for (const auto& token : sa) shared += sb.count(token);
    return static_cast<double>(shared) / static_cast<double>(std::min(sa.size(), sb.size()));
}

nlohmann::json EditedFactMemory::export_json() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& entry : entries_) j.push_back(entry.edit);
    return j;
}

}  // namespace mhke
