#include "mhke/case_library.hpp"

#include <fstream>
#include <random>

namespace mhke {

CaseLibrary::CaseLibrary(std::shared_ptr<Embedder> embedder, bool frozen)
    : embedder_(std::move(embedder)), frozen_(frozen) {
    if (!embedder_) throw ConfigError("CaseLibrary: embedder is null");
}

std::optional<CaseRecord> CaseLibrary::lookup(const std::string& question, double theta) const {
    if (theta < 0.0 || theta > 1.0) throw ConfigError("lookup: theta must be in [0,1]");
    if (entries_.empty()) return std::nullopt;

    const EmbeddingVector query_vector = embedder_->embed(question);
    std::optional<std::size_t> best;
    double best_score = -2.0;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const double score = cosine(query_vector, entries_[i].question_vector);
        if (score >= theta && score > best_score) {
            best_score = score;
            best = i;
        }
    }
    if (!best) return std::nullopt;
    return entries_[*best].record;
}

std::optional<CaseRecord> CaseLibrary::lookup_random(const std::string& question,
                                                     std::uint64_t seed) const {
    if (entries_.empty()) return std::nullopt;
    std::mt19937_64 rng(seed ^ HashBagEmbedder::fnv1a(question));
    return entries_[rng() % entries_.size()].record;
}

void CaseLibrary::append(const CaseRecord& record) {
    if (frozen_) throw LibraryFrozenError("append: library is frozen");
    if (!record.succeeded) {
        throw RecordNotSuccessfulError("append: only successful records may be stored");
    }
    entries_.push_back(Entry{record, embedder_->embed(record.question)});
}

CaseLibrary CaseLibrary::seed_from_cases(std::shared_ptr<Embedder> embedder,
                                         const std::vector<CaseRecord>& records,
                                         std::size_t sample_size, std::uint64_t seed) {
    std::vector<std::size_t> successful;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].succeeded) successful.push_back(i);
    }

    // Partial Fisher-Yates with a hand-rolled bounded draw so the sample is
    // reproducible across standard-library implementations.
    std::mt19937_64 rng(seed);
    const std::size_t take = std::min(sample_size, successful.size());
    for (std::size_t i = 0; i < take; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng() % (successful.size() - i));
        std::swap(successful[i], successful[j]);
    }

    CaseLibrary library(std::move(embedder));
    for (std::size_t i = 0; i < take; ++i) library.append(records[successful[i]]);
    return library;
}

CaseLibrary CaseLibrary::load_file(std::shared_ptr<Embedder> embedder,
                                   const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open case library file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid case library JSON in " + path.string() + ": " + e.what());
    }
    if (!j.is_array()) throw ConfigError("case library file must hold a JSON array");

    CaseLibrary library(std::move(embedder));
    for (const auto& item : j) {
        auto record = item.get<CaseRecord>();
        record.succeeded = true;  // the library only ever persists successes
        library.append(record);
    }
    return library;
}

void CaseLibrary::save_file(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write case library file: " + path.string());
    out << to_json().dump(2) << '\n';
}

nlohmann::json CaseLibrary::to_json() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& entry : entries_) {
        nlohmann::json record{{"question", entry.record.question},
                              {"steps", nlohmann::json::array()},
                              {"final_answer", entry.record.final_answer}};
        for (const auto& step : entry.record.steps) {
            nlohmann::json s{{"subquestion", step.subquestion}, {"answer", step.answer}};
            if (step.retrieved_edit) s["retrieved_edit"] = *step.retrieved_edit;
            record["steps"].push_back(std::move(s));
        }
        j.push_back(std::move(record));
    }
    return j;
}

}  // namespace mhke
