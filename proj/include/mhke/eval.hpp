#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mhke/case_library.hpp"
#include "mhke/controller.hpp"
#include "mhke/core.hpp"
#include "mhke/edited_memory.hpp"
#include "mhke/embedding.hpp"
#include "mhke/llm.hpp"

namespace mhke {

/// One benchmark instance: three paraphrases of a multi-hop question, the
/// edits it depends on, and the gold chain through the edited facts.
struct EvalCase {
    std::string case_id;
    std::vector<std::string> questions;  // exactly 3 paraphrases
    std::string gold_answer;
    std::vector<std::string> gold_aliases;
    std::vector<FactEdit> edits;
    std::vector<FactTriple> gold_chain;
    int hop_count = 0;
};

/// How many cases share one edited-fact memory during evaluation.
enum class BatchSetting { OneEdited, HundredEdited, AllEdited };

std::string to_string(BatchSetting setting);

struct CaseScore {
    bool solved = false;
    bool path_exact = false;
    double recall_fraction = 0.0;
};

struct PerCaseReport {
    std::string case_id;
    int hops = 0;
    int edits = 0;
    bool solved = false;
    bool path_exact = false;
    double recall_fraction = 0.0;
    std::int64_t tokens_in = 0;
    std::int64_t tokens_out = 0;
    double seconds = 0.0;
    bool case_guided = false;  // any paraphrase used case-level guidance
    bool aborted = false;      // any paraphrase aborted (counts as unsolved)
    std::array<std::string, 3> answers;
};

struct EvalReport {
    double acc = 0.0;      // percent of cases with any paraphrase answered correctly
    double hop_acc = 0.0;  // percent of cases with any exactly-matching path
    double recall = 0.0;   // mean percent of required edits retrieved
    int guided_cases = 0;  // cases where some paraphrase got case guidance
    std::string setting;
    nlohmann::json config_snapshot;
    std::vector<PerCaseReport> per_case;
    std::int64_t total_tokens_in = 0;
    std::int64_t total_tokens_out = 0;
    double total_seconds = 0.0;

    nlohmann::json to_json() const;
    std::string to_csv() const;
    std::string summary_line() const;
};

/// Loads a MQuAKE-style JSON array. Each record must carry exactly three
/// "questions", a "new_answer", at least one "requested_rewrite", and a
/// 2-4 hop chain; otherwise MalformedDatasetError names the record.
std::vector<EvalCase> load_dataset(const std::filesystem::path& path);
std::vector<EvalCase> parse_dataset(const nlohmann::json& array);

/// Scores one case from the solve results of its three paraphrases:
/// solved     - any final answer matches the gold answer or an alias after
///              normalization;
/// path_exact - any trace maps onto the gold chain element-wise (steps with
///              a retrieved edit compare subject/relation/object; parametric
///              steps compare the object only) with equal length;
/// recall     - best fraction, over the three traces, of the case's required
///              edits that were actually retrieved.
CaseScore score_case(const EvalCase& eval_case, const std::array<SolveResult, 3>& results);

/// Index ranges [begin, end) of cases sharing one memory under a setting.
std::vector<std::pair<std::size_t, std::size_t>> batch_groups(std::size_t case_count,
                                                              BatchSetting setting);

/// Builds the shared memory for a group of cases (insertion in case order,
/// later edits of the same (subject, relation) slot replace earlier ones).
EditedFactMemory build_memory(const std::vector<EvalCase>& cases, std::size_t begin,
                              std::size_t end, std::shared_ptr<Embedder> embedder);

struct EvalOptions {
    BatchSetting setting = BatchSetting::AllEdited;
    EngineConfig config;
    int parallelism = 1;
    std::shared_ptr<Embedder> fact_embedder;
    const CaseLibrary* library = nullptr;
    LlmBackend* backend = nullptr;
    const TemplateCatalog* templates = nullptr;
};

/// Runs every case under the batch setting and aggregates Acc / Hop-Acc /
/// Recall. Aborted solves are recorded as unsolved and the run continues.
EvalReport run_eval(const std::vector<EvalCase>& cases, const EvalOptions& options);

}  // namespace mhke
