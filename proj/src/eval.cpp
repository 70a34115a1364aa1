#include "mhke/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace mhke {

namespace {

std::string json_to_string(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

/// Fills the "{}" placeholder of a cloze prompt with the subject.
std::string fill_prompt(const std::string& prompt, const std::string& subject) {
    std::string out = prompt;
    const auto pos = out.find("{}");
    if (pos != std::string::npos) out.replace(pos, 2, subject);
    return out;
}

std::string rewrite_target(const nlohmann::json& rewrite, const char* key) {
    if (!rewrite.contains(key)) return "";
    const auto& value = rewrite[key];
    if (value.is_object()) return value.value("str", "");
    if (value.is_string()) return value.get<std::string>();
    return "";
}

FactEdit edit_from_rewrite(const nlohmann::json& rewrite, std::size_t record_index) {
    FactEdit edit;
    if (!rewrite.contains("subject")) {
        throw MalformedDatasetError(record_index, "requested_rewrite entry without subject");
    }
    edit.subject = rewrite["subject"].get<std::string>();

    const std::string prompt = rewrite.value("prompt", "");
    if (rewrite.contains("relation_id")) {
        edit.relation = json_to_string(rewrite["relation_id"]);
    } else if (!prompt.empty()) {
        edit.relation = prompt;
    } else {
        throw MalformedDatasetError(record_index,
                                    "requested_rewrite entry without relation_id or prompt");
    }

    edit.new_object = rewrite_target(rewrite, "target_new");
    if (edit.new_object.empty()) {
        throw MalformedDatasetError(record_index, "requested_rewrite entry without target_new");
    }
    edit.old_object = rewrite_target(rewrite, "target_true");

    const std::string filled = prompt.empty() ? "" : fill_prompt(prompt, edit.subject);
    edit.atomic_question = rewrite.value("question", "");
    if (edit.atomic_question.empty()) {
        if (filled.empty()) {
            throw MalformedDatasetError(record_index,
                                        "requested_rewrite entry without question or prompt");
        }
        edit.atomic_question = filled + "?";
    }
    edit.statement = filled.empty() ? edit.atomic_question + " " + edit.new_object
                                    : filled + " " + edit.new_object + ".";
    return edit;
}

std::vector<FactTriple> chain_from_json(const nlohmann::json& triples,
                                        std::size_t record_index) {
    std::vector<FactTriple> chain;
    for (const auto& item : triples) {
        if (!item.is_array() || item.size() != 3) {
            throw MalformedDatasetError(record_index, "chain triple is not a 3-element array");
        }
        chain.push_back(FactTriple{json_to_string(item[0]), json_to_string(item[1]),
                                   json_to_string(item[2])});
    }
    return chain;
}

EvalCase case_from_record(const nlohmann::json& record, std::size_t record_index) {
    EvalCase eval_case;

    if (record.contains("case_id")) {
        eval_case.case_id = json_to_string(record["case_id"]);
    } else {
        eval_case.case_id = std::to_string(record_index);
    }

    if (!record.contains("questions") || !record["questions"].is_array()) {
        throw MalformedDatasetError(record_index, "missing questions array");
    }
    eval_case.questions = record["questions"].get<std::vector<std::string>>();
    if (eval_case.questions.size() != 3) {
        throw MalformedDatasetError(record_index,
                                    "expected exactly 3 questions, got " +
                                        std::to_string(eval_case.questions.size()));
    }

    if (!record.contains("new_answer")) {
        throw MalformedDatasetError(record_index, "missing new_answer");
    }
    eval_case.gold_answer = json_to_string(record["new_answer"]);
    if (record.contains("new_answer_alias") && record["new_answer_alias"].is_array()) {
        for (const auto& alias : record["new_answer_alias"]) {
            eval_case.gold_aliases.push_back(json_to_string(alias));
        }
    }

    if (!record.contains("requested_rewrite") || !record["requested_rewrite"].is_array() ||
        record["requested_rewrite"].empty()) {
        throw MalformedDatasetError(record_index, "missing requested_rewrite entries");
    }
    for (const auto& rewrite : record["requested_rewrite"]) {
        eval_case.edits.push_back(edit_from_rewrite(rewrite, record_index));
    }

    // Prefer labeled triples: their entity names live in the same register
    // as generated answers, which is what chain comparison needs.
    const char* chain_key = record.contains("new_triples_labeled") ? "new_triples_labeled"
                                                                   : "new_triples";
    if (!record.contains(chain_key) || !record[chain_key].is_array()) {
        throw MalformedDatasetError(record_index, "missing new_triples");
    }
    eval_case.gold_chain = chain_from_json(record[chain_key], record_index);
    eval_case.hop_count = static_cast<int>(eval_case.gold_chain.size());
    if (eval_case.hop_count < 2 || eval_case.hop_count > 4) {
        throw MalformedDatasetError(record_index, "hop count " +
                                                      std::to_string(eval_case.hop_count) +
                                                      " outside {2,3,4}");
    }
    for (std::size_t i = 0; i + 1 < eval_case.gold_chain.size(); ++i) {
        if (normalize_entity(eval_case.gold_chain[i].object) !=
            normalize_entity(eval_case.gold_chain[i + 1].subject)) {
            throw MalformedDatasetError(record_index, "gold chain breaks at hop " +
                                                          std::to_string(i) +
                                                          ": object != next subject");
        }
    }
    return eval_case;
}

/// Extracted triple of one step plus whether its relation is known.
struct ChainElement {
    bool has_relation = false;
    FactTriple triple;
};

std::vector<ChainElement> extract_chain(const SolveResult& result) {
    std::vector<ChainElement> chain;
    for (const auto& step : result.trace) {
        ChainElement element;
        if (step.retrieved_edit) {
            element.has_relation = true;
            element.triple = FactTriple{step.retrieved_edit->subject,
                                        step.retrieved_edit->relation, step.answer};
        } else {
            element.triple.object = step.answer;
        }
        chain.push_back(std::move(element));
    }
    return chain;
}

bool chain_matches_gold(const SolveResult& result, const std::vector<FactTriple>& gold) {
    const auto chain = extract_chain(result);
    if (chain.size() != gold.size()) return false;
    for (std::size_t i = 0; i < chain.size(); ++i) {
        if (normalize_entity(chain[i].triple.object) != normalize_entity(gold[i].object)) {
            return false;
        }
        if (chain[i].has_relation) {
            if (normalize_entity(chain[i].triple.subject) != normalize_entity(gold[i].subject) ||
                normalize_entity(chain[i].triple.relation) != normalize_entity(gold[i].relation)) {
                return false;
            }
        }
        // Steps answered parametrically carry no relation; they compare by
        // object only.
    }
    return true;
}

double recall_of(const SolveResult& result, const std::vector<FactEdit>& required) {
    if (required.empty()) return 1.0;
    std::set<std::pair<std::string, std::string>> hit_slots;
    for (const auto& step : result.trace) {
        if (!step.retrieved_edit) continue;
        for (const auto& edit : required) {
            if (normalize_entity(step.retrieved_edit->subject) == normalize_entity(edit.subject) &&
                normalize_entity(step.retrieved_edit->relation) ==
                    normalize_entity(edit.relation) &&
                normalize_entity(step.retrieved_edit->new_object) ==
                    normalize_entity(edit.new_object)) {
                hit_slots.insert(edit.slot_key());
            }
        }
    }
    return static_cast<double>(hit_slots.size()) / static_cast<double>(required.size());
}

}  // namespace

std::string to_string(BatchSetting setting) {
    switch (setting) {
        case BatchSetting::OneEdited: return "1-edited";
        case BatchSetting::HundredEdited: return "100-edited";
        case BatchSetting::AllEdited: return "all-edited";
    }
    return "all-edited";
}

std::vector<EvalCase> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid dataset JSON in " + path.string() + ": " + e.what());
    }
    if (!j.is_array()) throw ConfigError("dataset file must hold a JSON array");
    return parse_dataset(j);
}

std::vector<EvalCase> parse_dataset(const nlohmann::json& array) {
    std::vector<EvalCase> cases;
    cases.reserve(array.size());
    for (std::size_t i = 0; i < array.size(); ++i) {
        cases.push_back(case_from_record(array[i], i));
    }
    return cases;
}

CaseScore score_case(const EvalCase& eval_case, const std::array<SolveResult, 3>& results) {
    CaseScore score;

    std::set<std::string> accepted;
    accepted.insert(normalize_entity(eval_case.gold_answer));
    for (const auto& alias : eval_case.gold_aliases) accepted.insert(normalize_entity(alias));

    for (const auto& result : results) {
        if (accepted.count(normalize_entity(result.final_answer))) score.solved = true;
        if (chain_matches_gold(result, eval_case.gold_chain)) score.path_exact = true;
        score.recall_fraction = std::max(score.recall_fraction, recall_of(result, eval_case.edits));
    }
    return score;
}

std::vector<std::pair<std::size_t, std::size_t>> batch_groups(std::size_t case_count,
                                                              BatchSetting setting) {
    std::vector<std::pair<std::size_t, std::size_t>> groups;
    switch (setting) {
        case BatchSetting::OneEdited:
            for (std::size_t i = 0; i < case_count; ++i) groups.emplace_back(i, i + 1);
            break;
        case BatchSetting::HundredEdited:
            for (std::size_t i = 0; i < case_count; i += 100) {
                groups.emplace_back(i, std::min(case_count, i + 100));
            }
            break;
        case BatchSetting::AllEdited:
            if (case_count > 0) groups.emplace_back(0, case_count);
            break;
    }
    return groups;
}

EditedFactMemory build_memory(const std::vector<EvalCase>& cases, std::size_t begin,
                              std::size_t end, std::shared_ptr<Embedder> embedder) {
    EditedFactMemory memory(std::move(embedder));
    for (std::size_t i = begin; i < end; ++i) {
        for (const auto& edit : cases[i].edits) memory.insert(edit);
    }
    return memory;
}

EvalReport run_eval(const std::vector<EvalCase>& cases, const EvalOptions& options) {
    if (cases.empty()) throw ConfigError("run_eval: no cases");
    if (!options.fact_embedder || !options.backend || !options.templates) {
        throw ConfigError("run_eval: fact_embedder, backend and templates are required");
    }
    options.config.validate();

    EvalReport report;
    report.setting = to_string(options.setting);
    report.config_snapshot = options.config;
    report.per_case.resize(cases.size());

    const auto run_start = std::chrono::steady_clock::now();

    for (const auto& [begin, end] : batch_groups(cases.size(), options.setting)) {
        const EditedFactMemory memory =
            build_memory(cases, begin, end, options.fact_embedder);
        SolveContext ctx;
        ctx.memory = &memory;
        ctx.library = options.library;
        ctx.backend = options.backend;
        ctx.templates = options.templates;

        auto solve_one = [&](std::size_t case_index) {
            const EvalCase& eval_case = cases[case_index];
            PerCaseReport& per_case = report.per_case[case_index];
            per_case.case_id = eval_case.case_id;
            per_case.hops = eval_case.hop_count;
            per_case.edits = static_cast<int>(eval_case.edits.size());

            const auto case_start = std::chrono::steady_clock::now();
            std::array<SolveResult, 3> results;
            for (std::size_t q = 0; q < 3; ++q) {
                try {
                    results[q] = solve(eval_case.questions[q], ctx, options.config);
                } catch (const AbortedCaseError&) {
                    results[q] = SolveResult{};  // unsolved, recall 0
                    per_case.aborted = true;
                }
                per_case.answers[q] = results[q].final_answer;
                per_case.tokens_in += results[q].tokens_in;
                per_case.tokens_out += results[q].tokens_out;
                if (results[q].guidance_uses.case_records > 0) per_case.case_guided = true;
            }
            const CaseScore score = score_case(eval_case, results);
            per_case.solved = score.solved;
            per_case.path_exact = score.path_exact;
            per_case.recall_fraction = score.recall_fraction;
            per_case.seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - case_start)
                    .count();
        };

        const int workers = std::max(1, options.parallelism);
        if (workers == 1 || end - begin <= 1) {
            for (std::size_t i = begin; i < end; ++i) solve_one(i);
        } else {
            std::atomic<std::size_t> next{begin};
            std::vector<std::thread> pool;
            pool.reserve(static_cast<std::size_t>(workers));
            for (int w = 0; w < workers; ++w) {
                pool.emplace_back([&]() {
                    while (true) {
                        const std::size_t i = next.fetch_add(1);
                        if (i >= end) break;
                        solve_one(i);
                    }
                });
            }
            for (auto& thread : pool) thread.join();
        }
    }

    double recall_sum = 0.0;
    int solved = 0;
    int path_exact = 0;
    for (const auto& pc : report.per_case) {
        recall_sum += pc.recall_fraction;
        if (pc.solved) ++solved;
        if (pc.path_exact) ++path_exact;
        if (pc.case_guided) ++report.guided_cases;
        report.total_tokens_in += pc.tokens_in;
        report.total_tokens_out += pc.tokens_out;
    }
    const double n = static_cast<double>(cases.size());
    report.acc = 100.0 * solved / n;
    report.hop_acc = 100.0 * path_exact / n;
    report.recall = 100.0 * recall_sum / n;
    report.total_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - run_start).count();
    return report;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json cases = nlohmann::json::array();
    for (const auto& pc : per_case) {
        cases.push_back(nlohmann::json{{"case_id", pc.case_id},
                                       {"hops", pc.hops},
                                       {"edits", pc.edits},
                                       {"solved", pc.solved},
                                       {"path_exact", pc.path_exact},
                                       {"recall", pc.recall_fraction},
                                       {"tokens_in", pc.tokens_in},
                                       {"tokens_out", pc.tokens_out},
                                       {"seconds", pc.seconds},
                                       {"case_guided", pc.case_guided},
                                       {"aborted", pc.aborted},
                                       {"answers", pc.answers}});
    }
    return nlohmann::json{{"acc", acc},
                          {"hop_acc", hop_acc},
                          {"recall", recall},
                          {"guided_cases", guided_cases},
                          {"setting", setting},
                          {"config", config_snapshot},
                          {"totals",
                           {{"tokens_in", total_tokens_in},
                            {"tokens_out", total_tokens_out},
                            {"seconds", total_seconds}}},
                          {"cases", cases}};
}

std::string EvalReport::to_csv() const {
    std::ostringstream out;
    out << "case_id,hops,edits,solved,path_exact,recall,tokens_in,tokens_out,seconds\n";
    for (const auto& pc : per_case) {
        out << pc.case_id << ',' << pc.hops << ',' << pc.edits << ',' << (pc.solved ? 1 : 0)
            << ',' << (pc.path_exact ? 1 : 0) << ',' << pc.recall_fraction << ','
            << pc.tokens_in << ',' << pc.tokens_out << ',' << pc.seconds << '\n';
    }
    return out.str();
}

std::string EvalReport::summary_line() const {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(2);
    out << "Acc " << acc << " Hop-Acc " << hop_acc << " Recall " << recall << " guided-cases "
        << guided_cases << " (" << setting << ", " << per_case.size() << " cases)";
    return out.str();
}

}  // namespace mhke
