#pragma once

#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include "mhke/controller.hpp"
#include "mhke/eval.hpp"
#include "support/test_util.hpp"

// Hand-scripted solve scenarios shared by the controller tests and the
// acceptance suite. Rule matchers key on labels each prompt template renders
// uniquely ("Main question:", "Reference:", "Resolved subquestion:",
// "Question: ...\nAnswer:"), so one rule set drives a whole multi-hop solve.
namespace mhke::testing {

struct SolveHarness {
    std::shared_ptr<HashBagEmbedder> embedder = std::make_shared<HashBagEmbedder>();
    EditedFactMemory memory{embedder};
    TemplateCatalog templates = load_templates();

    SolveContext ctx(LlmBackend& backend, const CaseLibrary* library = nullptr) {
        SolveContext c;
        c.memory = &memory;
        c.library = library;
        c.backend = &backend;
        c.templates = &templates;
        return c;
    }

    /// 1-based position of the edit in the pre-retrieval candidate list, as
    /// the judge prompt numbers them.
    std::string judge_index(const std::string& question, const FactEdit& edit, int n = 3) {
        const auto candidates = memory.pre_retrieve(question, n);
        const auto it = std::find(candidates.begin(), candidates.end(), edit);
        if (it == candidates.end()) {
            throw std::logic_error("scenario edit not among pre-retrieval candidates");
        }
        return std::to_string(it - candidates.begin() + 1);
    }
};

/// Two-hop Olympics case: both hops covered by edits, and fact guidance
/// makes each subquestion line up exactly with the stored atomic question.
struct OlympicsScenario {
    SolveHarness harness;
    std::string question = "From which continent will the 2028 Summer Olympics be hosted?";
    FactEdit host = [] {
        FactEdit e;
        e.subject = "2028 Summer Olympics";
        e.relation = "host city";
        e.old_object = "Brisbane";
        e.new_object = "Los Angeles";
        e.atomic_question = "Where will the 2028 Summer Olympics be hosted?";
        e.statement = "The 2028 Summer Olympics will be hosted in Los Angeles.";
        return e;
    }();
    FactEdit continent = [] {
        FactEdit e;
        e.subject = "Los Angeles";
        e.relation = "continent";
        e.old_object = "North America";
        e.new_object = "Asia";
        e.atomic_question = "In which continent is Los Angeles located?";
        e.statement = "Los Angeles is located in the continent of Asia.";
        return e;
    }();
    std::string hop1_rewritten = "In which continent is Los Angeles located?";
    std::string hop2_rewritten = "Which continent is the resolved games continent question?";

    std::vector<ScriptedBackend::Rule> rules() {
        harness.memory.insert(host);
        harness.memory.insert(continent);
        return {
            {"Main question: " + question, harness.judge_index(question, host)},
            {"Reference: " + host.atomic_question, "Subquestion: " + host.atomic_question},
            {"Resolved subquestion: " + host.atomic_question, hop1_rewritten},
            {"Main question: " + hop1_rewritten,
             harness.judge_index(hop1_rewritten, continent)},
            {"Reference: " + continent.atomic_question,
             "Subquestion: " + continent.atomic_question},
            {"Resolved subquestion: " + continent.atomic_question, hop2_rewritten},
            {"Main question: " + hop2_rewritten, "0"},
            {"Answer: Asia", "Final answer: Asia"},
        };
    }
};

/// Misleading-guidance case: hop-0 guidance points at the wrong edit, the
/// generated subquestion retrieves nothing, and the first final answer is
/// wrong ("Georges Pompidou"). One backtrack replays hop 0 unguided, which
/// then walks the edited chain origin->France, leader->Emmanuel Macron.
struct MisleadScenario {
    SolveHarness harness;
    std::string question =
        "What is the name of the political leader of the country of origin of Danse Macabre?";
    FactEdit distractor = [] {
        FactEdit e;
        e.subject = "Danse Russe";
        e.relation = "composer";
        e.new_object = "Camille Saint-Saëns";
        e.atomic_question = "Who wrote Danse Russe?";
        e.statement = "The writer of Danse Russe is Camille Saint-Saëns.";
        return e;
    }();
    FactEdit target = [] {
        FactEdit e;
        e.subject = "Danse Macabre";
        e.relation = "country of origin";
        e.new_object = "France";
        e.atomic_question = "Where was the theme of Danse Macabre created?";
        e.statement = "Danse Macabre was created in France.";
        return e;
    }();

    std::vector<ScriptedBackend::Rule> rules() {
        harness.memory.insert(distractor);
        harness.memory.insert(target);
        const std::string misled_rewrite =
            "What is the name of the political leader of the country of origin of the works of "
            "Camille Saint-Saëns?";
        return {
            // misled path
            {"Main question: " + question, harness.judge_index(question, distractor)},
            {"Reference: " + distractor.atomic_question, "Subquestion: Who wrote Danse Macabre?"},
            {"Question: Who wrote Danse Macabre?\nAnswer:", "Camille Saint-Saëns"},
            {"Resolved subquestion: Who wrote Danse Macabre?", misled_rewrite},
            {"Answer: Camille Saint-Saëns", "Final answer: Georges Pompidou"},
            // recovered path after the backtrack (most specific first)
            {"Answer: Emmanuel Macron", "Final answer: Emmanuel Macron"},
            {"Question: Who is the political leader of France?\nAnswer:", "Emmanuel Macron"},
            {"Answer: France", "Subquestion: Who is the political leader of France?"},
            {"Resolved subquestion: " + target.atomic_question,
             "Who is the political leader of France?"},
            {"Question: " + question, "Subquestion: " + target.atomic_question},
        };
    }
};

/// Granularity-mismatch case, eval-level: the question asks about the First
/// Lady while the edit changes the president. Without fact guidance the
/// scripted decomposition asks the coarser First-Lady question, misses the
/// edit, and lands on the stale chain (Jill Biden -> Hammonton). With fact
/// guidance the decomposition aligns with the atomic question, hits the
/// edit, and follows the edited chain to Novo Mesto.
struct FirstLadyScenario {
    EvalCase eval_case = [] {
        EvalCase c;
        c.case_id = "first-lady";
        const std::string q = "Where was the current First Lady of the United States born?";
        c.questions = {q, q + " (alt)", q + " (alt two)"};
        c.gold_answer = "Novo Mesto";
        c.gold_aliases = {"Novo mesto"};
        FactEdit edit;
        edit.subject = "United States";
        edit.relation = "president";
        edit.old_object = "Joe Biden";
        edit.new_object = "Donald Trump";
        edit.atomic_question = "Who is the president of the United States?";
        edit.statement = "The president of the United States is Donald Trump.";
        c.edits = {edit};
        c.gold_chain = {FactTriple{"United States", "president", "Donald Trump"},
                        FactTriple{"Donald Trump", "wife", "Melania Trump"},
                        FactTriple{"Melania Trump", "birthplace", "Novo Mesto"}};
        c.hop_count = 3;
        return c;
    }();

    std::vector<ScriptedBackend::Rule> rules() const {
        const std::string& q = eval_case.questions[0];
        const FactEdit& edit = eval_case.edits[0];
        return {
            // edited chain, deepest first
            {"Answer: Novo Mesto", "Final answer: Novo Mesto"},
            {"Answer: Melania Trump", "Subquestion: Where was Melania Trump born?"},
            {"Answer: Donald Trump", "Subquestion: Who is the wife of Donald Trump?"},
            // stale chain reached when the edit is skipped
            {"Answer: Hammonton", "Final answer: Hammonton"},
            {"Answer: Jill Biden", "Subquestion: Where was Jill Biden born?"},
            // parametric answers (the First-Lady one contradicts the edit)
            {"Question: Who is the First Lady of the United States?\nAnswer:", "Jill Biden"},
            {"Question: Where was Jill Biden born?\nAnswer:", "Hammonton"},
            {"Question: Who is the wife of Donald Trump?\nAnswer:", "Melania Trump"},
            {"Question: Where was Melania Trump born?\nAnswer:", "Novo Mesto"},
            // guidance: the single candidate is the president edit
            {"Main question: " + q, "1"},
            {"Reference: " + edit.atomic_question, "Subquestion: " + edit.atomic_question},
            {"Resolved subquestion: " + edit.atomic_question,
             "Where was the wife of Donald Trump born?"},
            {"Main question: Where was the wife of Donald Trump born?", "0"},
            {"Resolved subquestion: Who is the wife of Donald Trump?",
             "Where was Melania Trump born?"},
            {"Main question: Where was Melania Trump born?", "0"},
            // unguided decomposition asks the coarser First-Lady question
            {"Question: " + q, "Subquestion: Who is the First Lady of the United States?"},
        };
    }
};

}  // namespace mhke::testing
