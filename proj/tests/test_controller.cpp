#include <doctest.h>

#include <algorithm>
#include <memory>

#include "mhke/controller.hpp"
#include "support/scenarios.hpp"
#include "support/test_util.hpp"

using namespace mhke;
using mhke::testing::MisleadScenario;
using mhke::testing::OlympicsScenario;
using mhke::testing::SolveHarness;
using Rule = ScriptedBackend::Rule;

TEST_SUITE("controller") {

TEST_CASE("two-hop guided solve follows the edited chain") {
    OlympicsScenario scenario;
    ScriptedBackend backend(scenario.rules(), "Final answer: unknown");
    backend.set_call_logging(true);

    EngineConfig config;
    const auto result = solve(scenario.question, scenario.harness.ctx(backend), config);

    CHECK(result.final_answer == "Asia");
    REQUIRE(result.trace.size() == 2);
    CHECK(result.trace[0].subquestion == scenario.host.atomic_question);
    CHECK(result.trace[0].answer == "Los Angeles");
    REQUIRE(result.trace[0].retrieved_edit.has_value());
    CHECK(*result.trace[0].retrieved_edit == scenario.host);
    CHECK(result.trace[0].guided_by == GuidedBy::Fact);
    CHECK(result.trace[1].subquestion == scenario.continent.atomic_question);
    CHECK(result.trace[1].answer == "Asia");
    REQUIRE(result.trace[1].retrieved_edit.has_value());
    CHECK(*result.trace[1].retrieved_edit == scenario.continent);
    CHECK(result.retrieved_edit_count == 2);
    CHECK(result.backtrack_count == 0);
    CHECK(result.stack_depth_at_end == 0);
    CHECK(result.guidance_uses.fact == 2);
    CHECK(result.guidance_uses.case_records == 0);
    CHECK_FALSE(result.truncated);
    CHECK(result.tokens_in > 0);
    CHECK(result.tokens_out > 0);
}

TEST_CASE("every retrieved edit in the trace is a member of the memory") {
    OlympicsScenario scenario;
    ScriptedBackend backend(scenario.rules(), "Final answer: unknown");
    const auto result = solve(scenario.question, scenario.harness.ctx(backend), EngineConfig{});
    REQUIRE(result.retrieved_edit_count > 0);
    for (const auto& step : result.trace) {
        if (step.retrieved_edit) CHECK(scenario.harness.memory.contains(*step.retrieved_edit));
    }
}

TEST_CASE("identical inputs produce identical solve results") {
    OlympicsScenario scenario;
    ScriptedBackend backend(scenario.rules(), "Final answer: unknown");
    const auto a = solve(scenario.question, scenario.harness.ctx(backend), EngineConfig{});
    const auto b = solve(scenario.question, scenario.harness.ctx(backend), EngineConfig{});
    CHECK(solve_result_to_json(a) == solve_result_to_json(b));
}

TEST_CASE("empty memory and an immediate final answer leave everything untouched") {
    SolveHarness harness;
    ScriptedBackend backend({}, "Final answer: forty-two");
    backend.set_call_logging(true);
    const auto result = solve("Any question at all?", harness.ctx(backend), EngineConfig{});
    CHECK(result.final_answer == "forty-two");
    CHECK(result.trace.empty());
    CHECK(result.stack_depth_at_end == 0);
    CHECK(result.backtrack_count == 0);
    CHECK(result.retrieved_edit_count == 0);
    // no memory -> no judge call; only the one decomposition prompt went out
    CHECK(backend.call_log().size() == 1);
}

TEST_CASE("misleading guidance is undone by exactly one backtrack") {
    MisleadScenario scenario;
    ScriptedBackend backend(scenario.rules(), "0");
    const auto result = solve(scenario.question, scenario.harness.ctx(backend), EngineConfig{});

    // hand-walked edited chain: origin(Danse Macabre)=France (edited),
    // leader(France)=Emmanuel Macron (parametric)
    CHECK(result.final_answer == "Emmanuel Macron");
    CHECK(result.backtrack_count == 1);
    CHECK(result.stack_depth_at_end == 0);
    REQUIRE(result.trace.size() == 2);
    CHECK(result.trace[0].subquestion == scenario.target.atomic_question);
    CHECK(result.trace[0].answer == "France");
    REQUIRE(result.trace[0].retrieved_edit.has_value());
    CHECK(*result.trace[0].retrieved_edit == scenario.target);
    CHECK(result.trace[0].guided_by == GuidedBy::None);  // replayed hop runs unguided
    CHECK(result.trace[1].answer == "Emmanuel Macron");
    CHECK_FALSE(result.trace[1].retrieved_edit.has_value());
}

TEST_CASE("disabling backtracking keeps the misled answer and a non-empty stack") {
    MisleadScenario scenario;
    ScriptedBackend backend(scenario.rules(), "0");
    EngineConfig config;
    config.backtracking_enabled = false;
    const auto result = solve(scenario.question, scenario.harness.ctx(backend), config);
    CHECK(result.final_answer == "Georges Pompidou");
    CHECK(result.backtrack_count == 0);
    CHECK(result.stack_depth_at_end == 1);  // the saved state was never consumed
}

TEST_CASE("pop budget caps the number of backtracks") {
    MisleadScenario scenario;
    ScriptedBackend backend(scenario.rules(), "0");
    EngineConfig config;
    config.max_backtracks = 0;
    const auto result = solve(scenario.question, scenario.harness.ctx(backend), config);
    CHECK(result.final_answer == "Georges Pompidou");
    CHECK(result.backtrack_count == 0);
}

TEST_CASE("a precise-retrieval hit clears the whole stack") {
    OlympicsScenario scenario;
    ScriptedBackend backend(scenario.rules(), "Final answer: unknown");
    const auto result = solve(scenario.question, scenario.harness.ctx(backend), EngineConfig{});
    // both hops were guided and both hit; had the stack survived, the final
    // answer would have triggered a pop
    CHECK(result.backtrack_count == 0);
    CHECK(result.stack_depth_at_end == 0);
}

TEST_CASE("disabling all guidance issues no judge prompts and no case lookups") {
    OlympicsScenario scenario;
    ScriptedBackend backend(scenario.rules(), "Final answer: unknown");
    backend.set_call_logging(true);

    auto counting = std::make_shared<mhke::testing::CountingEmbedder>(
        std::make_shared<HashBagEmbedder>());
    CaseLibrary library(counting);
    CaseRecord record;
    record.question = scenario.question;
    record.steps = {DecompositionStep{"s", "a", std::nullopt, GuidedBy::None}};
    record.final_answer = "a";
    record.succeeded = true;
    library.append(record);
    const int calls_after_append = counting->calls();

    EngineConfig config;
    config.fact_guidance_enabled = false;
    config.case_guidance_enabled = false;
    const auto result =
        solve(scenario.question, scenario.harness.ctx(backend, &library), config);

    CHECK(counting->calls() == calls_after_append);  // lookup never embedded
    for (const auto& prompt : backend.call_log()) {
        CHECK(prompt.find("Candidate fact questions:") == std::string::npos);
    }
    CHECK(result.guidance_uses.fact == 0);
    CHECK(result.guidance_uses.case_records == 0);
    for (const auto& step : result.trace) CHECK(step.guided_by == GuidedBy::None);
}

TEST_CASE("with guidance off the scripted static path is followed") {
    // The Olympics rules only script guided decompositions, so an unguided
    // run falls through to the default reply and terminates immediately.
    OlympicsScenario scenario;
    ScriptedBackend backend(scenario.rules(), "Final answer: unknown");
    EngineConfig config;
    config.fact_guidance_enabled = false;
    const auto result = solve(scenario.question, scenario.harness.ctx(backend), config);
    CHECK(result.final_answer == "unknown");
    CHECK(result.retrieved_edit_count == 0);
}

TEST_CASE("a similar solved case becomes the dynamic prompt for every hop") {
    OlympicsScenario scenario;
    auto rules = scenario.rules();
    ScriptedBackend backend(rules, "Final answer: unknown");
    backend.set_call_logging(true);

    CaseLibrary library(scenario.harness.embedder);
    CaseRecord record;
    record.question = scenario.question;  // similarity 1.0 >= theta
    record.steps = {DecompositionStep{"Where will the previous games be hosted?", "Paris",
                                      std::nullopt, GuidedBy::None}};
    record.final_answer = "Europe";
    record.succeeded = true;
    library.append(record);

    const auto result =
        solve(scenario.question, scenario.harness.ctx(backend, &library), EngineConfig{});
    CHECK(result.guidance_uses.case_records == 1);
    CHECK(result.final_answer == "Asia");
    for (const auto& step : result.trace) CHECK(step.guided_by == GuidedBy::Both);

    int decompose_prompts_with_case_block = 0;
    for (const auto& prompt : backend.call_log()) {
        if (prompt.find("Decomposition so far:") == std::string::npos) continue;
        if (prompt.find("Here is the decomposition record of a similar solved question:") !=
            std::string::npos) {
            ++decompose_prompts_with_case_block;
            CHECK(prompt.find("Where will the previous games be hosted?") != std::string::npos);
        }
    }
    CHECK(decompose_prompts_with_case_block >= 2);
}

TEST_CASE("random case selection serves the ablation mode") {
    OlympicsScenario scenario;
    ScriptedBackend backend(scenario.rules(), "Final answer: unknown");

    CaseLibrary library(scenario.harness.embedder);
    for (int i = 0; i < 5; ++i) {
        CaseRecord record;
        record.question = "unrelated stored question " + std::to_string(i);
        record.steps = {DecompositionStep{"s", "a", std::nullopt, GuidedBy::None}};
        record.final_answer = "a";
        record.succeeded = true;
        library.append(record);
    }

    EngineConfig config;
    config.random_case_selection = true;
    config.random_case_seed = 9;
    const auto a =
        solve(scenario.question, scenario.harness.ctx(backend, &library), config);
    const auto b =
        solve(scenario.question, scenario.harness.ctx(backend, &library), config);
    // none of the stored questions is similar, yet the random mode guides
    CHECK(a.guidance_uses.case_records == 1);
    CHECK(solve_result_to_json(a) == solve_result_to_json(b));
}

TEST_CASE("guidance payload can be switched to the fact statement") {
    OlympicsScenario scenario;
    auto rules = scenario.rules();
    // the guided decomposition must now match on the statement text
    rules.insert(rules.begin(),
                 Rule{"Reference: " + scenario.host.statement,
                      "Subquestion: " + scenario.host.atomic_question});
    rules.insert(rules.begin() + 1,
                 Rule{"Reference: " + scenario.continent.statement,
                      "Subquestion: " + scenario.continent.atomic_question});
    ScriptedBackend backend(rules, "Final answer: unknown");
    backend.set_call_logging(true);

    EngineConfig config;
    config.guidance_payload = GuidancePayload::FactStatement;
    const auto result = solve(scenario.question, scenario.harness.ctx(backend), config);
    CHECK(result.final_answer == "Asia");
    bool saw_statement = false;
    for (const auto& prompt : backend.call_log()) {
        if (prompt.find("Reference: " + scenario.host.statement) != std::string::npos) {
            saw_statement = true;
        }
        CHECK(prompt.find("Reference: " + scenario.host.atomic_question) == std::string::npos);
    }
    CHECK(saw_statement);
}

TEST_CASE("hitting max_hops truncates with the last answer") {
    SolveHarness harness;
    harness.memory.insert(
        mhke::testing::make_edit("far away subject", "far relation", "far object"));
    ScriptedBackend backend(
        {
            {"Question: loop question\nAnswer:", "looped entity"},
            {"Decomposition so far:", "Subquestion: loop question"},
        },
        "0");

    EngineConfig config;
    config.max_hops = 3;
    config.fact_guidance_enabled = false;
    const auto result = solve("Will this ever end?", harness.ctx(backend), config);
    CHECK(result.truncated);
    CHECK(result.trace.size() == 3);
    CHECK(result.final_answer == "looped entity");
}

TEST_CASE("unparseable decomposition aborts after one retry with the partial trace") {
    SolveHarness harness;
    ScriptedBackend backend({{"Decomposition so far:", "no markers in this reply"}}, "garbage");
    try {
        solve("Some question?", harness.ctx(backend), EngineConfig{});
        FAIL("expected AbortedCaseError");
    } catch (const AbortedCaseError& e) {
        CHECK(e.partial_trace().empty());
    }
}

TEST_CASE("the format-reminder retry can rescue a decomposition") {
    SolveHarness harness;
    ScriptedBackend backend(
        {
            {"Respond with exactly one line", "Final answer: rescued"},
            {"Decomposition so far:", "no markers in this reply"},
        },
        "garbage");
    const auto result = solve("Some question?", harness.ctx(backend), EngineConfig{});
    CHECK(result.final_answer == "rescued");
}

TEST_CASE("solve validates its inputs") {
    SolveHarness harness;
    ScriptedBackend backend({}, "Final answer: x");
    CHECK_THROWS_AS(solve("", harness.ctx(backend), EngineConfig{}), EmptyTextError);
    EngineConfig bad;
    bad.max_hops = 0;
    CHECK_THROWS_AS(solve("q", harness.ctx(backend), bad), ConfigError);
    SolveContext incomplete;
    CHECK_THROWS_AS(solve("q", incomplete, EngineConfig{}), ConfigError);
}

}  // TEST_SUITE
