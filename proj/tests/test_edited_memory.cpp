#include <doctest.h>

#include <memory>
#include <random>

#include "mhke/edited_memory.hpp"
#include "support/oracles.hpp"
#include "support/test_util.hpp"

using namespace mhke;

namespace {

EditedFactMemory make_memory() { return EditedFactMemory(std::make_shared<HashBagEmbedder>()); }

}  // namespace

TEST_SUITE("edited-memory") {

TEST_CASE("insert grows the memory and computes both vectors") {
    auto memory = make_memory();
    CHECK(memory.empty());
    memory.insert(testing::make_edit("USA", "president", "Donald Trump"));
    CHECK(memory.size() == 1);
    CHECK(memory.entries()[0].question_vector.dimension() == HashBagEmbedder::kDimension);
    CHECK(memory.entries()[0].statement_vector.dimension() == HashBagEmbedder::kDimension);
}

TEST_CASE("inserting the same (subject, relation) twice keeps the latest object") {
    auto memory = make_memory();
    memory.insert(testing::make_edit("USA", "president", "Donald Trump"));
    memory.insert(testing::make_edit("usa ", " President", "Kamala Harris"));
    CHECK(memory.size() == 1);
    CHECK(memory.entries()[0].edit.new_object == "Kamala Harris");
}

TEST_CASE("insert validates the edit") {
    auto memory = make_memory();
    FactEdit edit = testing::make_edit("USA", "president", "Donald Trump");
    edit.atomic_question = " ";
    CHECK_THROWS_AS(memory.insert(edit), ConfigError);
}

TEST_CASE("100 distinct edits are each retrievable by their atomic question") {
    auto memory = make_memory();
    std::mt19937_64 rng(21);
    std::vector<FactEdit> edits;
    for (int i = 0; i < 100; ++i) {
        // unique per-edit vocabulary keeps questions well separated
        FactEdit edit = testing::make_edit("s" + std::to_string(i) + testing::random_token(rng),
                                           "r" + std::to_string(i) + testing::random_token(rng),
                                           "o" + std::to_string(i) + testing::random_token(rng));
        edits.push_back(edit);
        memory.insert(edit);
    }
    CHECK(memory.size() == 100);

    auto embedder = memory.embedder();
    for (const auto& edit : edits) {
        const auto hit = memory.precise_retrieve(edit.atomic_question, 0.85);
        REQUIRE(hit.has_value());
        CHECK(*hit == edit);
        CHECK(cosine(embedder->embed(edit.atomic_question),
                     embedder->embed(hit->atomic_question)) == doctest::Approx(1.0));
    }
}

TEST_CASE("pre_retrieve returns everything when the memory is smaller than n") {
    auto memory = make_memory();
    memory.insert(testing::make_edit("a1 b1", "c1", "d1"));
    memory.insert(testing::make_edit("a2 b2", "c2", "d2"));
    const auto result = memory.pre_retrieve("anything at all", 3);
    CHECK(result.size() == 2);
}

TEST_CASE("pre_retrieve on empty memory returns an empty list") {
    auto memory = make_memory();
    CHECK(memory.pre_retrieve("whatever", 3).empty());
}

TEST_CASE("pre_retrieve rejects n < 1") {
    auto memory = make_memory();
    memory.insert(testing::make_edit("a", "b", "c"));
    CHECK_THROWS_AS(memory.pre_retrieve("q", 0), ConfigError);
}

TEST_CASE("pre_retrieve matches the exhaustive-sort oracle on random instances") {
    std::mt19937_64 rng(5);
    for (int instance = 0; instance < 25; ++instance) {
        auto memory = make_memory();
        const int size = 50;
        for (int i = 0; i < size; ++i) memory.insert(testing::random_edit(rng));

        for (int q = 0; q < 20; ++q) {
            const std::string query = testing::random_text(rng, 2, 6);
            const int n = 1 + static_cast<int>(rng() % 8);
            const auto got = memory.pre_retrieve(query, n);
            const auto expected =
                testing::oracle_pre_retrieve(memory, query, static_cast<std::size_t>(n));
            CHECK(got == expected);
        }
    }
}

TEST_CASE("pre_retrieve output is a prefix of the full exhaustive ordering") {
    std::mt19937_64 rng(6);
    auto memory = make_memory();
    for (int i = 0; i < 30; ++i) memory.insert(testing::random_edit(rng));
    for (int q = 0; q < 10; ++q) {
        const std::string query = testing::random_text(rng, 2, 5);
        const auto full = memory.pre_retrieve(query, static_cast<int>(memory.size()));
        for (int n = 1; n <= static_cast<int>(memory.size()); n += 7) {
            const auto top = memory.pre_retrieve(query, n);
            REQUIRE(top.size() <= full.size());
            for (std::size_t i = 0; i < top.size(); ++i) CHECK(top[i] == full[i]);
        }
    }
}

TEST_CASE("pre_retrieve breaks ties by insertion order") {
    auto memory = make_memory();
    // identical questions -> identical vectors -> exact ties
    FactEdit first = testing::make_edit("alpha one", "shared relation", "x");
    FactEdit second = testing::make_edit("alpha two", "shared relation", "y");
    first.atomic_question = "What is the shared relation of alpha?";
    second.atomic_question = "What is the shared relation of alpha?";
    memory.insert(first);
    memory.insert(second);
    const auto result = memory.pre_retrieve("What is the shared relation of alpha?", 2);
    REQUIRE(result.size() == 2);
    CHECK(result[0] == first);
    CHECK(result[1] == second);
}

TEST_CASE("precise_retrieve finds an identical subquestion") {
    auto memory = make_memory();
    const auto edit = testing::make_edit("USA", "president", "Donald Trump");
    memory.insert(edit);
    const auto hit = memory.precise_retrieve(edit.atomic_question, 0.85);
    REQUIRE(hit.has_value());
    CHECK(*hit == edit);
}

TEST_CASE("precise_retrieve handles the reordered continent subquestion") {
    auto memory = make_memory();
    FactEdit edit;
    edit.subject = "Los Angeles";
    edit.relation = "continent";
    edit.new_object = "Asia";
    edit.atomic_question = "Which continent is Los Angeles located in?";
    edit.statement = "Los Angeles is located in the continent of Asia.";
    memory.insert(edit);
    memory.insert(testing::make_edit("2028 Summer Olympics", "host city", "Los Angeles"));

    const auto hit = memory.precise_retrieve("In which continent is Los Angeles located?", 0.85);
    REQUIRE(hit.has_value());
    CHECK(hit->new_object == "Asia");
}

TEST_CASE("precise_retrieve misses a coarser-grained subquestion") {
    auto memory = make_memory();
    FactEdit edit;
    edit.subject = "USA";
    edit.relation = "head of state";
    edit.new_object = "Donald Trump";
    edit.atomic_question = "Who is the president of the USA?";
    edit.statement = "The president of the USA is Donald Trump.";
    memory.insert(edit);
    // Coarser question; lexical cosine stays under the 0.85 threshold.
    CHECK_FALSE(memory.precise_retrieve("Who is the First Lady of the United States?", 0.85)
                    .has_value());
}

TEST_CASE("precise_retrieve returns none when all cosines are below tau") {
    auto memory = make_memory();
    memory.insert(testing::make_edit("alpha bravo", "charlie", "delta"));
    memory.insert(testing::make_edit("echo foxtrot", "golf", "hotel"));
    const std::string query = "совершенно disjoint vocabulary query";
    CHECK_FALSE(memory.precise_retrieve(query, 0.85).has_value());
    const auto [best, argmax] = testing::oracle_argmax_above_tau(memory, query, 0.85);
    CHECK(best < 0.85);
    CHECK(argmax.empty());
}

TEST_CASE("precise_retrieve rejects empty subquestions and propagates embed errors") {
    auto memory = make_memory();
    memory.insert(testing::make_edit("a", "b", "c"));
    CHECK_THROWS_AS(memory.precise_retrieve("", 0.85), EmptyTextError);
}

TEST_CASE("precise result is always inside the pre_retrieve full ranking head") {
    std::mt19937_64 rng(9);
    auto memory = make_memory();
    for (int i = 0; i < 40; ++i) memory.insert(testing::random_edit(rng));
    int hits = 0;
    for (int q = 0; q < 60; ++q) {
        // half the queries are exact stored questions, so some must hit
        std::string query;
        if (q % 2 == 0) {
            query = memory.entries()[rng() % memory.size()].edit.atomic_question;
        } else {
            query = testing::random_text(rng, 2, 6);
        }
        const auto hit = memory.precise_retrieve(query, 0.85);
        if (!hit) continue;
        ++hits;
        const auto all = memory.pre_retrieve(query, static_cast<int>(memory.size()));
        CHECK(std::find(all.begin(), all.end(), *hit) != all.end());
        CHECK(*hit == all.front());  // it is the argmax
    }
    CHECK(hits > 0);
}

TEST_CASE("token_overlap uses distinct tokens over the shorter side") {
    CHECK(EditedFactMemory::token_overlap("who wrote danse macabre",
                                          "who wrote danse russe") == doctest::Approx(0.75));
    CHECK(EditedFactMemory::token_overlap("a b", "a b c d") == doctest::Approx(1.0));
    CHECK(EditedFactMemory::token_overlap("x y z", "p q r") == doctest::Approx(0.0));
    CHECK(EditedFactMemory::token_overlap("", "a") == doctest::Approx(0.0));
}

TEST_CASE("identical inputs give identical retrieval results across runs") {
    std::mt19937_64 rng(13);
    std::vector<FactEdit> edits;
    for (int i = 0; i < 20; ++i) edits.push_back(testing::random_edit(rng));
    const std::string query = edits[7].atomic_question;

    auto run = [&edits, &query]() {
        auto memory = make_memory();
        for (const auto& edit : edits) memory.insert(edit);
        return std::make_pair(memory.pre_retrieve(query, 3),
                              memory.precise_retrieve(query, 0.85));
    };
    const auto first = run();
    const auto second = run();
    CHECK(first.first == second.first);
    CHECK(first.second == second.second);
}

TEST_CASE("export_json lists the stored edits") {
    auto memory = make_memory();
    memory.insert(testing::make_edit("USA", "president", "Donald Trump"));
    const auto j = memory.export_json();
    REQUIRE(j.is_array());
    REQUIRE(j.size() == 1);
    CHECK(j[0]["new_object"] == "Donald Trump");
}

}  // TEST_SUITE
