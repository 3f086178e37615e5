#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "mokge/kg.hpp"
#include "oracles.hpp"

using namespace mokge;

namespace {

KnowledgeGraph parse_kg(const std::string& text) {
    std::istringstream in(text);
    return KnowledgeGraph::parse(in);
}

std::set<std::string> names(const KnowledgeGraph& kg, std::span<const ConceptId> ids) {
    std::set<std::string> out;
    for (ConceptId c : ids)
        out.insert(kg.concept_name(c));
    return out;
}

KnowledgeGraph chain() { return parse_kg("a\tr\tb\nb\tr\tc\nc\tr\td\n"); }

}  // namespace

TEST_CASE("load deduplicates repeated triples") {
    const auto kg = parse_kg("piano\tIsA\tinstrument\npiano\tIsA\tinstrument\nsport\tIsA\tactivity\n");
    CHECK(kg.triples().size() == 2);
    CHECK(kg.num_concepts() == 4);
    CHECK(kg.num_relations() == 1);
    CHECK(kg.concept_name(0) == "piano");
}

TEST_CASE("a two-field line is an error citing its line") {
    try {
        parse_kg("piano\tIsA\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 1);
        CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }
    try {
        parse_kg("a\tr\tb\n\nc\tr\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
}

TEST_CASE("CRLF and LF files load the same graph") {
    const auto lf = parse_kg("a\tr\tb\nb\tr\tc\n");
    const auto crlf = parse_kg("a\tr\tb\r\nb\tr\tc\r\n");
    CHECK(lf.fingerprint() == crlf.fingerprint());
    CHECK(lf.triples() == crlf.triples());
}

TEST_CASE("grounding the running example") {
    const auto kg = parse_kg("piano\tIsA\tinstrument\nsport\tIsA\tactivity\nkind\tRelatedTo\ttype\n"
                             "play\tRelatedTo\tpiano\n");
    CHECK(names(kg, kg.ground("piano is a kind of sport")) ==
          std::set<std::string>{"piano", "sport", "kind"});
    CHECK(names(kg, kg.ground("playing pianos")) == std::set<std::string>{"piano", "play"});
    CHECK(names(kg, kg.ground("Piano, sport!")) == std::set<std::string>{"piano", "sport"});
    CHECK(kg.ground("nothing here").empty());
}

TEST_CASE("multiword concepts match contiguous spans") {
    const auto kg = parse_kg("living_room\tPartOf\thouse\nroom\tRelatedTo\tspace\n");
    CHECK(names(kg, kg.ground("the living room is big")) == std::set<std::string>{"living_room"});
    CHECK(names(kg, kg.ground("a room for living")) == std::set<std::string>{"room"});
}

TEST_CASE("stem variants strip one suffix when enough remains") {
    const auto v = stem_variants("pianos");
    CHECK(std::find(v.begin(), v.end(), "piano") != v.end());
    const auto w = stem_variants("bus");
    CHECK(std::find(w.begin(), w.end(), "bu") == w.end());
}

TEST_CASE("two hops from one end of a chain") {
    const auto kg = chain();
    const ConceptId a = *kg.find_concept("a");
    const std::vector<ConceptId> seeds{a};
    const Subgraph sg = extract_subgraph(seeds, kg, {2, 300});
    CHECK(names(kg, sg.nodes) == std::set<std::string>{"a", "b", "c"});
    REQUIRE(sg.edges.size() == 2);
    CHECK(kg.concept_name(sg.edges[0].head) == "a");
    CHECK(kg.concept_name(sg.edges[0].tail) == "b");
    CHECK(kg.concept_name(sg.edges[1].head) == "b");
    CHECK(kg.concept_name(sg.edges[1].tail) == "c");
    CHECK(sg.nodes.front() == a);
}

TEST_CASE("seeds at both ends cover the chain") {
    const auto kg = chain();
    const std::vector<ConceptId> seeds{*kg.find_concept("a"), *kg.find_concept("d")};
    const Subgraph sg = extract_subgraph(seeds, kg, {2, 300});
    CHECK(sg.size() == 4);
    CHECK(sg.edges.size() == 3);
}

TEST_CASE("no seeds give an empty subgraph; unknown ids are rejected") {
    const auto kg = chain();
    CHECK(extract_subgraph({}, kg).size() == 0);
    const std::vector<ConceptId> bad{99};
    CHECK_THROWS_AS(extract_subgraph(bad, kg), std::out_of_range);
}

TEST_CASE("node cap keeps seeds and drops later discoveries") {
    KnowledgeGraph kg;
    for (int i = 0; i < 10; ++i)
        kg.add_triple("hub", "r", "n" + std::to_string(i));
    const std::vector<ConceptId> seeds{*kg.find_concept("n9")};
    const Subgraph sg = extract_subgraph(seeds, kg, {2, 4});
    CHECK(sg.size() == 4);
    CHECK(sg.nodes[0] == seeds[0]);
    for (const auto& e : sg.edges) {
        CHECK(sg.local_index(e.head).has_value());
        CHECK(sg.local_index(e.tail).has_value());
    }
}

TEST_CASE("subgraph matches brute-force expansion on random graphs") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const KnowledgeGraph kg = oracle::random_graph(rng, 1 + rng() % 50, rng() % 120, 4);
        std::vector<ConceptId> seeds;
        const std::size_t n_seeds = 1 + rng() % 3;
        for (std::size_t i = 0; i < n_seeds; ++i)
            seeds.push_back(static_cast<ConceptId>(rng() % kg.num_concepts()));
        const std::size_t hops = 1 + rng() % 3;
        const Subgraph sg = extract_subgraph(seeds, kg, {hops, 0});
        const auto [nodes, edges] = oracle::expand(kg, seeds, hops);
        CHECK(std::set<ConceptId>(sg.nodes.begin(), sg.nodes.end()) == nodes);
        CHECK(sg.nodes.size() == nodes.size());
        CHECK(sg.edges == edges);
    }
}

TEST_CASE("subgraph extraction is monotone in hops and idempotent at closure") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 30; ++trial) {
        const KnowledgeGraph kg = oracle::random_graph(rng, 2 + rng() % 30, rng() % 60, 3);
        const std::vector<ConceptId> seeds{static_cast<ConceptId>(rng() % kg.num_concepts())};
        std::size_t prev = 0;
        for (std::size_t h = 0; h < 5; ++h) {
            const auto sg = extract_subgraph(seeds, kg, {h, 0});
            CHECK(sg.size() >= prev);
            prev = sg.size();
        }
    }
}

TEST_CASE("tsv round trip keeps the fingerprint") {
    const auto kg = parse_kg("a\tr\tb\nliving_room\ts\tb\n");
    std::ostringstream out;
    kg.write_tsv(out);
    const auto back = parse_kg(out.str());
    CHECK(back.fingerprint() == kg.fingerprint());
    CHECK(back.triples() == kg.triples());
}
