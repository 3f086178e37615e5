#include <doctest.h>

#include <random>
#include <sstream>

#include "mokge/graph_encoder.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mokge;

namespace {

Tensor identity(std::size_t d) {
    Tensor t = Tensor::zeros({d, d});
    for (std::size_t i = 0; i < d; ++i)
        t.mutable_data()[i * d + i] = 1.0;
    return t;
}

RgcnLayerParams identity_layer(std::size_t d) { return {identity(d), identity(d), identity(d)}; }

std::vector<double> row(const Tensor& t, std::size_t r) {
    const auto d = t.data();
    return {d.begin() + static_cast<long>(r * t.cols()), d.begin() + static_cast<long>((r + 1) * t.cols())};
}

std::vector<double> relu_vec(std::vector<double> v) {
    for (auto& x : v)
        x = std::max(0.0, x);
    return v;
}

// Straight loops over the edge list: mean of (h_u - h_r) W_N over incoming
// messages plus h_v W_S, then ReLU.
std::vector<std::vector<double>> naive_layer(const std::vector<std::vector<double>>& h,
                                             const std::vector<std::vector<double>>& rel,
                                             const std::vector<Triple>& edges,
                                             const std::vector<std::size_t>& local,  // concept -> row
                                             std::size_t num_relations, const RgcnLayerParams& p) {
    const std::size_t n = h.size(), d = h[0].size();
    const auto times = [&](const std::vector<double>& v, const Tensor& w) {
        std::vector<double> out(d, 0.0);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j)
                out[j] += v[i] * w.at(i, j);
        return out;
    };
    std::vector<std::vector<std::vector<double>>> incoming(n);
    for (const auto& e : edges) {
        const std::size_t hu = local[e.head], tv = local[e.tail];
        std::vector<double> fwd(d), back(d);
        for (std::size_t k = 0; k < d; ++k) {
            fwd[k] = h[hu][k] - rel[e.relation][k];
            back[k] = h[tv][k] - rel[e.relation + num_relations][k];
        }
        incoming[tv].push_back(fwd);
        incoming[hu].push_back(back);
    }
    std::vector<std::vector<double>> out;
    for (std::size_t v = 0; v < n; ++v) {
        std::vector<double> acc = times(h[v], p.w_self);
        for (const auto& m : incoming[v]) {
            const auto t = times(m, p.w_neighbor);
            for (std::size_t k = 0; k < d; ++k)
                acc[k] += t[k] / static_cast<double>(incoming[v].size());
        }
        out.push_back(relu_vec(acc));
    }
    return out;
}

}  // namespace

TEST_CASE("compose subtracts the relation") {
    const std::vector<double> hu{3, 1}, hr{1, 4};
    CHECK(compose(hu, hr) == std::vector<double>{2, -3});
    const std::vector<double> bad{1};
    CHECK_THROWS_AS(compose(hu, bad), DimensionError);
}

TEST_CASE("an isolated node with identity self weight is ReLU of itself") {
    NodeStates s{Tensor::from_data({1, 3}, {0.5, -1.0, 2.0}), Tensor::zeros({2, 3})};
    MessageIndex idx;
    idx.num_nodes = 1;
    const auto out = rgcn_layer(s, idx, identity_layer(3));
    CHECK(row(out.nodes, 0) == std::vector<double>{0.5, 0.0, 2.0});
}

TEST_CASE("one neighbor with a zero relation adds its state") {
    KnowledgeGraph kg;
    kg.add_triple("u", "r", "v");
    const std::vector<ConceptId> seeds{0};
    const Subgraph sg = extract_subgraph(seeds, kg);
    const auto idx = build_message_index(sg, kg.num_relations());
    NodeStates s{Tensor::from_data({2, 2}, {1.0, -3.0, 0.5, 1.0}), Tensor::zeros({2, 2})};
    const auto out = rgcn_layer(s, idx, identity_layer(2));
    const std::size_t v = *sg.local_index(1), u = *sg.local_index(0);
    CHECK(row(out.nodes, v) == std::vector<double>{1.5, 0.0});  // ReLU(h_u + h_v)
    CHECK(row(out.nodes, u) == std::vector<double>{1.5, 0.0});  // reverse message
}

TEST_CASE("two equal neighbors average to one") {
    KnowledgeGraph kg;
    kg.add_triple("a", "r", "v");
    kg.add_triple("b", "r", "v");
    const std::vector<ConceptId> seeds{*kg.find_concept("v")};
    const Subgraph sg = extract_subgraph(seeds, kg);
    const auto idx = build_message_index(sg, kg.num_relations());
    std::vector<double> h(3 * 2, 0.0);
    const std::size_t v = *sg.local_index(seeds[0]);
    for (ConceptId c : {*kg.find_concept("a"), *kg.find_concept("b")}) {
        h[*sg.local_index(c) * 2] = 2.0;
        h[*sg.local_index(c) * 2 + 1] = -1.0;
    }
    h[v * 2] = 1.0;
    h[v * 2 + 1] = 0.5;
    NodeStates s{Tensor::from_data({3, 2}, h), Tensor::zeros({2, 2})};
    const auto out = rgcn_layer(s, idx, identity_layer(2));
    CHECK(row(out.nodes, v)[0] == doctest::Approx(3.0));
    CHECK(row(out.nodes, v)[1] == 0.0);  // ReLU(-1 + 0.5)
}

TEST_CASE("zero layers return the raw embeddings") {
    std::mt19937_64 rng(1);
    KnowledgeGraph kg;
    kg.add_triple("a", "r", "b");
    GraphEncoder enc({4, 0}, kg.num_concepts(), kg.num_relations(), rng);
    const std::vector<ConceptId> seeds{0};
    const Subgraph sg = extract_subgraph(seeds, kg);
    const auto states = enc.encode(sg);
    for (std::size_t i = 0; i < sg.size(); ++i)
        for (std::size_t k = 0; k < 4; ++k)
            CHECK(states.nodes.at(i, k) == enc.node_embeddings().at(sg.nodes[i], k));
}

TEST_CASE("layer output matches a loop-based reference on random graphs") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const auto kg = oracle::random_graph(rng, 2 + rng() % 12, 1 + rng() % 25, 3);
        const std::vector<ConceptId> seeds{static_cast<ConceptId>(rng() % kg.num_concepts())};
        const Subgraph sg = extract_subgraph(seeds, kg);
        const std::size_t d = 3, n = sg.size(), R = kg.num_relations();
        const auto idx = build_message_index(sg, R);
        NodeStates s{testing_support::random_tensor({n, d}, rng, 1.0, false),
                     testing_support::random_tensor({2 * R, d}, rng, 1.0, false)};
        RgcnLayerParams p{testing_support::random_tensor({d, d}, rng, 1.0, false),
                          testing_support::random_tensor({d, d}, rng, 1.0, false),
                          testing_support::random_tensor({d, d}, rng, 1.0, false)};
        std::vector<std::vector<double>> h, rel;
        for (std::size_t i = 0; i < n; ++i)
            h.push_back(row(s.nodes, i));
        for (std::size_t i = 0; i < 2 * R; ++i)
            rel.push_back(row(s.relations, i));
        std::vector<std::size_t> local(kg.num_concepts(), 0);
        for (std::size_t i = 0; i < n; ++i)
            local[sg.nodes[i]] = i;
        const auto expected = naive_layer(h, rel, sg.edges, local, R, p);
        const auto out = rgcn_layer(s, idx, p);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < d; ++k)
                CHECK(out.nodes.at(i, k) == doctest::Approx(expected[i][k]).epsilon(1e-12));
    }
}

TEST_CASE("R-GCN gradients match finite differences") {
    std::mt19937_64 rng(31);
    const auto kg = oracle::random_graph(rng, 10, 25, 3);
    GraphEncoder enc({6, 2}, kg.num_concepts(), kg.num_relations(), rng);
    // larger embeddings keep ReLUs away from their kinks
    for (double& v : enc.node_embeddings().mutable_data())
        v *= 20.0;
    for (double& v : enc.relation_embeddings().mutable_data())
        v *= 20.0;
    ParameterSet params;
    enc.register_parameters(params, "");
    const std::vector<ConceptId> seeds{0, 1};
    const Subgraph sg = extract_subgraph(seeds, kg);
    const Tensor w = testing_support::random_tensor({sg.size(), 6}, rng, 1.0, false);
    const auto loss = [&] { return sum(mul(enc.encode(sg).nodes, w)); };
    for (auto& [name, t] : params) {
        const auto r = testing_support::check_gradient(loss, t, 20, 5);
        INFO(name);
        CHECK(r.max_rel_err < 1e-4);
    }
}
