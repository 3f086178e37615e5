#include "mokge/graph_encoder.hpp"

#include <stdexcept>

namespace mokge {

std::vector<double> compose(std::span<const double> h_u, std::span<const double> h_r) {
    if (h_u.size() != h_r.size())
        throw DimensionError("compose: dimension mismatch " + std::to_string(h_u.size()) +
                             " vs " + std::to_string(h_r.size()));
    std::vector<double> out(h_u.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = h_u[i] - h_r[i];
    return out;
}

MessageIndex build_message_index(const Subgraph& sg, std::size_t num_relations) {
    MessageIndex index;
    index.num_nodes = sg.nodes.size();
    auto local = [&](ConceptId c) {
        auto pos = sg.local_index(c);
        if (!pos)
            throw std::invalid_argument("subgraph edge endpoint outside node set");
        return *pos;
    };
    std::vector<std::size_t> in_degree(index.num_nodes, 0);
    for (const Triple& t : sg.edges) {
        if (t.relation >= num_relations)
            throw std::out_of_range("relation id beyond encoder table");
        const std::size_t h = local(t.head), tl = local(t.tail);
        index.src.push_back(h);
        index.dst.push_back(tl);
        index.relation.push_back(t.relation);
        index.src.push_back(tl);
        index.dst.push_back(h);
        index.relation.push_back(t.relation + num_relations);
        ++in_degree[tl];
        ++in_degree[h];
    }
    index.weight.resize(index.dst.size());
    for (std::size_t i = 0; i < index.dst.size(); ++i)
        index.weight[i] = 1.0 / static_cast<double>(in_degree[index.dst[i]]);
    return index;
}

NodeStates rgcn_layer(const NodeStates& states, const MessageIndex& index,
                      const RgcnLayerParams& params) {
    const std::size_t n = states.nodes.rows();
    if (n != index.num_nodes)
        throw DimensionError("rgcn_layer: states cover " + std::to_string(n) +
                             " nodes, message index " + std::to_string(index.num_nodes));
    Tensor self = matmul(states.nodes, params.w_self);
    Tensor pre = self;
    if (!index.src.empty()) {
        Tensor messages = sub(embedding_lookup(states.nodes, index.src),
                              embedding_lookup(states.relations, index.relation));
        Tensor transformed = matmul(messages, params.w_neighbor);
        pre = add(scatter_add_rows(transformed, index.dst, index.weight, n), self);
    }
    return {relu(pre), matmul(states.relations, params.w_relation)};
}

GraphEncoder::GraphEncoder(RgcnConfig config, std::size_t num_concepts, std::size_t num_relations,
                           std::mt19937_64& rng)
    : config_(config), num_relations_(num_relations) {
    const std::size_t d = config_.dim;
    node_table_ = uniform_tensor({std::max<std::size_t>(num_concepts, 1), d}, 0.05, rng);
    relation_table_ = uniform_tensor({std::max<std::size_t>(2 * num_relations, 1), d}, 0.05, rng);
    for (std::size_t l = 0; l < config_.layers; ++l) {
        RgcnLayerParams p;
        p.w_neighbor = glorot_tensor(d, d, rng);
        p.w_self = glorot_tensor(d, d, rng);
        p.w_relation = glorot_tensor(d, d, rng);
        layers_.push_back(std::move(p));
    }
}

void GraphEncoder::register_parameters(ParameterSet& params, const std::string& prefix) const {
    params.add(prefix + "node_embeddings", node_table_);
    params.add(prefix + "relation_embeddings", relation_table_);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const std::string lp = prefix + "layer" + std::to_string(l) + ".";
        params.add(lp + "w_neighbor", layers_[l].w_neighbor);
        params.add(lp + "w_self", layers_[l].w_self);
        params.add(lp + "w_relation", layers_[l].w_relation);
    }
}

NodeStates GraphEncoder::initial_states(const Subgraph& sg) const {
    std::vector<std::size_t> ids(sg.nodes.begin(), sg.nodes.end());
    return {embedding_lookup(node_table_, ids), relation_table_};
}

NodeStates GraphEncoder::encode(const Subgraph& sg) const {
    return encode(sg, build_message_index(sg, num_relations_));
}

NodeStates GraphEncoder::encode(const Subgraph& sg, const MessageIndex& index) const {
    NodeStates states = initial_states(sg);
    for (const auto& layer : layers_)
        states = rgcn_layer(states, index, layer);
    return states;
}

}  // namespace mokge
