#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "mokge/kg.hpp"
#include "mokge/optim.hpp"
#include "mokge/tensor.hpp"

namespace mokge {

struct RgcnConfig {
    std::size_t dim = 64;
    std::size_t layers = 2;
};

/// Per-layer states: node rows follow Subgraph::nodes; relation rows are the
/// R forward relations followed by their R inverses.
struct NodeStates {
    Tensor nodes;
    Tensor relations;
};

/// TransE-style composition phi(h_u, h_r) = h_u - h_r.
std::vector<double> compose(std::span<const double> h_u, std::span<const double> h_r);

/// Message list of a subgraph. Each triple (h,r,t) sends h->t with relation r
/// and t->h with the inverse relation r+R; weight is 1/|N(dst)|.
struct MessageIndex {
    std::size_t num_nodes = 0;
    std::vector<std::size_t> src;
    std::vector<std::size_t> dst;
    std::vector<std::size_t> relation;
    std::vector<double> weight;
};

MessageIndex build_message_index(const Subgraph& sg, std::size_t num_relations);

struct RgcnLayerParams {
    Tensor w_neighbor;  // W_N, applied to row vectors: h @ W
    Tensor w_self;      // W_S
    Tensor w_relation;  // W_R
};

/// h_v' = ReLU(mean_{(u,v,r)} phi(h_u, h_r) W_N + h_v W_S);  h_r' = h_r W_R.
/// A node without incoming messages aggregates to zero.
NodeStates rgcn_layer(const NodeStates& states, const MessageIndex& index,
                      const RgcnLayerParams& params);

class GraphEncoder {
  public:
    GraphEncoder(RgcnConfig config, std::size_t num_concepts, std::size_t num_relations,
                 std::mt19937_64& rng);

    void register_parameters(ParameterSet& params, const std::string& prefix) const;

    NodeStates initial_states(const Subgraph& sg) const;
    NodeStates encode(const Subgraph& sg) const;
    NodeStates encode(const Subgraph& sg, const MessageIndex& index) const;

    const RgcnConfig& config() const { return config_; }
    std::size_t num_relations() const { return num_relations_; }
    Tensor& node_embeddings() { return node_table_; }
    Tensor& relation_embeddings() { return relation_table_; }
    RgcnLayerParams& layer(std::size_t l) { return layers_.at(l); }

  private:
    RgcnConfig config_;
    std::size_t num_relations_;
    Tensor node_table_;      // [num_concepts, d]
    Tensor relation_table_;  // [2 * num_relations, d]
    std::vector<RgcnLayerParams> layers_;
};

}  // namespace mokge
