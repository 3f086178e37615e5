#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "mokge/kg.hpp"
#include "mokge/optim.hpp"
#include "mokge/tensor.hpp"

namespace mokge {

/// 0/1 label per subgraph node (Subgraph::nodes order); positives are the
/// nodes grounded in the reference text.
struct ConceptLabels {
    std::vector<int> labels;

    std::size_t positives() const;
};

/// Two-layer MLP (d -> d -> 1, ReLU then sigmoid) over final node states.
/// With more than one expert, expert z's vector is added to every node state
/// before the MLP so each expert ranks concepts differently.
class ConceptSelector {
  public:
    ConceptSelector(std::size_t dim, std::size_t num_experts, double expert_init_std,
                    std::mt19937_64& rng);

    void register_parameters(ParameterSet& params, const std::string& prefix) const;

    /// p_v for every row of node_states -> [n, 1].
    Tensor score(const Tensor& node_states, std::optional<std::size_t> expert = std::nullopt) const;

    std::size_t num_experts() const { return num_experts_; }
    Tensor& hidden_weight() { return w1_; }
    Tensor& hidden_bias() { return b1_; }
    Tensor& output_weight() { return w2_; }
    Tensor& output_bias() { return b2_; }
    Tensor& expert_embeddings() { return expert_; }

  private:
    std::size_t num_experts_;
    Tensor w1_, b1_, w2_, b2_;
    Tensor expert_;  // [K, d]
};

ConceptLabels build_labels(const Subgraph& sg, std::span<const ConceptId> reference_concepts);
ConceptLabels build_labels(const Subgraph& sg, std::string_view reference,
                           const KnowledgeGraph& kg);

/// Mean clipped binary cross-entropy over the subgraph nodes.
Tensor concept_loss(const Tensor& probs, const ConceptLabels& labels);

/// Local indices of the n highest-scoring nodes not in `forbidden`
/// (concept ids), ties broken by ascending concept id.
std::vector<std::size_t> top_n(std::span<const double> probs, std::span<const ConceptId> node_ids,
                               std::size_t n, std::span<const ConceptId> forbidden = {});

}  // namespace mokge
