#include "mokge/concept_selector.hpp"

#include <algorithm>
#include <numeric>

namespace mokge {

std::size_t ConceptLabels::positives() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

ConceptSelector::ConceptSelector(std::size_t dim, std::size_t num_experts, double expert_init_std,
                                 std::mt19937_64& rng)
    : num_experts_(num_experts) {
    if (num_experts_ == 0)
        throw std::invalid_argument("ConceptSelector needs at least one expert");
    w1_ = glorot_tensor(dim, dim, rng);
    b1_ = Tensor::zeros({dim});
    w2_ = glorot_tensor(dim, 1, rng);
    b2_ = Tensor::zeros({1});
    expert_ = normal_tensor({num_experts_, dim}, expert_init_std, rng);
}

void ConceptSelector::register_parameters(ParameterSet& params, const std::string& prefix) const {
    params.add(prefix + "hidden_weight", w1_);
    params.add(prefix + "hidden_bias", b1_);
    params.add(prefix + "output_weight", w2_);
    params.add(prefix + "output_bias", b2_);
    params.add(prefix + "expert_embeddings", expert_);
}

Tensor ConceptSelector::score(const Tensor& node_states, std::optional<std::size_t> expert) const {
    Tensor h = node_states;
    if (num_experts_ > 1) {
        if (!expert || *expert >= num_experts_)
            throw std::out_of_range("ConceptSelector: invalid expert id");
        const std::size_t z = *expert;
        h = add_row(h, embedding_lookup(expert_, std::span<const std::size_t>(&z, 1)));
    }
    Tensor hidden = relu(add_row(matmul(h, w1_), b1_));
    return sigmoid(add_row(matmul(hidden, w2_), b2_));
}

ConceptLabels build_labels(const Subgraph& sg, std::span<const ConceptId> reference_concepts) {
    ConceptLabels out;
    out.labels.reserve(sg.nodes.size());
    for (ConceptId c : sg.nodes)
        out.labels.push_back(std::find(reference_concepts.begin(), reference_concepts.end(), c) !=
                                     reference_concepts.end()
                                 ? 1
                                 : 0);
    return out;
}

ConceptLabels build_labels(const Subgraph& sg, std::string_view reference,
                           const KnowledgeGraph& kg) {
    return build_labels(sg, kg.ground(reference));
}

Tensor concept_loss(const Tensor& probs, const ConceptLabels& labels) {
    return binary_cross_entropy(probs, labels.labels);
}

std::vector<std::size_t> top_n(std::span<const double> probs, std::span<const ConceptId> node_ids,
                               std::size_t n, std::span<const ConceptId> forbidden) {
    if (probs.size() != node_ids.size())
        throw DimensionError("top_n: " + std::to_string(probs.size()) + " scores for " +
                             std::to_string(node_ids.size()) + " nodes");
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < probs.size(); ++i)
        if (std::find(forbidden.begin(), forbidden.end(), node_ids[i]) == forbidden.end())
            order.push_back(i);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (probs[a] != probs[b])
            return probs[a] > probs[b];
        return node_ids[a] < node_ids[b];
    });
    if (order.size() > n)
        order.resize(n);
    return order;
}

}  // namespace mokge
