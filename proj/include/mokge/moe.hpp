#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mokge/concept_selector.hpp"
#include "mokge/dataset.hpp"
#include "mokge/graph_encoder.hpp"
#include "mokge/model.hpp"

namespace mokge {

struct TrainConfig {
    std::size_t num_experts = 3;
    double lambda = 0.3;
    std::size_t top_n = 10;
    double lr = 1e-3;
    std::size_t batch_size = 8;
    std::size_t epochs = 30;
    std::uint64_t seed = 1234;
    /// Defaults to min(1000, total_steps / 10).
    std::optional<std::size_t> warmup_steps;
    ExpertMode expert_mode = ExpertMode::Embed;
    bool disjoint_rule = false;
    double weight_decay = 0.01;
    /// False trains a single plain model without any E-step.
    bool use_moe = true;
    SubgraphOptions subgraph;

    void validate() const;
    nlohmann::json to_json() const;
};

struct PreparedReference {
    std::string text;
    std::vector<TokenId> target;  // ends with EOS
    ConceptLabels labels;
};

/// An example with grounding, subgraph and labels computed once.
struct PreparedExample {
    std::string id;
    std::vector<TokenId> input;
    std::vector<ConceptId> input_concepts;
    Subgraph subgraph;
    MessageIndex messages;
    std::vector<PreparedReference> references;
};

PreparedExample prepare_example(const Example& ex, const KnowledgeGraph& kg, const Vocab& vocab,
                                const SubgraphOptions& options);
std::vector<PreparedExample> prepare_dataset(std::span<const Example> examples,
                                             const KnowledgeGraph& kg, const Vocab& vocab,
                                             const SubgraphOptions& options);

/// The top-N concepts one expert feeds to the generator.
struct ConceptSelection {
    std::vector<std::size_t> local;  // rows of the subgraph
    std::vector<ConceptId> concepts;
};

ConceptSelection select_concepts(const Tensor& probs, const Subgraph& sg, std::size_t n,
                                 std::span<const ConceptId> forbidden = {});

GeneratorInput make_generator_input(const MokgeModel& model, const PreparedExample& ex,
                                    const ConceptSelection& selection,
                                    std::optional<std::size_t> expert);

struct JointLoss {
    Tensor total;
    Tensor generation;
    Tensor concept_term;  // L_concept
    ConceptSelection selection;
};

/// generation + lambda * concept
Tensor combine_losses(const Tensor& generation, const Tensor& concept_term, double lambda);

/// L_generation + lambda * L_concept for one (example, reference, expert).
JointLoss joint_loss(const MokgeModel& model, const PreparedExample& ex, std::size_t reference,
                     std::size_t expert, const TrainConfig& cfg,
                     std::span<const ConceptId> forbidden = {});
/// Same, reusing final R-GCN states of the example.
JointLoss joint_loss(const MokgeModel& model, const PreparedExample& ex, const NodeStates& states,
                     std::size_t reference, std::size_t expert, const TrainConfig& cfg,
                     std::span<const ConceptId> forbidden = {});

struct Responsibility {
    std::size_t expert = 0;
    std::vector<int> r;               // one-hot
    std::vector<double> losses;       // joint loss per expert
    std::vector<ConceptId> forbidden;  // disjoint-rule exclusions for the chosen expert
};

/// Hard assignment: argmin of the joint losses, ties to the lowest id.
Responsibility assign_responsibility(std::span<const double> losses);

Responsibility e_step(const MokgeModel& model, const PreparedExample& ex, std::size_t reference,
                      const TrainConfig& cfg);

/// One EM unit: an (example, reference) pair with its assigned expert.
struct EmUnit {
    const PreparedExample* example = nullptr;
    std::size_t reference = 0;
    std::size_t expert = 0;
    std::vector<ConceptId> forbidden;
};

/// Backpropagates the mean joint loss of `batch` and applies one Adam step.
/// Returns the mean loss before the update. Throws on a non-finite loss.
double m_step(MokgeModel& model, Adam& optimizer, std::span<const EmUnit> batch,
              const TrainConfig& cfg, double lr_scale = 1.0);

struct StepLog {
    std::size_t epoch = 0;
    std::size_t step = 0;
    std::vector<std::size_t> expert_histogram;
    double mean_loss = 0.0;
    std::vector<std::vector<int>> responsibilities;

    nlohmann::json to_json() const;
};

struct TrainResult {
    std::vector<StepLog> log;
    std::size_t total_steps = 0;
};

using StepCallback = std::function<void(const StepLog&)>;

TrainResult train(MokgeModel& model, std::span<const PreparedExample> data, const TrainConfig& cfg,
                  const StepCallback& on_step = {});

}  // namespace mokge
