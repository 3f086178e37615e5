#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <json.hpp>

#include "mokge/concept_selector.hpp"
#include "mokge/generator.hpp"
#include "mokge/graph_encoder.hpp"
#include "mokge/kg.hpp"
#include "mokge/optim.hpp"
#include "mokge/vocab.hpp"

namespace mokge {

struct ModelConfig {
    std::size_t num_experts = 3;
    ExpertMode expert_mode = ExpertMode::Embed;
    RgcnConfig rgcn;
    GeneratorConfig generator;
    double selector_expert_init_std = 0.5;

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

/// All trainable state: R-GCN, concept selector and generator. The knowledge
/// graph and vocabulary are borrowed and must outlive the model.
class MokgeModel {
  public:
    MokgeModel(const ModelConfig& config, const KnowledgeGraph& kg, const Vocab& vocab,
               std::uint64_t init_seed);
    MokgeModel(const MokgeModel&) = delete;
    MokgeModel& operator=(const MokgeModel&) = delete;

    const ModelConfig& config() const { return config_; }
    const KnowledgeGraph& kg() const { return *kg_; }
    const Vocab& vocab() const { return *vocab_; }
    std::size_t num_experts() const { return config_.num_experts; }

    GraphEncoder& encoder() { return *encoder_; }
    const GraphEncoder& encoder() const { return *encoder_; }
    ConceptSelector& selector() { return *selector_; }
    const ConceptSelector& selector() const { return *selector_; }
    Generator& generator() { return *generator_; }
    const Generator& generator() const { return *generator_; }

    ParameterSet& parameters() { return params_; }
    const ParameterSet& parameters() const { return params_; }

    /// Vocabulary ids of a concept's surface tokens (UNK when unseen).
    const std::vector<TokenId>& concept_token_ids(ConceptId c) const;

  private:
    ModelConfig config_;
    const KnowledgeGraph* kg_;
    const Vocab* vocab_;
    std::unique_ptr<GraphEncoder> encoder_;
    std::unique_ptr<ConceptSelector> selector_;
    std::unique_ptr<Generator> generator_;
    ParameterSet params_;
    std::vector<std::vector<TokenId>> concept_tokens_;
};

/// Splitmix-derived child seed for a named random stream.
std::uint64_t derive_seed(std::uint64_t base, std::string_view stream);

}  // namespace mokge
