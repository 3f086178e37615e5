#include "mokge/model.hpp"

#include <random>

namespace mokge {

nlohmann::json ModelConfig::to_json() const {
    return {
        {"num_experts", num_experts},
        {"expert_mode", to_string(expert_mode)},
        {"rgcn_dim", rgcn.dim},
        {"rgcn_layers", rgcn.layers},
        {"d_model", generator.d_model},
        {"heads", generator.heads},
        {"ffn", generator.ffn},
        {"encoder_layers", generator.encoder_layers},
        {"decoder_layers", generator.decoder_layers},
        {"max_len", generator.max_len},
        {"expert_init_std", generator.expert_init_std},
        {"selector_expert_init_std", selector_expert_init_std},
    };
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.num_experts = j.at("num_experts").get<std::size_t>();
    c.expert_mode = parse_expert_mode(j.at("expert_mode").get<std::string>());
    c.rgcn.dim = j.at("rgcn_dim").get<std::size_t>();
    c.rgcn.layers = j.at("rgcn_layers").get<std::size_t>();
    c.generator.d_model = j.at("d_model").get<std::size_t>();
    c.generator.heads = j.at("heads").get<std::size_t>();
    c.generator.ffn = j.at("ffn").get<std::size_t>();
    c.generator.encoder_layers = j.at("encoder_layers").get<std::size_t>();
    c.generator.decoder_layers = j.at("decoder_layers").get<std::size_t>();
    c.generator.max_len = j.at("max_len").get<std::size_t>();
    c.generator.expert_init_std = j.at("expert_init_std").get<double>();
    c.selector_expert_init_std = j.at("selector_expert_init_std").get<double>();
    return c;
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view stream) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : stream) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (h | 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

MokgeModel::MokgeModel(const ModelConfig& config, const KnowledgeGraph& kg, const Vocab& vocab,
                       std::uint64_t init_seed)
    : config_(config), kg_(&kg), vocab_(&vocab) {
    if (config_.num_experts == 0)
        throw std::invalid_argument("model needs at least one expert");
    config_.generator.num_experts = config_.num_experts;
    config_.generator.expert_mode = config_.expert_mode;
    std::mt19937_64 rng(derive_seed(init_seed, "init"));
    encoder_ = std::make_unique<GraphEncoder>(config_.rgcn, kg.num_concepts(), kg.num_relations(), rng);
    selector_ = std::make_unique<ConceptSelector>(config_.rgcn.dim, config_.num_experts,
                                                  config_.selector_expert_init_std, rng);
    generator_ = std::make_unique<Generator>(config_.generator, vocab.size(), rng);
    encoder_->register_parameters(params_, "rgcn.");
    selector_->register_parameters(params_, "selector.");
    generator_->register_parameters(params_, "generator.");

    concept_tokens_.reserve(kg.num_concepts());
    for (ConceptId c = 0; c < kg.num_concepts(); ++c) {
        std::vector<TokenId> ids;
        for (const auto& tok : kg.concept_tokens(c))
            ids.push_back(vocab.id(tok));
        if (ids.empty())
            ids.push_back(Vocab::kUnk);
        concept_tokens_.push_back(std::move(ids));
    }
}

const std::vector<TokenId>& MokgeModel::concept_token_ids(ConceptId c) const {
    return concept_tokens_.at(c);
}

}  // namespace mokge
