#pragma once

// Small end-to-end setups shared by the model-level tests.

#include <memory>

#include "mokge/pipeline.hpp"
#include "mokge/synthetic.hpp"

namespace fixtures {

inline mokge::ModelConfig tiny_model_config(std::size_t experts,
                                            mokge::ExpertMode mode = mokge::ExpertMode::Embed,
                                            std::size_t dim = 8) {
    mokge::ModelConfig c;
    c.num_experts = experts;
    c.expert_mode = mode;
    c.rgcn.dim = dim;
    c.rgcn.layers = 2;
    c.generator.d_model = dim;
    c.generator.heads = 2;
    c.generator.ffn = 2 * dim;
    c.generator.encoder_layers = 1;
    c.generator.decoder_layers = 1;
    c.generator.max_len = 24;
    return c;
}

struct Setup {
    mokge::SyntheticTask task;
    mokge::Vocab vocab;
    std::unique_ptr<mokge::MokgeModel> model;
    std::vector<mokge::PreparedExample> data;
    mokge::TrainConfig train;
};

/// Synthetic task with `modes` references per input and a fresh model.
inline std::unique_ptr<Setup> make_setup(std::size_t experts, std::size_t inputs = 4,
                                         std::size_t modes = 3, std::uint64_t seed = 1,
                                         mokge::ExpertMode mode = mokge::ExpertMode::Embed,
                                         std::size_t dim = 8) {
    auto s = std::make_unique<Setup>();
    s->task = mokge::make_synthetic_task(seed, inputs, modes, inputs * (2 + 2 * modes));
    s->vocab = mokge::build_vocab(s->task.dataset, s->task.kg, experts);
    s->model = std::make_unique<mokge::MokgeModel>(tiny_model_config(experts, mode, dim), s->task.kg,
                                                   s->vocab, seed);
    s->train.num_experts = experts;
    s->train.expert_mode = mode;
    s->train.top_n = 3;
    s->train.batch_size = 4;
    s->train.epochs = 1;
    s->train.seed = seed;
    s->data = mokge::prepare_dataset(s->task.dataset, s->task.kg, s->vocab, s->train.subgraph);
    return s;
}

}  // namespace fixtures
