#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mokge/optim.hpp"
#include "mokge/tensor.hpp"
#include "mokge/vocab.hpp"

namespace mokge {

enum class ExpertMode { Embed, Prompt };

ExpertMode parse_expert_mode(const std::string& name);
std::string to_string(ExpertMode mode);

struct GeneratorConfig {
    std::size_t d_model = 64;
    std::size_t heads = 4;
    std::size_t ffn = 256;
    std::size_t encoder_layers = 2;
    std::size_t decoder_layers = 2;
    std::size_t max_len = 64;
    std::size_t num_experts = 1;
    ExpertMode expert_mode = ExpertMode::Embed;
    double expert_init_std = 0.5;
};

/// Generator conditioning for one (input, expert) pair. Concepts carry no
/// positional encoding; multiword concepts are mean-pooled.
struct GeneratorInput {
    std::vector<TokenId> tokens;
    std::vector<std::vector<TokenId>> concepts;
    std::optional<std::size_t> expert;
};

struct AttentionParams {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

struct EncoderLayerParams {
    Tensor ln1_gain, ln1_bias;
    AttentionParams self_attn;
    Tensor ln2_gain, ln2_bias;
    Tensor ff1, ff1_bias, ff2, ff2_bias;
};

struct DecoderLayerParams {
    Tensor ln1_gain, ln1_bias;
    AttentionParams self_attn;
    Tensor ln2_gain, ln2_bias;
    AttentionParams cross_attn;
    Tensor ln3_gain, ln3_bias;
    Tensor ff1, ff1_bias, ff2, ff2_bias;
};

/// Pre-norm transformer encoder-decoder. The output projection is tied to the
/// token embedding table (plus a free bias).
class Generator {
  public:
    Generator(GeneratorConfig config, std::size_t vocab_size, std::mt19937_64& rng);

    void register_parameters(ParameterSet& params, const std::string& prefix) const;

    /// Memory rows: [expert prefix (prompt mode)] + x + concepts.
    Tensor encode(const GeneratorInput& input) const;
    /// Logits [prefix.size(), V] for a decoder input beginning with BOS.
    Tensor decode_logits(const Tensor& memory, std::span<const TokenId> prefix) const;
    /// Teacher-forced mean token NLL; `target` must end with EOS.
    Tensor loss(const GeneratorInput& input, std::span<const TokenId> target) const;
    Tensor loss_from_memory(const Tensor& memory, std::span<const TokenId> target) const;
    /// p(y_t | memory, prefix) for a prefix beginning with BOS.
    std::vector<double> next_token_dist(const Tensor& memory, std::span<const TokenId> prefix) const;

    const GeneratorConfig& config() const { return config_; }
    std::size_t vocab_size() const { return vocab_size_; }
    Tensor& token_embeddings() { return token_table_; }
    Tensor& expert_embeddings() { return expert_table_; }
    Tensor& output_bias() { return out_bias_; }

  private:
    Tensor attention(const AttentionParams& p, const Tensor& query, const Tensor& keys,
                     bool causal) const;
    Tensor feed_forward(const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2,
                        const Tensor& b2) const;
    Tensor embed_positions(std::span<const TokenId> ids) const;
    void check_tokens(std::span<const TokenId> ids) const;

    GeneratorConfig config_;
    std::size_t vocab_size_;
    double embed_scale_;
    Tensor token_table_;   // [V, d]
    Tensor expert_table_;  // [K, d], embed mode
    Tensor positions_;     // [max_len, d], constant sinusoids
    std::vector<EncoderLayerParams> encoder_;
    std::vector<DecoderLayerParams> decoder_;
    Tensor enc_ln_gain_, enc_ln_bias_, dec_ln_gain_, dec_ln_bias_;
    Tensor out_bias_;
};

/// Standard sine/cosine position table.
Tensor sinusoidal_positions(std::size_t max_len, std::size_t dim);

}  // namespace mokge
