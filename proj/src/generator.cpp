#include "mokge/generator.hpp"

#include <cmath>
#include <stdexcept>

namespace mokge {

ExpertMode parse_expert_mode(const std::string& name) {
    if (name == "embed")
        return ExpertMode::Embed;
    if (name == "prompt")
        return ExpertMode::Prompt;
    throw std::invalid_argument("unknown expert mode '" + name + "' (expected embed|prompt)");
}

std::string to_string(ExpertMode mode) { return mode == ExpertMode::Embed ? "embed" : "prompt"; }

Tensor sinusoidal_positions(std::size_t max_len, std::size_t dim) {
    Tensor t = Tensor::zeros({max_len, dim});
    auto data = t.mutable_data();
    for (std::size_t pos = 0; pos < max_len; ++pos) {
        for (std::size_t i = 0; i < dim; i += 2) {
            const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(dim));
            data[pos * dim + i] = std::sin(static_cast<double>(pos) * freq);
            if (i + 1 < dim)
                data[pos * dim + i + 1] = std::cos(static_cast<double>(pos) * freq);
        }
    }
    return t;
}

namespace {

AttentionParams make_attention(std::size_t d, std::mt19937_64& rng) {
    return {glorot_tensor(d, d, rng), Tensor::zeros({d}), glorot_tensor(d, d, rng),
            Tensor::zeros({d}),       glorot_tensor(d, d, rng), Tensor::zeros({d}),
            glorot_tensor(d, d, rng), Tensor::zeros({d})};
}

void register_attention(ParameterSet& params, const std::string& p, const AttentionParams& a) {
    params.add(p + "wq", a.wq);
    params.add(p + "bq", a.bq);
    params.add(p + "wk", a.wk);
    params.add(p + "bk", a.bk);
    params.add(p + "wv", a.wv);
    params.add(p + "bv", a.bv);
    params.add(p + "wo", a.wo);
    params.add(p + "bo", a.bo);
}

}  // namespace

Generator::Generator(GeneratorConfig config, std::size_t vocab_size, std::mt19937_64& rng)
    : config_(config), vocab_size_(vocab_size) {
    const std::size_t d = config_.d_model;
    if (config_.heads == 0 || d % config_.heads != 0)
        throw std::invalid_argument("head count must divide d_model");
    if (config_.num_experts == 0)
        throw std::invalid_argument("generator needs at least one expert");
    if (config_.expert_mode == ExpertMode::Prompt && config_.num_experts > 1 &&
        vocab_size_ < Vocab::kFirstExpert + config_.num_experts)
        throw std::invalid_argument("vocabulary lacks expert prefix tokens");
    embed_scale_ = std::sqrt(static_cast<double>(d));
    token_table_ = normal_tensor({vocab_size_, d}, 1.0 / embed_scale_, rng);
    expert_table_ = normal_tensor({config_.num_experts, d}, config_.expert_init_std / embed_scale_, rng);
    positions_ = sinusoidal_positions(config_.max_len, d);
    for (std::size_t l = 0; l < config_.encoder_layers; ++l) {
        EncoderLayerParams p;
        p.ln1_gain = constant_tensor({d}, 1.0);
        p.ln1_bias = Tensor::zeros({d});
        p.self_attn = make_attention(d, rng);
        p.ln2_gain = constant_tensor({d}, 1.0);
        p.ln2_bias = Tensor::zeros({d});
        p.ff1 = glorot_tensor(d, config_.ffn, rng);
        p.ff1_bias = Tensor::zeros({config_.ffn});
        p.ff2 = glorot_tensor(config_.ffn, d, rng);
        p.ff2_bias = Tensor::zeros({d});
        encoder_.push_back(std::move(p));
    }
    for (std::size_t l = 0; l < config_.decoder_layers; ++l) {
        DecoderLayerParams p;
        p.ln1_gain = constant_tensor({d}, 1.0);
        p.ln1_bias = Tensor::zeros({d});
        p.self_attn = make_attention(d, rng);
        p.ln2_gain = constant_tensor({d}, 1.0);
        p.ln2_bias = Tensor::zeros({d});
        p.cross_attn = make_attention(d, rng);
        p.ln3_gain = constant_tensor({d}, 1.0);
        p.ln3_bias = Tensor::zeros({d});
        p.ff1 = glorot_tensor(d, config_.ffn, rng);
        p.ff1_bias = Tensor::zeros({config_.ffn});
        p.ff2 = glorot_tensor(config_.ffn, d, rng);
        p.ff2_bias = Tensor::zeros({d});
        decoder_.push_back(std::move(p));
    }
    enc_ln_gain_ = constant_tensor({d}, 1.0);
    enc_ln_bias_ = Tensor::zeros({d});
    dec_ln_gain_ = constant_tensor({d}, 1.0);
    dec_ln_bias_ = Tensor::zeros({d});
    out_bias_ = Tensor::zeros({vocab_size_});
}

void Generator::register_parameters(ParameterSet& params, const std::string& prefix) const {
    params.add(prefix + "token_embeddings", token_table_);
    params.add(prefix + "expert_embeddings", expert_table_);
    for (std::size_t l = 0; l < encoder_.size(); ++l) {
        const auto& p = encoder_[l];
        const std::string lp = prefix + "encoder" + std::to_string(l) + ".";
        params.add(lp + "ln1_gain", p.ln1_gain);
        params.add(lp + "ln1_bias", p.ln1_bias);
        register_attention(params, lp + "self_attn.", p.self_attn);
        params.add(lp + "ln2_gain", p.ln2_gain);
        params.add(lp + "ln2_bias", p.ln2_bias);
        params.add(lp + "ff1", p.ff1);
        params.add(lp + "ff1_bias", p.ff1_bias);
        params.add(lp + "ff2", p.ff2);
        params.add(lp + "ff2_bias", p.ff2_bias);
    }
    for (std::size_t l = 0; l < decoder_.size(); ++l) {
        const auto& p = decoder_[l];
        const std::string lp = prefix + "decoder" + std::to_string(l) + ".";
        params.add(lp + "ln1_gain", p.ln1_gain);
        params.add(lp + "ln1_bias", p.ln1_bias);
        register_attention(params, lp + "self_attn.", p.self_attn);
        params.add(lp + "ln2_gain", p.ln2_gain);
        params.add(lp + "ln2_bias", p.ln2_bias);
        register_attention(params, lp + "cross_attn.", p.cross_attn);
        params.add(lp + "ln3_gain", p.ln3_gain);
        params.add(lp + "ln3_bias", p.ln3_bias);
        params.add(lp + "ff1", p.ff1);
        params.add(lp + "ff1_bias", p.ff1_bias);
        params.add(lp + "ff2", p.ff2);
        params.add(lp + "ff2_bias", p.ff2_bias);
    }
    params.add(prefix + "encoder_ln_gain", enc_ln_gain_);
    params.add(prefix + "encoder_ln_bias", enc_ln_bias_);
    params.add(prefix + "decoder_ln_gain", dec_ln_gain_);
    params.add(prefix + "decoder_ln_bias", dec_ln_bias_);
    params.add(prefix + "output_bias", out_bias_);
}

void Generator::check_tokens(std::span<const TokenId> ids) const {
    for (TokenId id : ids)
        if (id >= vocab_size_)
            throw std::out_of_range("token id " + std::to_string(id) + " >= vocabulary size " +
                                    std::to_string(vocab_size_));
}

Tensor Generator::embed_positions(std::span<const TokenId> ids) const {
    if (ids.size() > config_.max_len)
        throw std::length_error("sequence of " + std::to_string(ids.size()) +
                                " tokens exceeds max length " + std::to_string(config_.max_len));
    check_tokens(ids);
    std::vector<std::size_t> positions(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i)
        positions[i] = i;
    return add(scale(embedding_lookup(token_table_, ids), embed_scale_),
               embedding_lookup(positions_, positions));
}

Tensor Generator::attention(const AttentionParams& p, const Tensor& query, const Tensor& keys,
                            bool causal) const {
    const std::size_t d = config_.d_model, heads = config_.heads, dh = d / heads;
    Tensor q = add_row(matmul(query, p.wq), p.bq);
    Tensor k = add_row(matmul(keys, p.wk), p.bk);
    Tensor v = add_row(matmul(keys, p.wv), p.bv);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Tensor> outs;
    outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        Tensor qh = slice_cols(q, h * dh, dh);
        Tensor kh = slice_cols(k, h * dh, dh);
        Tensor vh = slice_cols(v, h * dh, dh);
        Tensor weights = softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt), causal);
        outs.push_back(matmul(weights, vh));
    }
    Tensor merged = heads == 1 ? outs.front() : concat_cols(outs);
    return add_row(matmul(merged, p.wo), p.bo);
}

Tensor Generator::feed_forward(const Tensor& x, const Tensor& w1, const Tensor& b1,
                               const Tensor& w2, const Tensor& b2) const {
    return add_row(matmul(relu(add_row(matmul(x, w1), b1)), w2), b2);
}

Tensor Generator::encode(const GeneratorInput& input) const {
    const bool conditioned = config_.num_experts > 1;
    if (conditioned && (!input.expert || *input.expert >= config_.num_experts))
        throw std::out_of_range("invalid expert id for generator with " +
                                std::to_string(config_.num_experts) + " experts");
    std::vector<Tensor> parts;
    if (conditioned && config_.expert_mode == ExpertMode::Prompt) {
        const TokenId prefix = Vocab::kFirstExpert + *input.expert;
        parts.push_back(scale(embedding_lookup(token_table_, std::span<const TokenId>(&prefix, 1)),
                              embed_scale_));
    }
    if (!input.tokens.empty())
        parts.push_back(embed_positions(input.tokens));
    if (!input.concepts.empty()) {
        std::vector<std::size_t> flat, owner;
        std::vector<double> weight;
        for (std::size_t c = 0; c < input.concepts.size(); ++c) {
            const auto& toks = input.concepts[c];
            if (toks.empty())
                throw std::invalid_argument("concept without tokens");
            check_tokens(toks);
            for (TokenId t : toks) {
                flat.push_back(t);
                owner.push_back(c);
                weight.push_back(embed_scale_ / static_cast<double>(toks.size()));
            }
        }
        parts.push_back(scatter_add_rows(embedding_lookup(token_table_, flat), owner, weight,
                                         input.concepts.size()));
    }
    if (parts.empty())
        throw std::invalid_argument("generator input is empty");
    Tensor h = parts.size() == 1 ? parts.front() : concat_rows(parts);
    if (conditioned && config_.expert_mode == ExpertMode::Embed) {
        const std::size_t z = *input.expert;
        h = add_row(h, scale(embedding_lookup(expert_table_, std::span<const std::size_t>(&z, 1)),
                             embed_scale_));
    }
    for (const auto& layer : encoder_) {
        Tensor n1 = layer_norm(h, layer.ln1_gain, layer.ln1_bias);
        h = add(h, attention(layer.self_attn, n1, n1, false));
        Tensor n2 = layer_norm(h, layer.ln2_gain, layer.ln2_bias);
        h = add(h, feed_forward(n2, layer.ff1, layer.ff1_bias, layer.ff2, layer.ff2_bias));
    }
    return layer_norm(h, enc_ln_gain_, enc_ln_bias_);
}

Tensor Generator::decode_logits(const Tensor& memory, std::span<const TokenId> prefix) const {
    if (prefix.empty())
        throw std::invalid_argument("decoder prefix must start with BOS");
    Tensor h = embed_positions(prefix);
    for (const auto& layer : decoder_) {
        Tensor n1 = layer_norm(h, layer.ln1_gain, layer.ln1_bias);
        h = add(h, attention(layer.self_attn, n1, n1, true));
        Tensor n2 = layer_norm(h, layer.ln2_gain, layer.ln2_bias);
        h = add(h, attention(layer.cross_attn, n2, memory, false));
        Tensor n3 = layer_norm(h, layer.ln3_gain, layer.ln3_bias);
        h = add(h, feed_forward(n3, layer.ff1, layer.ff1_bias, layer.ff2, layer.ff2_bias));
    }
    h = layer_norm(h, dec_ln_gain_, dec_ln_bias_);
    return add_row(matmul_nt(h, token_table_), out_bias_);
}

Tensor Generator::loss_from_memory(const Tensor& memory, std::span<const TokenId> target) const {
    if (target.empty())
        throw std::invalid_argument("generation target is empty");
    if (target.back() != Vocab::kEos)
        throw std::invalid_argument("generation target must end with EOS");
    if (target.size() == 1)
        throw std::invalid_argument("generation target has no tokens before EOS");
    std::vector<TokenId> decoder_input;
    decoder_input.reserve(target.size());
    decoder_input.push_back(Vocab::kBos);
    decoder_input.insert(decoder_input.end(), target.begin(), target.end() - 1);
    return softmax_cross_entropy(decode_logits(memory, decoder_input), target);
}

Tensor Generator::loss(const GeneratorInput& input, std::span<const TokenId> target) const {
    return loss_from_memory(encode(input), target);
}

std::vector<double> Generator::next_token_dist(const Tensor& memory,
                                               std::span<const TokenId> prefix) const {
    if (prefix.size() > config_.max_len)
        throw std::length_error("decoder prefix of " + std::to_string(prefix.size()) +
                                " tokens exceeds max length " + std::to_string(config_.max_len));
    Tensor logits = decode_logits(memory, prefix);
    const std::size_t v = logits.cols();
    auto all = logits.data();
    return softmax(all.subspan((prefix.size() - 1) * v, v));
}

}  // namespace mokge
