#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "mokge/generator.hpp"
#include "support.hpp"

using namespace mokge;

namespace {

GeneratorConfig small_config(std::size_t experts = 1, ExpertMode mode = ExpertMode::Embed) {
    GeneratorConfig c;
    c.d_model = 8;
    c.heads = 2;
    c.ffn = 16;
    c.encoder_layers = 1;
    c.decoder_layers = 1;
    c.max_len = 16;
    c.num_experts = experts;
    c.expert_mode = mode;
    return c;
}

GeneratorInput sample_input(std::optional<std::size_t> expert = std::nullopt) {
    return {{8, 9, 10}, {{11}, {12, 13}}, expert};
}

}  // namespace

TEST_CASE("prompt mode adds one memory row for the expert token") {
    std::mt19937_64 rng(1);
    Generator g(small_config(3, ExpertMode::Prompt), 20, rng);
    const Tensor m = g.encode(sample_input(1));
    CHECK(m.rows() == 3 + 2 + 1);
    Generator e(small_config(3, ExpertMode::Embed), 20, rng);
    CHECK(e.encode(sample_input(1)).rows() == 3 + 2);
}

TEST_CASE("a zero output head is uniform over the vocabulary") {
    std::mt19937_64 rng(2);
    Generator g(small_config(), 100, rng);
    for (double& v : g.token_embeddings().mutable_data())
        v = 0.0;
    const std::vector<TokenId> target{20, 30, Vocab::kEos};
    CHECK(g.loss(sample_input(), target).item() == doctest::Approx(std::log(100.0)).epsilon(1e-12));
}

TEST_CASE("targets must end with EOS and carry content") {
    std::mt19937_64 rng(3);
    Generator g(small_config(), 20, rng);
    CHECK_THROWS(g.loss(sample_input(), std::vector<TokenId>{}));
    CHECK_THROWS(g.loss(sample_input(), std::vector<TokenId>{5, 6}));
    CHECK_THROWS(g.loss(sample_input(), std::vector<TokenId>{Vocab::kEos}));
}

TEST_CASE("experts are required exactly when there are several") {
    std::mt19937_64 rng(4);
    Generator g(small_config(2), 20, rng);
    CHECK_THROWS_AS(g.encode(sample_input()), std::out_of_range);
    CHECK_THROWS_AS(g.encode(sample_input(2)), std::out_of_range);
    const Tensor m0 = g.encode(sample_input(0));
    const Tensor m1 = g.encode(sample_input(1));
    CHECK(m0.data()[0] != m1.data()[0]);
}

TEST_CASE("concept order does not matter") {
    std::mt19937_64 rng(5);
    Generator g(small_config(), 20, rng);
    GeneratorInput a = sample_input();
    GeneratorInput b = a;
    std::swap(b.concepts[0], b.concepts[1]);
    const std::vector<TokenId> target{14, 15, Vocab::kEos};
    CHECK(std::abs(g.loss(a, target).item() - g.loss(b, target).item()) < 1e-12);
}

TEST_CASE("decoder is causal") {
    std::mt19937_64 rng(6);
    Generator g(small_config(), 20, rng);
    const Tensor memory = g.encode(sample_input());
    const std::vector<TokenId> p1{Vocab::kBos, 5, 6, 7};
    const std::vector<TokenId> p2{Vocab::kBos, 5, 9, 12};
    const Tensor l1 = g.decode_logits(memory, p1);
    const Tensor l2 = g.decode_logits(memory, p2);
    for (std::size_t k = 0; k < 20; ++k) {
        CHECK(l1.at(0, k) == l2.at(0, k));
        CHECK(l1.at(1, k) == l2.at(1, k));
    }
    CHECK(l1.at(2, 0) != l2.at(2, 0));
}

TEST_CASE("next-token distributions reproduce the sequence loss") {
    std::mt19937_64 rng(7);
    Generator g(small_config(), 20, rng);
    const GeneratorInput in = sample_input();
    const Tensor memory = g.encode(in);
    const std::vector<TokenId> target{14, 3, 15, 16, Vocab::kEos};
    std::vector<TokenId> prefix{Vocab::kBos};
    double nll = 0.0;
    for (TokenId t : target) {
        const auto p = g.next_token_dist(memory, prefix);
        CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-12);
        nll -= std::log(p[t]);
        prefix.push_back(t);
    }
    CHECK(nll / static_cast<double>(target.size()) ==
          doctest::Approx(g.loss(in, target).item()).epsilon(1e-12));
}

TEST_CASE("prefixes longer than max_len are rejected") {
    std::mt19937_64 rng(8);
    Generator g(small_config(), 20, rng);
    const Tensor memory = g.encode(sample_input());
    std::vector<TokenId> prefix(17, 5);
    prefix[0] = Vocab::kBos;
    CHECK_THROWS_AS(g.next_token_dist(memory, prefix), std::length_error);
}

TEST_CASE("a single pair can be memorized") {
    std::mt19937_64 rng(9);
    GeneratorConfig cfg = small_config();
    cfg.d_model = 16;
    cfg.ffn = 32;
    Generator g(cfg, 24, rng);
    ParameterSet params;
    g.register_parameters(params, "");
    AdamConfig ac;
    ac.lr = 1e-2;
    Adam opt(params, ac);
    const GeneratorInput in = sample_input();
    const std::vector<TokenId> target{14, 15, 16, 17, Vocab::kEos};
    double last = 0.0;
    for (int step = 0; step < 200; ++step) {
        params.zero_grad();
        Tape tape;
        const Tensor l = g.loss(in, target);
        last = l.item();
        tape.backward(l);
        opt.step();
    }
    CHECK(last < 0.01);
}

TEST_CASE("generator gradients match finite differences") {
    for (ExpertMode mode : {ExpertMode::Embed, ExpertMode::Prompt}) {
        std::mt19937_64 rng(10);
        Generator g(small_config(2, mode), 20, rng);
        ParameterSet params;
        g.register_parameters(params, "");
        const GeneratorInput in = sample_input(1);
        const std::vector<TokenId> target{14, 15, Vocab::kEos};
        const auto loss = [&] { return g.loss(in, target); };
        for (auto& [name, t] : params) {
            const auto r = testing_support::check_gradient(loss, t, 20, 11);
            INFO(name << " mode " << to_string(mode));
            if (name.ends_with("attn.bk"))
                CHECK(r.max_abs_grad < 1e-12);  // softmax ignores a shift shared by all keys
            else
                CHECK(r.max_rel_err < 1e-4);
        }
    }
}
