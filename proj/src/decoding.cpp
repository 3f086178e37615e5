#include "mokge/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace mokge {

namespace {

std::vector<TokenId> with_bos(std::span<const TokenId> tokens) {
    std::vector<TokenId> prefix{Vocab::kBos};
    prefix.insert(prefix.end(), tokens.begin(), tokens.end());
    return prefix;
}

std::size_t argmax(std::span<const double> probs) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i)
        if (probs[i] > probs[best])
            best = i;
    return best;
}

// ids sorted by probability, descending, lower id first on ties
std::vector<std::size_t> ranked(std::span<const double> probs) {
    std::vector<std::size_t> ids(probs.size());
    std::iota(ids.begin(), ids.end(), 0);
    std::stable_sort(ids.begin(), ids.end(),
                     [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
    return ids;
}

template <typename Pick>
std::vector<TokenId> sample_loop(const NextTokenFn& next, std::size_t max_len, Pick&& pick) {
    std::vector<TokenId> out;
    while (out.size() < max_len) {
        const std::vector<double> probs = next(with_bos(out));
        const TokenId t = pick(probs);
        out.push_back(t);
        if (t == Vocab::kEos)
            break;
    }
    return out;
}

}  // namespace

std::vector<TokenId> greedy_decode(const NextTokenFn& next, std::size_t max_len) {
    return sample_loop(next, max_len, [](const std::vector<double>& p) { return argmax(p); });
}

std::vector<Hypothesis> beam_search(const NextTokenFn& next, const BeamOptions& options) {
    if (options.beam == 0)
        throw std::invalid_argument("beam width must be at least 1");
    struct Candidate {
        double log_prob;
        std::size_t parent;
        TokenId token;
    };
    const auto finalize = [&](Hypothesis h) {
        h.score = options.length_normalize && !h.tokens.empty()
                      ? h.log_prob / static_cast<double>(h.tokens.size())
                      : h.log_prob;
        return h;
    };

    std::vector<Hypothesis> live{Hypothesis{}};
    std::vector<Hypothesis> finished;
    for (std::size_t step = 0; step < options.max_len && !live.empty(); ++step) {
        std::vector<Candidate> cands;
        for (std::size_t i = 0; i < live.size(); ++i) {
            const std::vector<double> probs = next(with_bos(live[i].tokens));
            for (std::size_t v = 0; v < probs.size(); ++v)
                if (probs[v] > 0.0)
                    cands.push_back({live[i].log_prob + std::log(probs[v]), i, v});
        }
        const std::size_t width = std::min(options.beam - finished.size(), cands.size());
        std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(width),
                          cands.end(), [](const Candidate& a, const Candidate& b) {
                              if (a.log_prob != b.log_prob)
                                  return a.log_prob > b.log_prob;
                              if (a.parent != b.parent)
                                  return a.parent < b.parent;
                              return a.token < b.token;
                          });
        std::vector<Hypothesis> next_live;
        for (std::size_t c = 0; c < width; ++c) {
            Hypothesis h;
            h.tokens = live[cands[c].parent].tokens;
            h.tokens.push_back(cands[c].token);
            h.log_prob = cands[c].log_prob;
            if (cands[c].token == Vocab::kEos)
                finished.push_back(finalize(std::move(h)));
            else
                next_live.push_back(std::move(h));
        }
        live = std::move(next_live);
        if (finished.size() >= options.beam)
            break;
    }
    for (auto& h : live)
        finished.push_back(finalize(std::move(h)));

    std::stable_sort(finished.begin(), finished.end(),
                     [](const Hypothesis& a, const Hypothesis& b) { return a.score > b.score; });
    if (finished.size() > options.num_return)
        finished.resize(options.num_return);
    return finished;
}

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<std::size_t> top_k_set(std::span<const double> probs, std::size_t k) {
    if (k == 0)
        throw std::invalid_argument("top-k needs k >= 1");
    std::vector<std::size_t> ids = ranked(probs);
    if (ids.size() > k)
        ids.resize(k);
    return ids;
}

std::vector<std::size_t> nucleus_set(std::span<const double> probs, double p) {
    if (!(p > 0.0 && p <= 1.0))
        throw std::invalid_argument("nucleus p must be in (0, 1]");
    std::vector<std::size_t> ids = ranked(probs);
    double mass = 0.0;
    std::size_t keep = 0;
    while (keep < ids.size()) {
        mass += probs[ids[keep++]];
        if (mass >= p)
            break;
    }
    ids.resize(keep);
    return ids;
}

std::vector<double> restrict_distribution(std::span<const double> probs,
                                          std::span<const std::size_t> keep) {
    std::vector<double> out(probs.size(), 0.0);
    double mass = 0.0;
    for (std::size_t i : keep)
        mass += probs[i];
    if (!(mass > 0.0))
        throw std::invalid_argument("restricted distribution has no mass");
    for (std::size_t i : keep)
        out[i] = probs[i] / mass;
    return out;
}

std::size_t sample_index(std::span<const double> probs, std::mt19937_64& rng) {
    const double u = uniform01(rng);
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] <= 0.0)
            continue;
        acc += probs[i];
        last = i;
        if (u < acc)
            return i;
    }
    return last;  // rounding left u above the final sum
}

std::vector<TokenId> sample_top_k(const NextTokenFn& next, std::size_t k, std::size_t max_len,
                                  std::mt19937_64& rng) {
    return sample_loop(next, max_len, [&](const std::vector<double>& p) {
        return sample_index(restrict_distribution(p, top_k_set(p, k)), rng);
    });
}

std::vector<TokenId> sample_nucleus(const NextTokenFn& next, double p, std::size_t max_len,
                                    std::mt19937_64& rng) {
    return sample_loop(next, max_len, [&](const std::vector<double>& probs) {
        return sample_index(restrict_distribution(probs, nucleus_set(probs, p)), rng);
    });
}

// ---------------------------------------------------------------------------

Strategy parse_strategy(const std::string& name) {
    if (name == "moe" || name == "mokge")
        return Strategy::Moe;
    if (name == "beam")
        return Strategy::Beam;
    if (name == "top_k" || name == "topk")
        return Strategy::TopK;
    if (name == "nucleus" || name == "top_p")
        return Strategy::Nucleus;
    throw std::invalid_argument("unknown decoding strategy '" + name +
                                "' (expected moe|beam|top_k|nucleus)");
}

std::string to_string(Strategy s) {
    switch (s) {
    case Strategy::Moe: return "moe";
    case Strategy::Beam: return "beam";
    case Strategy::TopK: return "top_k";
    case Strategy::Nucleus: return "nucleus";
    }
    return "moe";
}

namespace {

struct Conditioned {
    Tensor memory;
    ConceptSelection selection;
};

Conditioned condition(const MokgeModel& model, const PreparedExample& ex, std::size_t expert,
                      std::size_t top_n, const NodeStates& states,
                      std::span<const ConceptId> forbidden) {
    Conditioned c;
    if (ex.subgraph.size() > 0)
        c.selection = select_concepts(model.selector().score(states.nodes, expert), ex.subgraph,
                                      top_n, forbidden);
    c.memory = model.generator().encode(make_generator_input(model, ex, c.selection, expert));
    return c;
}

NextTokenFn next_fn(const MokgeModel& model, const Tensor& memory) {
    return [&model, memory](std::span<const TokenId> prefix) {
        return model.generator().next_token_dist(memory, prefix);
    };
}

Generation make_generation(const MokgeModel& model, std::vector<TokenId> tokens,
                           std::optional<std::size_t> expert, const ConceptSelection& sel) {
    Generation g;
    g.text = model.vocab().decode(tokens);
    g.tokens = std::move(tokens);
    g.expert = expert;
    g.concepts = sel.concepts;
    return g;
}

std::vector<std::uint64_t> draw_seeds(const DecodeConfig& cfg, const PreparedExample& ex) {
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < cfg.k; ++i)
        seeds.push_back(derive_seed(cfg.seed, "sample/" + ex.id + "/" + std::to_string(i)));
    return seeds;
}

}  // namespace

std::vector<Generation> decode_moe(const MokgeModel& model, const PreparedExample& ex,
                                   const DecodeConfig& cfg) {
    if (cfg.k != model.num_experts())
        throw std::invalid_argument("MoKGE decoding yields one output per expert: k = " +
                                    std::to_string(cfg.k) + " but the model has " +
                                    std::to_string(model.num_experts()) + " experts");
    NoGradGuard no_grad;
    const NodeStates states = model.encoder().encode(ex.subgraph, ex.messages);
    std::vector<Generation> out;
    std::vector<ConceptId> taken;
    for (std::size_t z = 0; z < model.num_experts(); ++z) {
        const Conditioned c =
            condition(model, ex, z, cfg.top_n, states,
                      cfg.disjoint_rule ? std::span<const ConceptId>(taken) : std::span<const ConceptId>());
        if (cfg.disjoint_rule) {
            for (ConceptId id : c.selection.concepts)
                if (std::find(taken.begin(), taken.end(), id) != taken.end())
                    throw std::logic_error("disjoint rule violated for input " + ex.id);
            taken.insert(taken.end(), c.selection.concepts.begin(), c.selection.concepts.end());
        }
        out.push_back(make_generation(model, greedy_decode(next_fn(model, c.memory), cfg.max_len),
                                      z, c.selection));
    }
    return out;
}

std::vector<Generation> decode_beam(const MokgeModel& model, const PreparedExample& ex,
                                    const DecodeConfig& cfg) {
    NoGradGuard no_grad;
    const NodeStates states = model.encoder().encode(ex.subgraph, ex.messages);
    const Conditioned c = condition(model, ex, 0, cfg.top_n, states, {});
    BeamOptions opts;
    opts.beam = cfg.k;
    opts.num_return = cfg.k;
    opts.max_len = cfg.max_len;
    opts.length_normalize = cfg.length_normalize;
    std::vector<Generation> out;
    for (auto& h : beam_search(next_fn(model, c.memory), opts))
        out.push_back(make_generation(model, std::move(h.tokens), std::nullopt, c.selection));
    return out;
}

std::vector<Generation> decode_top_k(const MokgeModel& model, const PreparedExample& ex,
                                     const DecodeConfig& cfg) {
    NoGradGuard no_grad;
    const NodeStates states = model.encoder().encode(ex.subgraph, ex.messages);
    const Conditioned c = condition(model, ex, 0, cfg.top_n, states, {});
    const NextTokenFn next = next_fn(model, c.memory);
    std::vector<Generation> out;
    for (std::uint64_t seed : draw_seeds(cfg, ex)) {
        std::mt19937_64 rng(seed);
        out.push_back(make_generation(model, sample_top_k(next, cfg.top_k, cfg.max_len, rng),
                                      std::nullopt, c.selection));
    }
    return out;
}

std::vector<Generation> decode_nucleus(const MokgeModel& model, const PreparedExample& ex,
                                       const DecodeConfig& cfg) {
    NoGradGuard no_grad;
    const NodeStates states = model.encoder().encode(ex.subgraph, ex.messages);
    const Conditioned c = condition(model, ex, 0, cfg.top_n, states, {});
    const NextTokenFn next = next_fn(model, c.memory);
    std::vector<Generation> out;
    for (std::uint64_t seed : draw_seeds(cfg, ex)) {
        std::mt19937_64 rng(seed);
        out.push_back(make_generation(model, sample_nucleus(next, cfg.top_p, cfg.max_len, rng),
                                      std::nullopt, c.selection));
    }
    return out;
}

std::vector<Generation> decode(const MokgeModel& model, const PreparedExample& ex,
                               const DecodeConfig& cfg) {
    if (cfg.k == 0)
        throw std::invalid_argument("k must be at least 1");
    switch (cfg.strategy) {
    case Strategy::Moe: return decode_moe(model, ex, cfg);
    case Strategy::Beam: return decode_beam(model, ex, cfg);
    case Strategy::TopK: return decode_top_k(model, ex, cfg);
    case Strategy::Nucleus: return decode_nucleus(model, ex, cfg);
    }
    throw std::logic_error("unhandled strategy");
}

// ---------------------------------------------------------------------------

nlohmann::json GenerationRecord::to_json() const {
    return {{"id", id},
            {"strategy", strategy},
            {"expert", expert ? nlohmann::json(*expert) : nlohmann::json()},
            {"output", output},
            {"concepts", concepts}};
}

GenerationRecord GenerationRecord::from_json(const nlohmann::json& j) {
    GenerationRecord r;
    r.id = j.at("id").get<std::string>();
    r.strategy = j.at("strategy").get<std::string>();
    if (j.contains("expert") && !j.at("expert").is_null())
        r.expert = j.at("expert").get<std::size_t>();
    r.output = j.at("output").get<std::string>();
    if (j.contains("concepts"))
        r.concepts = j.at("concepts").get<std::vector<std::string>>();
    return r;
}

std::vector<GenerationRecord> to_records(const std::string& id, Strategy strategy,
                                         std::span<const Generation> outputs,
                                         const KnowledgeGraph& kg) {
    std::vector<GenerationRecord> out;
    for (const auto& g : outputs) {
        GenerationRecord r;
        r.id = id;
        r.strategy = to_string(strategy);
        r.expert = g.expert;
        r.output = g.text;
        for (ConceptId c : g.concepts)
            r.concepts.push_back(kg.concept_name(c));
        out.push_back(std::move(r));
    }
    return out;
}

void write_generations(std::ostream& out, std::span<const GenerationRecord> records) {
    for (const auto& r : records)
        out << r.to_json().dump() << '\n';
}

std::vector<GenerationRecord> read_generations(std::istream& in) {
    std::vector<GenerationRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos)
            continue;
        try {
            out.push_back(GenerationRecord::from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("invalid generation record: ") + e.what(), lineno);
        }
    }
    return out;
}

}  // namespace mokge
