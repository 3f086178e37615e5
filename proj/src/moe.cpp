#include "mokge/moe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace mokge {

void TrainConfig::validate() const {
    if (num_experts == 0)
        throw std::invalid_argument("num_experts must be at least 1");
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument("lambda must be a finite non-negative number");
    if (top_n == 0)
        throw std::invalid_argument("top_n must be at least 1");
    if (!(lr >= 0.0))
        throw std::invalid_argument("learning rate must be non-negative");
    if (batch_size == 0)
        throw std::invalid_argument("batch_size must be at least 1");
    if (!use_moe && num_experts != 1)
        throw std::invalid_argument("a run without MoE needs num_experts = 1");
}

nlohmann::json TrainConfig::to_json() const {
    nlohmann::json j = {
        {"num_experts", num_experts},
        {"lambda", lambda},
        {"top_n", top_n},
        {"lr", lr},
        {"batch_size", batch_size},
        {"epochs", epochs},
        {"seed", seed},
        {"expert_mode", to_string(expert_mode)},
        {"disjoint_rule", disjoint_rule},
        {"weight_decay", weight_decay},
        {"use_moe", use_moe},
        {"hops", subgraph.hops},
        {"max_nodes", subgraph.max_nodes},
    };
    j["warmup_steps"] = warmup_steps ? nlohmann::json(*warmup_steps) : nlohmann::json();
    return j;
}

PreparedExample prepare_example(const Example& ex, const KnowledgeGraph& kg, const Vocab& vocab,
                                const SubgraphOptions& options) {
    PreparedExample out;
    out.id = ex.id;
    out.input = vocab.encode(ex.input);
    out.input_concepts = kg.ground(ex.input);
    out.subgraph = extract_subgraph(out.input_concepts, kg, options);
    out.messages = build_message_index(out.subgraph, kg.num_relations());
    for (const auto& ref : ex.references) {
        PreparedReference pr;
        pr.text = ref;
        pr.target = vocab.encode(ref);
        pr.target.push_back(Vocab::kEos);
        pr.labels = build_labels(out.subgraph, ref, kg);
        out.references.push_back(std::move(pr));
    }
    return out;
}

std::vector<PreparedExample> prepare_dataset(std::span<const Example> examples,
                                             const KnowledgeGraph& kg, const Vocab& vocab,
                                             const SubgraphOptions& options) {
    std::vector<PreparedExample> out;
    out.reserve(examples.size());
    for (const auto& ex : examples)
        out.push_back(prepare_example(ex, kg, vocab, options));
    return out;
}

ConceptSelection select_concepts(const Tensor& probs, const Subgraph& sg, std::size_t n,
                                 std::span<const ConceptId> forbidden) {
    ConceptSelection sel;
    if (sg.size() == 0)
        return sel;
    sel.local = top_n(probs.data(), sg.nodes, n, forbidden);
    for (std::size_t i : sel.local)
        sel.concepts.push_back(sg.nodes[i]);
    return sel;
}

GeneratorInput make_generator_input(const MokgeModel& model, const PreparedExample& ex,
                                    const ConceptSelection& selection,
                                    std::optional<std::size_t> expert) {
    GeneratorInput in;
    in.tokens = ex.input;
    for (ConceptId c : selection.concepts)
        in.concepts.push_back(model.concept_token_ids(c));
    in.expert = expert;
    return in;
}

JointLoss joint_loss(const MokgeModel& model, const PreparedExample& ex, std::size_t reference,
                     std::size_t expert, const TrainConfig& cfg,
                     std::span<const ConceptId> forbidden) {
    const NodeStates states = model.encoder().encode(ex.subgraph, ex.messages);
    return joint_loss(model, ex, states, reference, expert, cfg, forbidden);
}

JointLoss joint_loss(const MokgeModel& model, const PreparedExample& ex, const NodeStates& states,
                     std::size_t reference, std::size_t expert, const TrainConfig& cfg,
                     std::span<const ConceptId> forbidden) {
    const PreparedReference& ref = ex.references.at(reference);
    if (expert >= model.num_experts())
        throw std::out_of_range("expert " + std::to_string(expert) + " out of range");
    JointLoss out;
    if (ex.subgraph.size() == 0) {
        out.concept_term = Tensor::scalar(0.0);
    } else {
        const Tensor probs = model.selector().score(states.nodes, expert);
        out.concept_term = concept_loss(probs, ref.labels);
        out.selection = select_concepts(probs, ex.subgraph, cfg.top_n, forbidden);
    }
    const GeneratorInput input = make_generator_input(model, ex, out.selection, expert);
    out.generation = model.generator().loss(input, ref.target);
    out.total = combine_losses(out.generation, out.concept_term, cfg.lambda);
    return out;
}

Tensor combine_losses(const Tensor& generation, const Tensor& concept_term, double lambda) {
    if (lambda == 0.0)
        return generation;
    return add(generation, scale(concept_term, lambda));
}

Responsibility assign_responsibility(std::span<const double> losses) {
    if (losses.empty())
        throw std::invalid_argument("assign_responsibility: no experts");
    Responsibility r;
    r.losses.assign(losses.begin(), losses.end());
    for (std::size_t z = 1; z < losses.size(); ++z)
        if (losses[z] < losses[r.expert])
            r.expert = z;
    r.r.assign(losses.size(), 0);
    r.r[r.expert] = 1;
    return r;
}

Responsibility e_step(const MokgeModel& model, const PreparedExample& ex, std::size_t reference,
                      const TrainConfig& cfg) {
    NoGradGuard no_grad;
    const NodeStates states = model.encoder().encode(ex.subgraph, ex.messages);
    std::vector<double> losses;
    std::vector<std::vector<ConceptId>> forbidden_for;
    std::vector<ConceptId> taken;
    for (std::size_t z = 0; z < model.num_experts(); ++z) {
        forbidden_for.push_back(cfg.disjoint_rule ? taken : std::vector<ConceptId>{});
        const JointLoss jl = joint_loss(model, ex, states, reference, z, cfg, forbidden_for.back());
        losses.push_back(jl.total.item());
        if (cfg.disjoint_rule)
            taken.insert(taken.end(), jl.selection.concepts.begin(), jl.selection.concepts.end());
    }
    Responsibility r = assign_responsibility(losses);
    r.forbidden = std::move(forbidden_for[r.expert]);
    return r;
}

double m_step(MokgeModel& model, Adam& optimizer, std::span<const EmUnit> batch,
              const TrainConfig& cfg, double lr_scale) {
    if (batch.empty())
        throw std::invalid_argument("m_step: empty batch");
    model.parameters().zero_grad();
    Tape tape;
    Tensor total;
    for (const EmUnit& u : batch) {
        const JointLoss jl = joint_loss(model, *u.example, u.reference, u.expert, cfg, u.forbidden);
        total = total.defined() ? add(total, jl.total) : jl.total;
    }
    total = scale(total, 1.0 / static_cast<double>(batch.size()));
    const double value = total.item();
    if (!std::isfinite(value))
        throw std::runtime_error("non-finite training loss at optimizer step " +
                                 std::to_string(optimizer.steps() + 1));
    tape.backward(total);
    optimizer.step(lr_scale);
    model.parameters().zero_grad();
    return value;
}

nlohmann::json StepLog::to_json() const {
    return {{"epoch", epoch},
            {"step", step},
            {"expert_histogram", expert_histogram},
            {"mean_loss", mean_loss},
            {"responsibilities", responsibilities}};
}

TrainResult train(MokgeModel& model, std::span<const PreparedExample> data, const TrainConfig& cfg,
                  const StepCallback& on_step) {
    cfg.validate();
    if (cfg.num_experts != model.num_experts())
        throw std::invalid_argument("train: config has " + std::to_string(cfg.num_experts) +
                                    " experts but the model has " +
                                    std::to_string(model.num_experts()));
    if (cfg.num_experts > 1 && cfg.expert_mode != model.config().expert_mode)
        throw std::invalid_argument("train: expert mode differs from the model's");

    std::vector<std::pair<std::size_t, std::size_t>> units;
    for (std::size_t i = 0; i < data.size(); ++i)
        for (std::size_t j = 0; j < data[i].references.size(); ++j)
            units.emplace_back(i, j);
    if (units.empty())
        throw std::invalid_argument("train: no training references");

    const std::size_t per_epoch = (units.size() + cfg.batch_size - 1) / cfg.batch_size;
    TrainResult result;
    result.total_steps = per_epoch * cfg.epochs;
    const std::size_t warmup =
        cfg.warmup_steps.value_or(std::min<std::size_t>(1000, result.total_steps / 10));

    AdamConfig adam;
    adam.lr = cfg.lr;
    adam.weight_decay = cfg.weight_decay;
    Adam optimizer(model.parameters(), adam);
    std::mt19937_64 rng(derive_seed(cfg.seed, "shuffle"));

    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<std::size_t> order(units.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            StepLog log;
            log.epoch = epoch;
            log.step = step;
            log.expert_histogram.assign(cfg.num_experts, 0);
            std::vector<EmUnit> batch;
            for (std::size_t k = start; k < end; ++k) {
                const auto [i, j] = units[order[k]];
                EmUnit u{&data[i], j, 0, {}};
                if (cfg.use_moe) {
                    Responsibility r = e_step(model, data[i], j, cfg);
                    u.expert = r.expert;
                    u.forbidden = std::move(r.forbidden);
                    log.responsibilities.push_back(std::move(r.r));
                } else {
                    log.responsibilities.push_back({1});
                }
                ++log.expert_histogram[u.expert];
                batch.push_back(std::move(u));
            }
            log.mean_loss =
                m_step(model, optimizer, batch, cfg, warmup_linear_decay(step, warmup, result.total_steps));
            ++step;
            if (on_step)
                on_step(log);
            result.log.push_back(std::move(log));
        }
    }
    return result;
}

}  // namespace mokge
