// Command-line front end: train, generate, evaluate, subgraph, synth.

#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mokge/pipeline.hpp"
#include "mokge/synthetic.hpp"

namespace {

struct RunFlags {
    std::string config;
    std::vector<std::string> sets;
    std::map<std::string, std::string> direct;
};

// Options shared by train/generate/evaluate. Each named flag is a shorthand
// for one config key.
void add_run_flags(CLI::App* cmd, RunFlags& flags) {
    cmd->add_option("-c,--config", flags.config, "key = value config file")->check(CLI::ExistingFile);
    cmd->add_option("-s,--set", flags.sets, "override one option, key=value (repeatable)");
    const std::vector<std::pair<std::string, std::string>> shorthands{
        {"--dataset", "dataset"},       {"--eval-dataset", "eval_dataset"},
        {"--kg", "kg"},                 {"--out", "output_dir"},
        {"--experts", "num_experts"},   {"--epochs", "epochs"},
        {"--seed", "seed"},             {"--strategy", "strategy"},
        {"--k", "k"},                   {"--top-n", "top_n"},
        {"--checkpoint", "checkpoint"}, {"--generations", "generations"},
        {"--report", "report"},
    };
    for (const auto& [flag, key] : shorthands)
        cmd->add_option_function<std::string>(
            flag, [&flags, key = key](const std::string& v) { flags.direct[key] = v; },
            "sets '" + key + "'");
}

mokge::RunConfig resolve(const RunFlags& flags) {
    std::map<std::string, std::string> values;
    if (!flags.config.empty()) {
        std::ifstream in(flags.config);
        values = mokge::parse_config(in);
    }
    for (const auto& [k, v] : flags.direct)
        values[k] = v;
    for (const auto& kv : flags.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        values[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    mokge::RunConfig cfg;
    mokge::apply_config(cfg, values);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MoKGE: mixture of knowledge-graph experts for diverse generation"};
    app.require_subcommand(1);

    RunFlags train_flags, gen_flags, eval_flags;
    auto* train = app.add_subcommand("train", "train a model and save the checkpoint");
    add_run_flags(train, train_flags);
    auto* generate = app.add_subcommand("generate", "decode K outputs per input");
    add_run_flags(generate, gen_flags);
    auto* evaluate = app.add_subcommand("evaluate", "score a generation file");
    add_run_flags(evaluate, eval_flags);

    std::string sg_kg, sg_text;
    mokge::SubgraphOptions sg_opts;
    auto* subgraph = app.add_subcommand("subgraph", "ground a text and print its subgraph as JSON");
    subgraph->add_option("--kg", sg_kg, "knowledge graph TSV")->required()->check(CLI::ExistingFile);
    subgraph->add_option("--text", sg_text, "input text")->required();
    subgraph->add_option("--hops", sg_opts.hops, "expansion rounds");
    subgraph->add_option("--max-nodes", sg_opts.max_nodes, "node cap (0 = none)");

    std::uint64_t syn_seed = 1;
    std::size_t syn_inputs = 50, syn_modes = 3, syn_kg_size = 0;
    std::string syn_out = "synthetic";
    auto* synth = app.add_subcommand("synth", "write a synthetic one-to-many task");
    synth->add_option("--seed", syn_seed, "random seed");
    synth->add_option("--inputs", syn_inputs, "number of inputs");
    synth->add_option("--modes", syn_modes, "references per input");
    synth->add_option("--kg-size", syn_kg_size, "total concepts (default: chains plus one distractor per input)");
    synth->add_option("--out", syn_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            const auto cfg = resolve(train_flags);
            const auto result = mokge::run_train(cfg);
            const double last = result.log.empty() ? 0.0 : result.log.back().mean_loss;
            std::cout << "trained " << result.total_steps << " steps, final loss " << last
                      << "\ncheckpoint: " << cfg.checkpoint_path().string() << '\n';
        } else if (*generate) {
            const auto cfg = resolve(gen_flags);
            const auto records = mokge::run_generate(cfg);
            std::cout << "wrote " << records.size() << " generations to "
                      << cfg.generations_path().string() << '\n';
        } else if (*evaluate) {
            const auto cfg = resolve(eval_flags);
            std::cout << mokge::format_report(mokge::run_evaluate(cfg));
        } else if (*subgraph) {
            const auto kg = mokge::KnowledgeGraph::load(sg_kg);
            const auto sg = mokge::extract_subgraph(kg.ground(sg_text), kg, sg_opts);
            std::cout << mokge::subgraph_to_json(sg, kg).dump(2) << '\n';
        } else if (*synth) {
            if (syn_kg_size == 0)
                syn_kg_size = syn_inputs * (2 + 2 * syn_modes);
            const auto task = mokge::make_synthetic_task(syn_seed, syn_inputs, syn_modes, syn_kg_size);
            std::filesystem::create_directories(syn_out);
            mokge::save_dataset(std::filesystem::path(syn_out) / "dataset.jsonl", task.dataset);
            std::ofstream kg_out(std::filesystem::path(syn_out) / "kg.tsv", std::ios::binary);
            task.kg.write_tsv(kg_out);
            std::cout << "wrote " << task.dataset.size() << " examples and "
                      << task.kg.triples().size() << " triples to " << syn_out << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
