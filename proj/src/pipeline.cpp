#include "mokge/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "mokge/checkpoint.hpp"

namespace mokge {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::size_t to_size(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    unsigned long long n = 0;
    try {
        if (!v.empty() && v.front() == '-')
            throw std::invalid_argument(v);
        n = std::stoull(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != v.size())
        throw std::invalid_argument("option '" + key + "' expects a non-negative integer, got '" +
                                    v + "'");
    return static_cast<std::size_t>(n);
}

double to_double(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != v.size())
        throw std::invalid_argument("option '" + key + "' expects a number, got '" + v + "'");
    return d;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on")
        return true;
    if (v == "false" || v == "0" || v == "no" || v == "off")
        return false;
    throw std::invalid_argument("option '" + key + "' expects true/false, got '" + v + "'");
}

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    return out;
}

std::filesystem::path or_default(const std::filesystem::path& p, const std::filesystem::path& dir,
                                 const char* name) {
    return p.empty() ? dir / name : p;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    const std::string& v = value;
    if (key == "num_experts" || key == "k_experts") {
        train.num_experts = to_size(key, v);
        model.num_experts = train.num_experts;
        decode.k = train.num_experts;
    } else if (key == "lambda") {
        train.lambda = to_double(key, v);
    } else if (key == "top_n") {
        train.top_n = to_size(key, v);
        decode.top_n = train.top_n;
    } else if (key == "lr") {
        train.lr = to_double(key, v);
    } else if (key == "batch_size") {
        train.batch_size = to_size(key, v);
    } else if (key == "epochs") {
        train.epochs = to_size(key, v);
    } else if (key == "seed") {
        train.seed = to_size(key, v);
        decode.seed = train.seed;
    } else if (key == "warmup_steps") {
        train.warmup_steps = to_size(key, v);
    } else if (key == "expert_mode") {
        train.expert_mode = parse_expert_mode(v);
        model.expert_mode = train.expert_mode;
    } else if (key == "disjoint_rule") {
        train.disjoint_rule = to_bool(key, v);
        decode.disjoint_rule = train.disjoint_rule;
    } else if (key == "weight_decay") {
        train.weight_decay = to_double(key, v);
    } else if (key == "use_moe") {
        train.use_moe = to_bool(key, v);
    } else if (key == "hops") {
        train.subgraph.hops = to_size(key, v);
    } else if (key == "max_nodes") {
        train.subgraph.max_nodes = to_size(key, v);
    } else if (key == "rgcn_dim") {
        model.rgcn.dim = to_size(key, v);
    } else if (key == "rgcn_layers") {
        model.rgcn.layers = to_size(key, v);
    } else if (key == "d_model") {
        model.generator.d_model = to_size(key, v);
    } else if (key == "heads") {
        model.generator.heads = to_size(key, v);
    } else if (key == "ffn") {
        model.generator.ffn = to_size(key, v);
    } else if (key == "encoder_layers") {
        model.generator.encoder_layers = to_size(key, v);
    } else if (key == "decoder_layers") {
        model.generator.decoder_layers = to_size(key, v);
    } else if (key == "max_len") {
        model.generator.max_len = to_size(key, v);
        decode.max_len = model.generator.max_len;
    } else if (key == "strategy") {
        decode.strategy = parse_strategy(v);
    } else if (key == "k") {
        decode.k = to_size(key, v);
    } else if (key == "top_k") {
        decode.top_k = to_size(key, v);
    } else if (key == "top_p") {
        decode.top_p = to_double(key, v);
    } else if (key == "length_normalize") {
        decode.length_normalize = to_bool(key, v);
    } else if (key == "decode_top_n") {
        decode_top_n = to_size(key, v);
    } else if (key == "decode_seed") {
        decode.seed = to_size(key, v);
    } else if (key == "decode_disjoint_rule") {
        decode.disjoint_rule = to_bool(key, v);
    } else if (key == "dataset") {
        dataset = v;
    } else if (key == "eval_dataset") {
        eval_dataset = v;
    } else if (key == "kg") {
        kg = v;
    } else if (key == "output_dir") {
        output_dir = v;
    } else if (key == "vocab") {
        vocab = v;
    } else if (key == "checkpoint") {
        checkpoint = v;
    } else if (key == "log") {
        log = v;
    } else if (key == "generations") {
        generations = v;
    } else if (key == "report") {
        report = v;
    } else {
        throw std::invalid_argument("unknown option '" + key + "'");
    }
}

void RunConfig::sync() {
    model.num_experts = train.num_experts;
    model.expert_mode = train.expert_mode;
    if (!train.use_moe && train.num_experts != 1)
        throw std::invalid_argument("use_moe = false requires num_experts = 1");
}

std::filesystem::path RunConfig::vocab_path() const { return or_default(vocab, output_dir, "vocab.txt"); }
std::filesystem::path RunConfig::checkpoint_path() const {
    return or_default(checkpoint, output_dir, "model.ckpt");
}
std::filesystem::path RunConfig::log_path() const { return or_default(log, output_dir, "train_log.jsonl"); }
std::filesystem::path RunConfig::generations_path() const {
    return or_default(generations, output_dir, "generations.jsonl");
}
std::filesystem::path RunConfig::report_path() const { return or_default(report, output_dir, "metrics.json"); }
std::filesystem::path RunConfig::eval_dataset_path() const {
    return eval_dataset.empty() ? dataset : eval_dataset;
}

nlohmann::json RunConfig::to_json() const {
    return {{"train", train.to_json()},
            {"model", model.to_json()},
            {"decode",
             {{"strategy", to_string(decode.strategy)},
              {"k", decode.k},
              {"top_n", decode.top_n},
              {"max_len", decode.max_len},
              {"disjoint_rule", decode.disjoint_rule},
              {"length_normalize", decode.length_normalize},
              {"top_k", decode.top_k},
              {"top_p", decode.top_p},
              {"seed", decode.seed}}}};
}

std::map<std::string, std::string> parse_config(std::istream& in) {
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.resize(hash);
        const std::string t = trim(line);
        if (t.empty())
            continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ParseError("expected key = value", lineno);
        const std::string key = trim(std::string_view(t).substr(0, eq));
        if (key.empty())
            throw ParseError("empty key", lineno);
        out[key] = trim(std::string_view(t).substr(eq + 1));
    }
    return out;
}

void apply_config(RunConfig& cfg, const std::map<std::string, std::string>& values) {
    for (const auto& [k, v] : values)
        cfg.set(k, v);
    // decode-specific keys win over the training values they default to
    for (const char* key : {"k", "decode_seed", "decode_disjoint_rule"})
        if (auto it = values.find(key); it != values.end())
            cfg.set(key, it->second);
    cfg.sync();
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open config: " + path.string());
    RunConfig cfg;
    apply_config(cfg, parse_config(in));
    return cfg;
}

Vocab build_vocab(std::span<const Example> examples, const KnowledgeGraph& kg,
                  std::size_t num_experts) {
    std::vector<std::string> texts;
    for (const auto& ex : examples) {
        texts.push_back(ex.input);
        texts.insert(texts.end(), ex.references.begin(), ex.references.end());
    }
    for (ConceptId c = 0; c < kg.num_concepts(); ++c) {
        std::string surface;
        for (const auto& t : kg.concept_tokens(c))
            surface += t + ' ';
        texts.push_back(std::move(surface));
    }
    return Vocab::build(texts, num_experts);
}

nlohmann::json checkpoint_metadata(const MokgeModel& model, const TrainConfig& train) {
    std::ostringstream vfp, kfp;
    vfp << std::hex << model.vocab().fingerprint();
    kfp << std::hex << model.kg().fingerprint();
    return {{"model", model.config().to_json()},
            {"train", train.to_json()},
            {"vocab_fingerprint", vfp.str()},
            {"kg_fingerprint", kfp.str()}};
}

LoadedModel load_model(const RunConfig& cfg) {
    LoadedModel out;
    const Checkpoint ckpt = load_checkpoint(cfg.checkpoint_path());
    out.metadata = ckpt.metadata;
    out.kg = std::make_unique<KnowledgeGraph>(KnowledgeGraph::load(cfg.kg));
    out.vocab = std::make_unique<Vocab>(Vocab::load(cfg.vocab_path()));

    std::ostringstream vfp, kfp;
    vfp << std::hex << out.vocab->fingerprint();
    kfp << std::hex << out.kg->fingerprint();
    const std::string want_vocab = ckpt.metadata.value("vocab_fingerprint", "");
    if (want_vocab != vfp.str())
        throw std::runtime_error("vocabulary " + cfg.vocab_path().string() + " (hash " + vfp.str() +
                                 ") does not match the checkpoint (hash " + want_vocab + ")");
    const std::string want_kg = ckpt.metadata.value("kg_fingerprint", "");
    if (want_kg != kfp.str())
        throw std::runtime_error("knowledge graph " + cfg.kg.string() + " (hash " + kfp.str() +
                                 ") does not match the checkpoint (hash " + want_kg + ")");

    const ModelConfig mc = ModelConfig::from_json(ckpt.metadata.at("model"));
    out.model = std::make_unique<MokgeModel>(mc, *out.kg, *out.vocab, 0);
    restore_parameters(out.model->parameters(), ckpt);
    return out;
}

TrainResult run_train(const RunConfig& cfg) {
    if (cfg.dataset.empty() || cfg.kg.empty())
        throw std::invalid_argument("train needs dataset and kg paths");
    cfg.train.validate();
    const KnowledgeGraph kg = KnowledgeGraph::load(cfg.kg);
    const std::vector<Example> examples = load_dataset(cfg.dataset);
    const Vocab vocab = build_vocab(examples, kg, cfg.train.num_experts);

    ModelConfig mc = cfg.model;
    mc.num_experts = cfg.train.num_experts;
    mc.expert_mode = cfg.train.expert_mode;
    MokgeModel model(mc, kg, vocab, cfg.train.seed);
    const auto data = prepare_dataset(examples, kg, vocab, cfg.train.subgraph);

    std::filesystem::create_directories(cfg.output_dir);
    std::ofstream log = open_out(cfg.log_path());
    TrainResult result = train(model, data, cfg.train, [&](const StepLog& s) {
        log << s.to_json().dump() << '\n';
    });
    vocab.save(cfg.vocab_path());
    save_checkpoint(cfg.checkpoint_path(), model.parameters(), checkpoint_metadata(model, cfg.train));
    return result;
}

std::vector<GenerationRecord> run_generate(const RunConfig& cfg) {
    const LoadedModel lm = load_model(cfg);
    const std::vector<Example> examples = load_dataset(cfg.eval_dataset_path());
    SubgraphOptions sg = cfg.train.subgraph;
    if (lm.metadata.contains("train")) {
        const auto& t = lm.metadata.at("train");
        sg.hops = t.value("hops", sg.hops);
        sg.max_nodes = t.value("max_nodes", sg.max_nodes);
    }
    DecodeConfig dc = cfg.decode;
    if (cfg.decode_top_n)
        dc.top_n = *cfg.decode_top_n;
    else if (lm.metadata.contains("train"))
        dc.top_n = lm.metadata.at("train").value("top_n", dc.top_n);
    if (dc.strategy == Strategy::Moe)
        dc.k = lm.model->num_experts();
    std::vector<GenerationRecord> records;
    for (const auto& ex : examples) {
        const PreparedExample pe = prepare_example(ex, *lm.kg, *lm.vocab, sg);
        const auto outputs = decode(*lm.model, pe, dc);
        const auto recs = to_records(ex.id, dc.strategy, outputs, *lm.kg);
        records.insert(records.end(), recs.begin(), recs.end());
    }
    std::ofstream out = open_out(cfg.generations_path());
    write_generations(out, records);
    return records;
}

std::vector<HypothesisSet> collect_sets(std::span<const Example> dataset,
                                        std::span<const GenerationRecord> records,
                                        std::string* strategy) {
    std::unordered_map<std::string, std::size_t> index;
    std::vector<HypothesisSet> sets(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (!index.emplace(dataset[i].id, i).second)
            throw std::invalid_argument("duplicate dataset id " + dataset[i].id);
        for (const auto& r : dataset[i].references)
            sets[i].references.push_back(metric_tokens(r));
    }
    for (const auto& rec : records) {
        auto it = index.find(rec.id);
        if (it == index.end())
            throw std::invalid_argument("generation for unknown id " + rec.id);
        sets[it->second].hypotheses.push_back(metric_tokens(rec.output));
        if (strategy != nullptr) {
            if (strategy->empty())
                *strategy = rec.strategy;
            else if (*strategy != rec.strategy)
                throw std::invalid_argument("generation file mixes strategies " + *strategy +
                                            " and " + rec.strategy);
        }
    }
    for (std::size_t i = 0; i < dataset.size(); ++i)
        if (sets[i].hypotheses.empty())
            throw std::invalid_argument("no generations for id " + dataset[i].id);
    return sets;
}

MetricReport run_evaluate(const RunConfig& cfg) {
    const KnowledgeGraph kg = KnowledgeGraph::load(cfg.kg);
    const std::vector<Example> examples = load_dataset(cfg.eval_dataset_path());
    std::ifstream in(cfg.generations_path());
    if (!in)
        throw std::runtime_error("cannot open generations: " + cfg.generations_path().string());
    const auto records = read_generations(in);
    std::string strategy;
    const auto sets = collect_sets(examples, records, &strategy);
    const MetricReport report = evaluate_sets(sets, kg, strategy);
    std::ofstream out = open_out(cfg.report_path());
    out << format_report(report);
    return report;
}

std::string format_report(const MetricReport& report) {
    return report.to_json().dump(2) + "\n";
}

}  // namespace mokge
