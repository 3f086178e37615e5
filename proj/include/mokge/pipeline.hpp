#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mokge/decoding.hpp"
#include "mokge/metrics.hpp"
#include "mokge/model.hpp"
#include "mokge/moe.hpp"

namespace mokge {

/// Everything a train/generate/evaluate run needs. Empty artifact paths fall
/// back to files inside output_dir.
struct RunConfig {
    TrainConfig train;
    ModelConfig model;
    DecodeConfig decode;
    /// Concepts per expert at decode time; defaults to the checkpoint's top_n.
    std::optional<std::size_t> decode_top_n;

    std::filesystem::path dataset;
    std::filesystem::path eval_dataset;  // defaults to dataset
    std::filesystem::path kg;
    std::filesystem::path output_dir = "run";
    std::filesystem::path vocab;
    std::filesystem::path checkpoint;
    std::filesystem::path log;
    std::filesystem::path generations;
    std::filesystem::path report;

    /// Sets one option by its config-file key; throws on unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
    /// Keeps derived fields (expert counts, modes) in step with each other.
    void sync();

    std::filesystem::path vocab_path() const;
    std::filesystem::path checkpoint_path() const;
    std::filesystem::path log_path() const;
    std::filesystem::path generations_path() const;
    std::filesystem::path report_path() const;
    std::filesystem::path eval_dataset_path() const;

    nlohmann::json to_json() const;
};

/// `key = value` lines; '#' starts a comment.
std::map<std::string, std::string> parse_config(std::istream& in);
RunConfig load_run_config(const std::filesystem::path& path);
void apply_config(RunConfig& cfg, const std::map<std::string, std::string>& values);

/// Vocabulary over dataset inputs, references and KG concept surfaces.
Vocab build_vocab(std::span<const Example> examples, const KnowledgeGraph& kg,
                  std::size_t num_experts);

struct LoadedModel {
    std::unique_ptr<KnowledgeGraph> kg;
    std::unique_ptr<Vocab> vocab;
    std::unique_ptr<MokgeModel> model;
    nlohmann::json metadata;
};

/// Reads checkpoint, vocab and KG, refusing mismatched fingerprints.
LoadedModel load_model(const RunConfig& cfg);

nlohmann::json checkpoint_metadata(const MokgeModel& model, const TrainConfig& train);

/// Trains and writes vocab, checkpoint and the step log.
TrainResult run_train(const RunConfig& cfg);
/// Decodes eval_dataset and writes generation JSONL.
std::vector<GenerationRecord> run_generate(const RunConfig& cfg);
/// Scores a generation file against eval_dataset; writes the report JSON.
MetricReport run_evaluate(const RunConfig& cfg);

/// Groups generation records by dataset id, in dataset order.
std::vector<HypothesisSet> collect_sets(std::span<const Example> dataset,
                                        std::span<const GenerationRecord> records,
                                        std::string* strategy = nullptr);

/// Stable text form of a report (fixed precision, sorted keys).
std::string format_report(const MetricReport& report);

}  // namespace mokge
