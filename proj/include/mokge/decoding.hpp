#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mokge/moe.hpp"

namespace mokge {

/// Next-token distribution for a prefix that starts with BOS.
using NextTokenFn = std::function<std::vector<double>(std::span<const TokenId>)>;

/// Argmax decoding, ties to the lowest token id. Returns the generated tokens
/// (no BOS, EOS included when produced) with at most max_len tokens.
std::vector<TokenId> greedy_decode(const NextTokenFn& next, std::size_t max_len);

struct Hypothesis {
    std::vector<TokenId> tokens;  // no BOS
    double log_prob = 0.0;
    double score = 0.0;  // log_prob, or log_prob / |tokens| when length-normalized
};

struct BeamOptions {
    std::size_t beam = 3;
    std::size_t num_return = 1;
    std::size_t max_len = 64;
    bool length_normalize = true;
};

/// Best-first hypotheses, highest score first.
std::vector<Hypothesis> beam_search(const NextTokenFn& next, const BeamOptions& options);

/// Uniform double in [0, 1) from the top 53 bits of one draw.
double uniform01(std::mt19937_64& rng);

/// Token ids kept by top-k truncation, most probable first (ties: lower id).
std::vector<std::size_t> top_k_set(std::span<const double> probs, std::size_t k);
/// Smallest prefix of the descending distribution whose mass reaches p.
std::vector<std::size_t> nucleus_set(std::span<const double> probs, double p);
/// Zeroes everything outside `keep` and renormalizes.
std::vector<double> restrict_distribution(std::span<const double> probs,
                                          std::span<const std::size_t> keep);
/// Inverse-CDF draw in token-id order.
std::size_t sample_index(std::span<const double> probs, std::mt19937_64& rng);

std::vector<TokenId> sample_top_k(const NextTokenFn& next, std::size_t k, std::size_t max_len,
                                  std::mt19937_64& rng);
std::vector<TokenId> sample_nucleus(const NextTokenFn& next, double p, std::size_t max_len,
                                    std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Model-level decoding

enum class Strategy { Moe, Beam, TopK, Nucleus };

Strategy parse_strategy(const std::string& name);
std::string to_string(Strategy s);

struct DecodeConfig {
    Strategy strategy = Strategy::Moe;
    /// Outputs per input; for MoKGE this must equal the number of experts.
    std::size_t k = 3;
    std::size_t top_n = 10;
    std::size_t max_len = 64;
    bool disjoint_rule = false;
    bool length_normalize = true;
    std::size_t top_k = 50;
    double top_p = 0.95;
    std::uint64_t seed = 1234;
};

struct Generation {
    std::vector<TokenId> tokens;
    std::string text;
    std::optional<std::size_t> expert;
    std::vector<ConceptId> concepts;
};

/// Greedy decoding once per expert; expert z sees its own top-N concepts.
/// With the disjoint rule the sets are checked pairwise disjoint.
std::vector<Generation> decode_moe(const MokgeModel& model, const PreparedExample& ex,
                                   const DecodeConfig& cfg);
/// Baselines run expert 0 with its top-N concepts.
std::vector<Generation> decode_beam(const MokgeModel& model, const PreparedExample& ex,
                                    const DecodeConfig& cfg);
std::vector<Generation> decode_top_k(const MokgeModel& model, const PreparedExample& ex,
                                     const DecodeConfig& cfg);
std::vector<Generation> decode_nucleus(const MokgeModel& model, const PreparedExample& ex,
                                       const DecodeConfig& cfg);
std::vector<Generation> decode(const MokgeModel& model, const PreparedExample& ex,
                               const DecodeConfig& cfg);

/// One JSONL line of a generation file.
struct GenerationRecord {
    std::string id;
    std::string strategy;
    std::optional<std::size_t> expert;
    std::string output;
    std::vector<std::string> concepts;

    nlohmann::json to_json() const;
    static GenerationRecord from_json(const nlohmann::json& j);
    bool operator==(const GenerationRecord&) const = default;
};

std::vector<GenerationRecord> to_records(const std::string& id, Strategy strategy,
                                         std::span<const Generation> outputs,
                                         const KnowledgeGraph& kg);
void write_generations(std::ostream& out, std::span<const GenerationRecord> records);
std::vector<GenerationRecord> read_generations(std::istream& in);

}  // namespace mokge
