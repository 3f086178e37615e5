#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mokge/kg.hpp"

namespace mokge {

using Sentence = std::vector<std::string>;

/// Metric tokenization: lowercase, whitespace split.
Sentence metric_tokens(std::string_view text);

/// Sentence BLEU-n on 0..100. With `smoothed`, orders 2..n use add-one
/// counts; an empty candidate or zero unigram matches scores 0. The brevity
/// penalty uses the closest reference length (shorter on ties).
double bleu(const Sentence& candidate, std::span<const Sentence> references, std::size_t max_n = 4,
            bool smoothed = true);
/// Unsmoothed corpus BLEU-n: clipped counts and lengths pooled over inputs.
double corpus_bleu(std::span<const Sentence> candidates,
                   std::span<const std::vector<Sentence>> references, std::size_t max_n = 4);

/// ROUGE-L F1 on 0..100; 0 when either side is empty.
double rouge_l(const Sentence& candidate, const Sentence& reference);
/// Best ROUGE-L F1 over references.
double rouge_l(const Sentence& candidate, std::span<const Sentence> references);

struct HypothesisSet {
    std::vector<Sentence> hypotheses;  // K outputs
    std::vector<Sentence> references;
};

struct BestOfK {
    double bleu4 = 0.0;
    double rouge_l = 0.0;
    std::vector<std::size_t> bleu_choice;   // per input
    std::vector<std::size_t> rouge_choice;  // per input
};

/// Per input, keeps the hypothesis with the best sentence BLEU-4 (resp.
/// ROUGE-L), ties to the lowest index, then scores the selections at corpus
/// level: corpus BLEU-4 and mean ROUGE-L.
BestOfK best_of_k_quality(std::span<const HypothesisSet> sets);

/// Mean over ordered pairs (i != j) of BLEU-n(hyp_i | {hyp_j}). Needs K >= 2.
double self_bleu(std::span<const Sentence> hypotheses, std::size_t n);

/// Unique k-grams over total k-grams, pooled; 0 when there are none.
double distinct_k(std::span<const Sentence> corpus, std::size_t k = 2);
/// Natural-log entropy of the pooled k-gram distribution.
double entropy_k(std::span<const Sentence> corpus, std::size_t k = 4);

/// |A ∩ B| / |A ∪ B|; two empty sets give 1.
double jaccard(std::span<const ConceptId> a, std::span<const ConceptId> b);

struct ConceptDiversity {
    double unique_concepts = 0.0;          // Uni.C
    std::optional<double> jaccard;         // undefined for K < 2
};

/// `concept_sets[i]` holds the concept sets of input i's K hypotheses.
ConceptDiversity concept_diversity(std::span<const std::vector<std::vector<ConceptId>>> concept_sets);

struct MetricReport {
    double bleu4 = 0.0;
    double rouge_l = 0.0;
    std::optional<double> self_bleu3;
    std::optional<double> self_bleu4;
    double distinct2 = 0.0;
    double entropy4 = 0.0;
    double unique_concepts = 0.0;
    std::optional<double> jaccard;
    std::size_t k = 0;
    std::string strategy;

    nlohmann::json to_json() const;
};

/// Full report: hypotheses are grounded against `kg` for the concept metrics.
MetricReport evaluate_sets(std::span<const HypothesisSet> sets, const KnowledgeGraph& kg,
                           const std::string& strategy);

}  // namespace mokge
