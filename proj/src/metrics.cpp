#include "mokge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

#include "mokge/vocab.hpp"

namespace mokge {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const Sentence& s, std::size_t n) {
    NgramCounts counts;
    if (n == 0 || s.size() < n)
        return counts;
    for (std::size_t i = 0; i + n <= s.size(); ++i)
        ++counts[std::vector<std::string>(s.begin() + static_cast<std::ptrdiff_t>(i),
                                          s.begin() + static_cast<std::ptrdiff_t>(i + n))];
    return counts;
}

// clipped matches and candidate n-gram total
std::pair<std::size_t, std::size_t> clipped(const Sentence& cand, std::span<const Sentence> refs,
                                            std::size_t n) {
    const NgramCounts c = count_ngrams(cand, n);
    NgramCounts max_ref;
    for (const auto& r : refs)
        for (const auto& [g, k] : count_ngrams(r, n))
            max_ref[g] = std::max(max_ref[g], k);
    std::size_t match = 0, total = 0;
    for (const auto& [g, k] : c) {
        total += k;
        auto it = max_ref.find(g);
        if (it != max_ref.end())
            match += std::min(k, it->second);
    }
    return {match, total};
}

std::size_t closest_ref_length(std::size_t c, std::span<const Sentence> refs) {
    std::size_t best = refs.front().size();
    for (const auto& r : refs) {
        const auto d = [&](std::size_t len) { return len > c ? len - c : c - len; };
        if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best))
            best = r.size();
    }
    return best;
}

double brevity_penalty(double c, double r) {
    if (c <= 0.0)
        return 0.0;
    return c > r ? 1.0 : std::exp(1.0 - r / c);
}

std::size_t lcs_length(const Sentence& a, const Sentence& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::string join(const Sentence& s) {
    std::string out;
    for (const auto& t : s) {
        if (!out.empty())
            out += ' ';
        out += t;
    }
    return out;
}

}  // namespace

Sentence metric_tokens(std::string_view text) { return tokenize_text(text); }

double bleu(const Sentence& candidate, std::span<const Sentence> references, std::size_t max_n,
            bool smoothed) {
    if (references.empty())
        throw std::invalid_argument("bleu: empty reference list");
    if (max_n == 0)
        throw std::invalid_argument("bleu: max_n must be at least 1");
    if (candidate.empty())
        return 0.0;
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= max_n; ++n) {
        auto [match, total] = clipped(candidate, references, n);
        double p;
        if (smoothed && n >= 2)
            p = (static_cast<double>(match) + 1.0) / (static_cast<double>(total) + 1.0);
        else if (total == 0 || match == 0)
            return 0.0;
        else
            p = static_cast<double>(match) / static_cast<double>(total);
        log_sum += std::log(p);
    }
    const double c = static_cast<double>(candidate.size());
    const double r = static_cast<double>(closest_ref_length(candidate.size(), references));
    return 100.0 * brevity_penalty(c, r) * std::exp(log_sum / static_cast<double>(max_n));
}

double corpus_bleu(std::span<const Sentence> candidates,
                   std::span<const std::vector<Sentence>> references, std::size_t max_n) {
    if (candidates.size() != references.size())
        throw std::invalid_argument("corpus_bleu: candidate and reference counts differ");
    if (max_n == 0)
        throw std::invalid_argument("corpus_bleu: max_n must be at least 1");
    std::vector<std::size_t> match(max_n + 1, 0), total(max_n + 1, 0);
    double c = 0.0, r = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (references[i].empty())
            throw std::invalid_argument("corpus_bleu: empty reference list");
        for (std::size_t n = 1; n <= max_n; ++n) {
            auto [m, t] = clipped(candidates[i], references[i], n);
            match[n] += m;
            total[n] += t;
        }
        c += static_cast<double>(candidates[i].size());
        r += static_cast<double>(closest_ref_length(candidates[i].size(), references[i]));
    }
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= max_n; ++n) {
        if (match[n] == 0)
            return 0.0;
        log_sum += std::log(static_cast<double>(match[n]) / static_cast<double>(total[n]));
    }
    return 100.0 * brevity_penalty(c, r) * std::exp(log_sum / static_cast<double>(max_n));
}

double rouge_l(const Sentence& candidate, const Sentence& reference) {
    if (candidate.empty() || reference.empty())
        return 0.0;
    const double lcs = static_cast<double>(lcs_length(candidate, reference));
    if (lcs == 0.0)
        return 0.0;
    const double p = lcs / static_cast<double>(candidate.size());
    const double r = lcs / static_cast<double>(reference.size());
    return 100.0 * 2.0 * p * r / (p + r);
}

double rouge_l(const Sentence& candidate, std::span<const Sentence> references) {
    double best = 0.0;
    for (const auto& r : references)
        best = std::max(best, rouge_l(candidate, r));
    return best;
}

BestOfK best_of_k_quality(std::span<const HypothesisSet> sets) {
    BestOfK out;
    std::vector<Sentence> chosen;
    std::vector<std::vector<Sentence>> refs;
    double rouge_total = 0.0;
    for (const auto& set : sets) {
        if (set.hypotheses.empty())
            throw std::invalid_argument("best_of_k_quality: input without hypotheses");
        std::size_t b = 0, rl = 0;
        double best_b = -1.0, best_r = -1.0;
        for (std::size_t i = 0; i < set.hypotheses.size(); ++i) {
            const double sb = bleu(set.hypotheses[i], set.references, 4, true);
            const double sr = rouge_l(set.hypotheses[i], set.references);
            if (sb > best_b) {
                best_b = sb;
                b = i;
            }
            if (sr > best_r) {
                best_r = sr;
                rl = i;
            }
        }
        out.bleu_choice.push_back(b);
        out.rouge_choice.push_back(rl);
        chosen.push_back(set.hypotheses[b]);
        refs.push_back(set.references);
        rouge_total += best_r;
    }
    if (!sets.empty()) {
        out.bleu4 = corpus_bleu(chosen, refs, 4);
        out.rouge_l = rouge_total / static_cast<double>(sets.size());
    }
    return out;
}

double self_bleu(std::span<const Sentence> hypotheses, std::size_t n) {
    const std::size_t k = hypotheses.size();
    if (k < 2)
        throw std::invalid_argument("self_bleu needs at least two hypotheses");
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
            if (i != j)
                total += bleu(hypotheses[i], std::span<const Sentence>(&hypotheses[j], 1), n, true);
    return total / static_cast<double>(k * (k - 1));
}

double distinct_k(std::span<const Sentence> corpus, std::size_t k) {
    NgramCounts pooled;
    std::size_t total = 0;
    for (const auto& s : corpus)
        for (const auto& [g, c] : count_ngrams(s, k)) {
            pooled[g] += c;
            total += c;
        }
    return total == 0 ? 0.0 : static_cast<double>(pooled.size()) / static_cast<double>(total);
}

double entropy_k(std::span<const Sentence> corpus, std::size_t k) {
    NgramCounts pooled;
    std::size_t total = 0;
    for (const auto& s : corpus)
        for (const auto& [g, c] : count_ngrams(s, k)) {
            pooled[g] += c;
            total += c;
        }
    double h = 0.0;
    for (const auto& [g, c] : pooled) {
        const double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log(p);
    }
    return h;
}

double jaccard(std::span<const ConceptId> a, std::span<const ConceptId> b) {
    const std::set<ConceptId> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    if (sa.empty() && sb.empty())
        return 1.0;
    std::size_t inter = 0;
    for (ConceptId c : sa)
        inter += sb.count(c);
    return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

ConceptDiversity concept_diversity(std::span<const std::vector<std::vector<ConceptId>>> concept_sets) {
    ConceptDiversity out;
    if (concept_sets.empty())
        return out;
    double uni = 0.0, jac = 0.0;
    bool pairs = true;
    for (const auto& sets : concept_sets) {
        std::set<ConceptId> all;
        for (const auto& s : sets)
            all.insert(s.begin(), s.end());
        uni += static_cast<double>(all.size());
        if (sets.size() < 2) {
            pairs = false;
            continue;
        }
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < sets.size(); ++i)
            for (std::size_t j = i + 1; j < sets.size(); ++j) {
                sum += jaccard(sets[i], sets[j]);
                ++count;
            }
        jac += sum / static_cast<double>(count);
    }
    const double n = static_cast<double>(concept_sets.size());
    out.unique_concepts = uni / n;
    if (pairs)
        out.jaccard = jac / n;
    return out;
}

nlohmann::json MetricReport::to_json() const {
    const auto opt = [](const std::optional<double>& v) {
        return v ? nlohmann::json(*v) : nlohmann::json();
    };
    nlohmann::json j;
    j["B-4"] = bleu4;
    j["R-L"] = rouge_l;
    j["SB-3"] = opt(self_bleu3);
    j["SB-4"] = opt(self_bleu4);
    j["D-2"] = distinct2;
    j["E-4"] = entropy4;
    j["Uni.C"] = unique_concepts;
    j["Jaccard"] = opt(jaccard);
    j["config"] = {{"K", k}, {"strategy", strategy}};
    return j;
}

MetricReport evaluate_sets(std::span<const HypothesisSet> sets, const KnowledgeGraph& kg,
                           const std::string& strategy) {
    MetricReport report;
    report.strategy = strategy;
    if (sets.empty())
        throw std::invalid_argument("evaluate: no inputs");
    report.k = sets.front().hypotheses.size();
    for (const auto& s : sets)
        if (s.hypotheses.size() != report.k)
            throw std::invalid_argument("evaluate: inputs have different numbers of hypotheses");

    const BestOfK quality = best_of_k_quality(sets);
    report.bleu4 = quality.bleu4;
    report.rouge_l = quality.rouge_l;

    std::vector<Sentence> corpus;
    std::vector<std::vector<std::vector<ConceptId>>> concepts;
    double sb3 = 0.0, sb4 = 0.0;
    for (const auto& s : sets) {
        corpus.insert(corpus.end(), s.hypotheses.begin(), s.hypotheses.end());
        std::vector<std::vector<ConceptId>> per_input;
        for (const auto& h : s.hypotheses)
            per_input.push_back(kg.ground(join(h)));
        concepts.push_back(std::move(per_input));
        if (report.k >= 2) {
            sb3 += self_bleu(s.hypotheses, 3);
            sb4 += self_bleu(s.hypotheses, 4);
        }
    }
    const double n = static_cast<double>(sets.size());
    if (report.k >= 2) {
        report.self_bleu3 = sb3 / n;
        report.self_bleu4 = sb4 / n;
    }
    report.distinct2 = distinct_k(corpus, 2);
    report.entropy4 = entropy_k(corpus, 4);
    const ConceptDiversity cd = concept_diversity(concepts);
    report.unique_concepts = cd.unique_concepts;
    report.jaccard = cd.jaccard;
    return report;
}

}  // namespace mokge
