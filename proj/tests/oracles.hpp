#pragma once

// Independent brute-force reimplementations used as test oracles. They favor
// obviousness over speed and share no code with the library.

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mokge/kg.hpp"

namespace oracle {

using Words = std::vector<std::string>;

// ---------------------------------------------------------------------------
// graphs

inline mokge::KnowledgeGraph random_graph(std::mt19937_64& rng, std::size_t nodes,
                                          std::size_t edges, std::size_t relations) {
    mokge::KnowledgeGraph kg;
    for (std::size_t i = 0; i < nodes; ++i)
        kg.add_concept("c" + std::to_string(i));
    for (std::size_t e = 0; e < edges; ++e)
        kg.add_triple("c" + std::to_string(rng() % nodes), "r" + std::to_string(rng() % relations),
                      "c" + std::to_string(rng() % nodes));
    return kg;
}

/// Repeated full scans of the triple list, one round per hop.
inline std::pair<std::set<mokge::ConceptId>, std::vector<mokge::Triple>> expand(
    const mokge::KnowledgeGraph& kg, const std::vector<mokge::ConceptId>& seeds, std::size_t hops) {
    std::set<mokge::ConceptId> nodes(seeds.begin(), seeds.end());
    for (std::size_t h = 0; h < hops; ++h) {
        std::set<mokge::ConceptId> next = nodes;
        for (const auto& t : kg.triples()) {
            if (nodes.count(t.head))
                next.insert(t.tail);
            if (nodes.count(t.tail))
                next.insert(t.head);
        }
        nodes = next;
    }
    std::vector<mokge::Triple> edges;
    for (const auto& t : kg.triples())
        if (nodes.count(t.head) && nodes.count(t.tail))
            edges.push_back(t);
    return {nodes, edges};
}

// ---------------------------------------------------------------------------
// metrics

inline std::vector<Words> grams(const Words& s, std::size_t n) {
    std::vector<Words> out;
    for (std::size_t i = 0; i + n <= s.size(); ++i)
        out.emplace_back(s.begin() + static_cast<long>(i), s.begin() + static_cast<long>(i + n));
    return out;
}

inline std::size_t occurrences(const std::vector<Words>& list, const Words& g) {
    return static_cast<std::size_t>(std::count(list.begin(), list.end(), g));
}

inline std::pair<double, double> clipped_counts(const Words& cand, const std::vector<Words>& refs,
                                                std::size_t n) {
    const auto cg = grams(cand, n);
    std::vector<Words> seen;
    double match = 0.0;
    for (const auto& g : cg) {
        if (std::find(seen.begin(), seen.end(), g) != seen.end())
            continue;
        seen.push_back(g);
        std::size_t best = 0;
        for (const auto& r : refs)
            best = std::max(best, occurrences(grams(r, n), g));
        match += static_cast<double>(std::min(occurrences(cg, g), best));
    }
    return {match, static_cast<double>(cg.size())};
}

inline double closest_length(std::size_t c, const std::vector<Words>& refs) {
    std::vector<std::pair<std::size_t, std::size_t>> keyed;
    for (const auto& r : refs) {
        const std::size_t gap = r.size() > c ? r.size() - c : c - r.size();
        keyed.emplace_back(gap, r.size());
    }
    std::sort(keyed.begin(), keyed.end());
    return static_cast<double>(keyed.front().second);
}

inline double sentence_bleu(const Words& cand, const std::vector<Words>& refs, std::size_t max_n) {
    if (cand.empty())
        return 0.0;
    double product = 1.0;
    for (std::size_t n = 1; n <= max_n; ++n) {
        auto [m, t] = clipped_counts(cand, refs, n);
        const double p = n == 1 ? (t == 0 ? 0.0 : m / t) : (m + 1.0) / (t + 1.0);
        if (p == 0.0)
            return 0.0;
        product *= p;
    }
    const double c = static_cast<double>(cand.size());
    const double r = closest_length(cand.size(), refs);
    const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
    return 100.0 * bp * std::pow(product, 1.0 / static_cast<double>(max_n));
}

inline double corpus_bleu(const std::vector<Words>& cands, const std::vector<std::vector<Words>>& refs,
                          std::size_t max_n) {
    double log_sum = 0.0, c = 0.0, r = 0.0;
    for (std::size_t n = 1; n <= max_n; ++n) {
        double m = 0.0, t = 0.0;
        for (std::size_t i = 0; i < cands.size(); ++i) {
            auto [mi, ti] = clipped_counts(cands[i], refs[i], n);
            m += mi;
            t += ti;
        }
        if (m == 0.0)
            return 0.0;
        log_sum += std::log(m / t);
    }
    for (std::size_t i = 0; i < cands.size(); ++i) {
        c += static_cast<double>(cands[i].size());
        r += closest_length(cands[i].size(), refs[i]);
    }
    const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
    return 100.0 * bp * std::exp(log_sum / static_cast<double>(max_n));
}

inline std::size_t lcs(const Words& a, const Words& b) {
    std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
    for (std::size_t i = a.size(); i-- > 0;)
        for (std::size_t j = b.size(); j-- > 0;)
            t[i][j] = a[i] == b[j] ? 1 + t[i + 1][j + 1] : std::max(t[i + 1][j], t[i][j + 1]);
    return t[0][0];
}

inline double rouge_l(const Words& cand, const std::vector<Words>& refs) {
    double best = 0.0;
    for (const auto& r : refs) {
        const double l = static_cast<double>(lcs(cand, r));
        if (l == 0.0)
            continue;
        const double p = l / static_cast<double>(cand.size());
        const double rec = l / static_cast<double>(r.size());
        best = std::max(best, 200.0 * p * rec / (p + rec));
    }
    return best;
}

inline double self_bleu(const std::vector<Words>& hyps, std::size_t n) {
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < hyps.size(); ++i)
        for (std::size_t j = 0; j < hyps.size(); ++j) {
            if (i == j)
                continue;
            total += sentence_bleu(hyps[i], {hyps[j]}, n);
            ++pairs;
        }
    return total / static_cast<double>(pairs);
}

inline std::vector<Words> pooled_grams(const std::vector<Words>& corpus, std::size_t k) {
    std::vector<Words> all;
    for (const auto& s : corpus)
        for (auto& g : grams(s, k))
            all.push_back(std::move(g));
    return all;
}

inline double distinct(const std::vector<Words>& corpus, std::size_t k) {
    const auto all = pooled_grams(corpus, k);
    if (all.empty())
        return 0.0;
    std::vector<Words> unique;
    for (const auto& g : all)
        if (std::find(unique.begin(), unique.end(), g) == unique.end())
            unique.push_back(g);
    return static_cast<double>(unique.size()) / static_cast<double>(all.size());
}

inline double entropy(const std::vector<Words>& corpus, std::size_t k) {
    const auto all = pooled_grams(corpus, k);
    std::vector<Words> unique;
    for (const auto& g : all)
        if (std::find(unique.begin(), unique.end(), g) == unique.end())
            unique.push_back(g);
    double h = 0.0;
    for (const auto& g : unique) {
        const double p = static_cast<double>(occurrences(all, g)) / static_cast<double>(all.size());
        h -= p * std::log(p);
    }
    return h;
}

inline double jaccard(std::vector<mokge::ConceptId> a, std::vector<mokge::ConceptId> b) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    if (a.empty() && b.empty())
        return 1.0;
    std::vector<mokge::ConceptId> inter, uni;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(uni));
    return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

/// Sentences over a tiny alphabet so n-grams collide often.
inline Words random_sentence(std::mt19937_64& rng, std::size_t max_len, std::size_t alphabet = 4) {
    const std::size_t len = rng() % (max_len + 1);
    Words s;
    for (std::size_t i = 0; i < len; ++i)
        s.push_back(std::string(1, static_cast<char>('a' + rng() % alphabet)));
    return s;
}

}  // namespace oracle
