#include "mokge/synthetic.hpp"

#include <array>
#include <random>
#include <set>
#include <stdexcept>
#include <string>

#include "mokge/model.hpp"

namespace mokge {

namespace {

struct Mode {
    const char* relation;
    const char* before;  // text ahead of a
    const char* middle;  // between a and b
};

constexpr std::array<Mode, 8> kModes{{
    {"UsedFor", "you can use", "to make"},
    {"AtLocation", "there is a", "near the"},
    {"IsA", "a", "is a kind of"},
    {"HasA", "the", "has a"},
    {"Causes", "", "often causes"},
    {"CapableOf", "every", "is able to"},
    {"PartOf", "the", "is part of the"},
    {"Desires", "each", "wants a"},
}};

const std::set<std::string>& reserved_words() {
    static const std::set<std::string> words = [] {
        std::set<std::string> w{"tell", "me", "about"};
        for (const Mode& m : kModes)
            for (const char* part : {m.before, m.middle})
                for (const auto& t : normalize_tokens(part))
                    w.insert(t);
        return w;
    }();
    return words;
}

// consonant-vowel syllables; always ends in a vowel so no suffix stripping applies
std::string pseudo_word(std::mt19937_64& rng) {
    static constexpr std::string_view consonants = "bdfgklmnprtvz";
    static constexpr std::string_view vowels = "aeiou";
    const std::size_t syllables = 2 + rng() % 2;
    std::string w;
    for (std::size_t i = 0; i < syllables; ++i) {
        w += consonants[rng() % consonants.size()];
        w += vowels[rng() % vowels.size()];
    }
    return w;
}

std::string join_words(std::initializer_list<std::string_view> parts) {
    std::string out;
    for (auto p : parts) {
        if (p.empty())
            continue;
        if (!out.empty())
            out += ' ';
        out += p;
    }
    return out;
}

}  // namespace

std::size_t synthetic_max_modes() { return kModes.size(); }

SyntheticTask make_synthetic_task(std::uint64_t seed, std::size_t n_inputs, std::size_t k_modes,
                                  std::size_t kg_size) {
    if (k_modes < 2)
        throw std::invalid_argument("synthetic task needs at least 2 modes");
    if (k_modes > kModes.size())
        throw std::invalid_argument("synthetic task supports at most " +
                                    std::to_string(kModes.size()) + " modes");
    if (n_inputs == 0)
        throw std::invalid_argument("synthetic task needs at least one input");
    const std::size_t needed = n_inputs * (1 + 2 * k_modes);
    if (kg_size < needed)
        throw std::invalid_argument("kg_size " + std::to_string(kg_size) + " is too small for " +
                                    std::to_string(n_inputs) + " inputs with " +
                                    std::to_string(k_modes) + " disjoint clusters (need " +
                                    std::to_string(needed) + ")");

    std::mt19937_64 rng(derive_seed(seed, "synthetic"));
    std::set<std::string> used = reserved_words();
    const auto fresh = [&] {
        for (;;) {
            std::string w = pseudo_word(rng);
            if (used.insert(w).second)
                return w;
        }
    };

    SyntheticTask task;
    std::vector<std::string> seeds;
    for (std::size_t i = 0; i < n_inputs; ++i) {
        Example ex;
        ex.id = "syn-" + std::to_string(i);
        const std::string s = fresh();
        seeds.push_back(s);
        ex.input = "tell me about " + s;
        task.kg.add_concept(s);
        for (std::size_t m = 0; m < k_modes; ++m) {
            const std::string a = fresh();
            const std::string b = fresh();
            task.kg.add_triple(s, kModes[m].relation, a);
            task.kg.add_triple(a, kModes[m].relation, b);
            ex.references.push_back(join_words({kModes[m].before, a, kModes[m].middle, b}));
        }
        task.dataset.push_back(std::move(ex));
    }
    for (std::size_t j = 0; j < kg_size - needed; ++j)
        task.kg.add_triple(seeds[j % n_inputs], "RelatedTo", fresh());
    return task;
}

}  // namespace mokge
