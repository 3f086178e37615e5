#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mokge/dataset.hpp"
#include "mokge/kg.hpp"

namespace mokge {

struct SyntheticTask {
    std::vector<Example> dataset;
    KnowledgeGraph kg;
};

/// Toy one-to-many task. Input i mentions a seed concept s_i; for every mode m
/// the graph holds a chain s_i -[rel_m]-> a_im -[rel_m]-> b_im, and reference m
/// is a fixed template for mode m filled with a_im and b_im. Concepts beyond the
/// n_inputs * (1 + 2 * k_modes) chain nodes become "RelatedTo" distractors of
/// the seeds. Concept surfaces are made-up words, so only they ground.
SyntheticTask make_synthetic_task(std::uint64_t seed, std::size_t n_inputs, std::size_t k_modes,
                                  std::size_t kg_size);

/// Number of modes with a built-in template.
std::size_t synthetic_max_modes();

}  // namespace mokge
