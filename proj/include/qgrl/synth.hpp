#pragma once

#include <cstdint>

#include "qgrl/corpus.hpp"

namespace qgrl {

// Deterministic synthetic corpus of templated factoid sentences. Every
// example carries a single-token year answer span and one to three reference
// questions, each of which shares at least one 4-gram with the sentence.
std::vector<Example> synth_corpus(int n, uint64_t seed);

}  // namespace qgrl
