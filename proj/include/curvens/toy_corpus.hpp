#pragma once

#include "curvens/corpus.hpp"

#include <cstdint>
#include <string>

namespace curvens {

// A synthetic first-order Markov language: every word has a few preferred
// successors with Zipf weights, and with probability surprise_rate the next
// word is drawn uniformly instead. The transition structure depends only on
// language_seed, so corpora drawn with different seeds share one language.
struct ToyCorpusOptions {
    std::size_t documents = 100;
    std::size_t min_words = 60;
    std::size_t max_words = 100;
    std::uint64_t seed = 0;
    std::string id_prefix = "doc";
    std::string dataset = "toy";
    std::size_t vocab_size = 40;
    std::size_t successors = 4;
    double surprise_rate = 0.03;
    std::uint64_t language_seed = 0;
};

/// Deterministic documents of the toy language, all labeled human. Document
/// lengths are uniform in [min_words, max_words].
Dataset make_toy_corpus(const ToyCorpusOptions & options);

}  // namespace curvens
