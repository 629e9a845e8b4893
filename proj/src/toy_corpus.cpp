#include "curvens/toy_corpus.hpp"

#include "curvens/error.hpp"
#include "curvens/rng.hpp"

#include <array>
#include <vector>

namespace curvens {

namespace {

constexpr std::array syllables{ "ka", "lo", "mer", "tan", "vi", "dro", "sel", "bu", "ni", "gor",
                                "pa", "ret", "shi", "ul", "fen", "ko", "mar", "ti", "zel", "wen" };

struct Language {
    std::vector<std::string> words;
    std::vector<std::vector<std::size_t>> successors;  // preferred next words, most likely first
    std::vector<double> cumulative;                    // Zipf weights over successor rank
};

Language make_language(const ToyCorpusOptions & o) {
    Language lang;
    Rng rng(derive_seed(o.language_seed, "toy-language"));
    while (lang.words.size() < o.vocab_size) {
        std::string w;
        const std::size_t n = 2 + rng.below(2);
        for (std::size_t i = 0; i < n; ++i) {
            w += syllables[rng.below(syllables.size())];
        }
        bool fresh = true;
        for (const auto & existing : lang.words) {
            fresh = fresh && existing != w;
        }
        if (fresh) {
            lang.words.push_back(std::move(w));
        }
    }
    for (std::size_t a = 0; a < o.vocab_size; ++a) {
        std::vector<std::size_t> pool(o.vocab_size);
        for (std::size_t i = 0; i < pool.size(); ++i) {
            pool[i] = i;
        }
        for (std::size_t i = 0; i < o.successors; ++i) {
            std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
        }
        lang.successors.emplace_back(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(o.successors));
    }
    double total = 0.0;
    for (std::size_t r = 0; r < o.successors; ++r) {
        total += 1.0 / static_cast<double>(r + 1);
        lang.cumulative.push_back(total);
    }
    for (double & c : lang.cumulative) {
        c /= total;
    }
    return lang;
}

}  // namespace

Dataset make_toy_corpus(const ToyCorpusOptions & o) {
    if (o.min_words < 1 || o.max_words < o.min_words) {
        throw ConfigError("toy corpus: need 1 <= min_words <= max_words");
    }
    if (o.vocab_size < 2 || o.successors < 1 || o.successors > o.vocab_size) {
        throw ConfigError("toy corpus: need vocab_size >= 2 and 1 <= successors <= vocab_size");
    }
    if (!(o.surprise_rate >= 0.0 && o.surprise_rate < 1.0)) {
        throw ConfigError("toy corpus: surprise_rate must lie in [0, 1)");
    }
    const Language lang = make_language(o);
    Dataset out;
    out.name = o.dataset;
    for (std::size_t d = 0; d < o.documents; ++d) {
        Rng rng(derive_seed(o.seed, o.id_prefix, d));
        const std::size_t length = o.min_words + rng.below(o.max_words - o.min_words + 1);
        std::size_t w = rng.below(o.vocab_size);
        std::string text = lang.words[w];
        for (std::size_t i = 1; i < length; ++i) {
            if (rng.uniform() < o.surprise_rate) {
                w = rng.below(o.vocab_size);
            } else {
                const double u = rng.uniform();
                std::size_t r = 0;
                while (r + 1 < lang.cumulative.size() && u >= lang.cumulative[r]) {
                    ++r;
                }
                w = lang.successors[w][r];
            }
            text += " " + lang.words[w];
        }
        TextSample s;
        s.id = o.id_prefix + "-" + std::to_string(d);
        s.text = std::move(text);
        s.label = Label::human;
        s.dataset = o.dataset;
        out.add(std::move(s));
    }
    return out;
}

}  // namespace curvens
