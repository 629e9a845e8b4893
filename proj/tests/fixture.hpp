#pragma once

#include "curvens/corpus.hpp"
#include "curvens/toy_corpus.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace curvens::test {

// Toy-language experiment on disk: a human corpus drawn with frequent
// surprises, six cleaner training corpora, three base models (orders 2/3/4)
// that double as scorers, two extra scorers and an order-2 filler.
struct ToyExperiment {
    std::size_t human_documents = 100;
    std::size_t training_documents = 30;
    double human_surprise = 0.15;
    double training_surprise = 0.0;
    std::size_t num_perturbations = 50;
    std::uint64_t perturbation_seed = 7;
    std::uint64_t generation_seed = 11;
    std::uint64_t seed = 3;
    bool exclude_base = true;
    std::vector<std::string> methods = { "single:*", "mean", "median", "max" };

    // Writes the corpora and config.json into dir; returns the config path.
    std::filesystem::path write(const std::filesystem::path & dir) const {
        ToyCorpusOptions human;
        human.documents = human_documents;
        human.seed = 1;
        human.id_prefix = "human";
        human.dataset = "news";
        human.surprise_rate = human_surprise;
        save_jsonl(make_toy_corpus(human), dir / "human.jsonl");
        for (int i = 1; i <= 6; ++i) {
            ToyCorpusOptions t;
            t.documents = training_documents;
            t.seed = 100 + static_cast<std::uint64_t>(i);
            t.id_prefix = "train" + std::to_string(i);
            t.surprise_rate = training_surprise;
            save_jsonl(make_toy_corpus(t), dir / ("train" + std::to_string(i) + ".jsonl"));
        }
        nlohmann::json cfg = config();
        const auto path = dir / "config.json";
        std::ofstream(path) << cfg.dump(2) << "\n";
        return path;
    }

    nlohmann::json config() const {
        auto ngram = [](const std::string & name, int train, int order, double k) {
            return nlohmann::json{ { "name", name },
                                   { "params", { { "train", "train" + std::to_string(train) + ".jsonl" },
                                                 { "order", order },
                                                 { "k", k } } } };
        };
        const nlohmann::json bases = { ngram("b1", 1, 2, 1e-4), ngram("b2", 2, 3, 1e-4), ngram("b3", 3, 4, 1e-4) };
        nlohmann::json scorers = bases;
        scorers.push_back(ngram("s4", 4, 2, 1e-4));
        scorers.push_back(ngram("s5", 5, 3, 1e-4));
        return {
            { "datasets", { { { "name", "news" }, { "path", "human.jsonl" } } } },
            { "base_models", bases },
            { "scoring_models", scorers },
            { "filler", ngram("filler", 6, 2, 0.01) },
            { "perturbation", { { "num_perturbations", num_perturbations }, { "seed", perturbation_seed } } },
            { "generation", { { "prompt_tokens", 30 }, { "seed", generation_seed } } },
            { "methods", methods },
            { "exclude_base_from_scorers", exclude_base },
            { "seed", seed },
        };
    }
};

}  // namespace curvens::test
