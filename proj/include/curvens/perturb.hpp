#pragma once

#include "curvens/corpus.hpp"
#include "curvens/lm.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace curvens {

class Rng;

struct PerturbationConfig {
    std::size_t span_length = 2;
    double mask_fraction = 0.15;
    std::size_t num_perturbations = 50;
    std::size_t buffer = 1;  // minimum gap in words between two spans
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const PerturbationConfig &) const = default;
};

nlohmann::json to_json(const PerturbationConfig & cfg);
PerturbationConfig perturbation_config_from_json(const nlohmann::json & j);

struct Span {
    std::size_t start = 0;
    std::size_t length = 0;

    bool operator==(const Span &) const = default;
};

/// Draws non-overlapping spans (separated by >= buffer words) uniformly among
/// the valid starts until ceil(mask_fraction * words) words are covered or no
/// valid start remains. Sorted by start.
std::vector<Span> select_mask_spans(std::size_t words, const PerturbationConfig & cfg, Rng & rng);

/// Collapses each span into a placeholder word.
MaskedText apply_mask(const TokenizedText & text, const std::vector<Span> & spans);

struct PerturbationSet {
    TextSample original;
    std::vector<std::string> perturbed;
    PerturbationConfig config;
    std::string filler_name;
};

/// Rewrite i depends only on (cfg.seed, sample.id, i).
std::string perturb_once(const TextSample & sample, const LanguageModel & filler, const PerturbationConfig & cfg,
                         std::size_t index);

PerturbationSet perturb_sample(const TextSample & sample, const LanguageModel & filler,
                               const PerturbationConfig & cfg);

/// Perturbs every sample, fanning out over `jobs` threads; output order follows input.
std::vector<PerturbationSet> perturb_dataset(const Dataset & dataset, const LanguageModel & filler,
                                             const PerturbationConfig & cfg, unsigned jobs = 1);

std::string to_jsonl(const std::vector<PerturbationSet> & sets);
std::vector<PerturbationSet> parse_perturbations_jsonl(std::string_view content);
void save_perturbations(const std::vector<PerturbationSet> & sets, const std::filesystem::path & path);
std::vector<PerturbationSet> load_perturbations(const std::filesystem::path & path);

}  // namespace curvens
