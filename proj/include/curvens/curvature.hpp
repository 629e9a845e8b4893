#pragma once

#include "curvens/corpus.hpp"
#include "curvens/lm.hpp"
#include "curvens/perturb.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace curvens {

/// z assigned when the perturbed log-probs have zero spread but d != 0.
inline constexpr double z_cap = 1e6;

/// d = original - mean(perturbed).
double discrepancy(double original_lp, std::span<const double> perturbed_lps);

/// Sample standard deviation (N - 1 denominator).
double sample_stddev(std::span<const double> values);

/// z = d / stddev(perturbed). Zero spread gives 0 when d == 0 and
/// sign(d) * z_cap otherwise (with a warning).
double normalized_discrepancy(double original_lp, std::span<const double> perturbed_lps);

enum class Feature { d, z };

std::string_view to_string(Feature f);
Feature parse_feature(std::string_view s);

struct SubModelScore {
    std::string scorer_name;
    double original_logprob = 0.0;
    std::vector<double> perturbed_logprobs;
    double d = 0.0;
    double z = 0.0;
    std::string error;  // non-empty when scoring this cell failed

    bool ok() const { return error.empty(); }
    double feature(Feature f) const { return f == Feature::d ? d : z; }
};

/// Fills d and z from the raw log-probs.
SubModelScore make_cell(std::string scorer_name, double original_lp, std::vector<double> perturbed_lps);

struct ScoreMatrix {
    std::vector<std::string> sample_ids;
    std::vector<Label> labels;
    std::vector<std::string> scorer_names;
    std::vector<std::vector<SubModelScore>> cells;  // [sample][scorer]

    std::size_t rows() const { return sample_ids.size(); }
    std::size_t cols() const { return scorer_names.size(); }

    /// Throws "unknown scorer: <name>".
    std::size_t scorer_index(std::string_view name) const;

    /// Checks shape consistency and scorer-name uniqueness.
    void validate() const;

    std::vector<double> column(std::size_t scorer, Feature f) const;
    std::vector<double> row(std::size_t sample, Feature f) const;

    /// Drops every sample with at least one failed cell.
    ScoreMatrix complete_rows() const;

    bool operator==(const ScoreMatrix & other) const;
};

struct BuildOptions {
    unsigned jobs = 1;
    bool strict = false;  // fail on the first failed cell instead of recording it
};

/// Scores the shared perturbation sets under every scorer: N + 1 log-prob
/// evaluations per (sample, scorer). Fails only when a scorer fails on every
/// sample, unless strict.
ScoreMatrix build_score_matrix(const std::vector<PerturbationSet> & sets, const std::vector<ModelPtr> & scorers,
                               const BuildOptions & options = {});

/// Recomputes d and z of every cell from its persisted raw log-probs.
ScoreMatrix recompute_scores(const ScoreMatrix & matrix);

/// CSV: sample_id,label,scorer,original_logprob,d,z,n_perturbations
std::string to_csv(const ScoreMatrix & matrix);
/// Sidecar JSONL with the raw perturbed log-probs, one line per cell.
std::string raw_scores_jsonl(const ScoreMatrix & matrix);

/// Sidecar path next to a score CSV: "<csv>.raw.jsonl".
std::filesystem::path raw_scores_path(const std::filesystem::path & csv);

void save_score_matrix(const ScoreMatrix & matrix, const std::filesystem::path & csv);

/// Reads the CSV and, when present, the raw sidecar.
ScoreMatrix load_score_matrix(const std::filesystem::path & csv);
ScoreMatrix parse_score_matrix(std::string_view csv, std::string_view raw_jsonl = {});

}  // namespace curvens
