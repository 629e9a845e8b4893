#pragma once

#include "curvens/corpus.hpp"
#include "curvens/curvature.hpp"
#include "curvens/ensemble.hpp"
#include "curvens/lm.hpp"
#include "curvens/perturb.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace curvens {

struct GenerationConfig {
    std::size_t prompt_tokens = 30;
    // Unset: continue for as many words as the human sample has after its prompt.
    std::optional<std::size_t> max_tokens;
    double temperature = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

nlohmann::json to_json(const GenerationConfig & cfg);
GenerationConfig generation_config_from_json(const nlohmann::json & j);

/// One machine sample per eligible human sample, interleaved after it. The
/// continuation seed is derived from (cfg.seed, sample id). Samples shorter
/// than the prompt are skipped with a warning; the call fails when more than
/// half of the attempted generations fail.
Dataset make_synthetic_dataset(const Dataset & human, const LanguageModel & base, const GenerationConfig & cfg,
                               unsigned jobs = 1);

struct DatasetRef {
    std::string name;
    std::filesystem::path path;
};

struct ExperimentConfig {
    std::vector<DatasetRef> datasets;
    std::vector<ModelSpec> base_models;
    std::vector<ModelSpec> scoring_models;
    ModelSpec filler;
    PerturbationConfig perturbation;
    GenerationConfig generation;
    std::vector<EnsembleMethod> methods;
    bool exclude_base_from_scorers = true;
    double train_fraction = 0.5;
    std::uint64_t seed = 0;
    std::optional<std::size_t> max_samples;  // cap on human samples per dataset

    void validate() const;
};

/// Relative paths resolve against base_dir. Unknown keys are rejected.
ExperimentConfig experiment_config_from_json(const nlohmann::json & j, const std::filesystem::path & base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path & path);
nlohmann::json to_json(const ExperimentConfig & cfg);

struct ReportCell {
    std::string base_model;
    std::string dataset;
    std::string method;
    double auroc = 0.0;  // NaN when the cell failed
    std::size_t n_test = 0;
    std::size_t n_train = 0;
    std::uint64_t seed = 0;
    std::string error;

    bool ok() const { return error.empty(); }
    bool operator==(const ReportCell & other) const;
};

struct ExperimentReport {
    std::vector<ReportCell> cells;  // (base, dataset) major, methods in config order
    std::string config_hash;
    std::uint64_t seed = 0;

    /// Method labels in first-appearance order.
    std::vector<std::string> methods() const;
    /// Mean AUROC of the method's cells; NaN when any of them failed.
    double average(const std::string & method) const;
    bool has_failures() const;
    bool operator==(const ExperimentReport &) const = default;
};

enum class ReportFormat { csv, json, markdown };

ReportFormat parse_report_format(std::string_view s);

/// csv: one row per cell, base_model,dataset,method,auroc,n_test,n_train,seed.
/// json: cells plus per-method averages. markdown: one row per (base, dataset),
/// one column per method and an Average row, 2-decimal display. Failed cells
/// render as NA (null in json).
std::string emit_report(const ExperimentReport & report, ReportFormat format);
ExperimentReport parse_report_json(std::string_view json);

struct MethodScores {
    std::string method;
    std::vector<std::string> sample_ids;
    std::vector<Label> labels;
    std::vector<double> scores;
};

/// Everything computed for one (base, dataset) pair.
struct CellArtifacts {
    std::string base_model;
    std::string dataset;
    ScoreMatrix matrix;
    std::vector<MethodScores> scores;
};

/// CSV: sample_id,label,method,score
std::string scores_csv(const std::vector<MethodScores> & scores);

struct ExperimentOutcome {
    ExperimentReport report;
    std::vector<CellArtifacts> cells;
};

struct RunOptions {
    unsigned jobs = 1;
};

/// Runs every (base, dataset) pair. Failures are recorded in the affected
/// report cells instead of aborting the grid.
ExperimentOutcome run_experiment(const ExperimentConfig & cfg, const RunOptions & options = {});

/// Stratified split: round(train_fraction * class size) rows of each class go
/// to training (at least one, leaving at least one). Both lists ascending.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(const std::vector<Label> & labels,
                                                                               double train_fraction,
                                                                               std::uint64_t seed);

}  // namespace curvens
