#pragma once

#include "curvens/curvature.hpp"
#include "curvens/learners.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace curvens {

enum class EnsembleKind { single, max, mean, median, lr, rf, gnb, svm, multistage };

std::string_view to_string(EnsembleKind k);
EnsembleKind parse_ensemble_kind(std::string_view s);

/// Needs a fitted model (the four learners and the multi-stage estimator).
bool is_supervised(EnsembleKind k);

struct EnsembleMethod {
    EnsembleKind kind = EnsembleKind::mean;
    Feature feature = Feature::z;  // multistage always uses d
    std::string scorer;            // required for single
    nlohmann::json params = nlohmann::json::object();  // learner hyperparameters or multistage z_grid

    /// Report name: "mean", "lr", "single:<scorer>", with "@d"/"@z" when the
    /// feature differs from the kind's default.
    std::string label() const;
};

/// Accepts "mean", "single:gpt2", "mean@d", or an object
/// {"kind": ..., "feature": ..., "scorer": ..., "params": {...}}.
EnsembleMethod parse_ensemble_method(const nlohmann::json & j);

/// max, mean or median of the sub-model scores.
double summarize(std::span<const double> scores, EnsembleKind kind);

struct MultiStageStage {
    std::string scorer;
    std::uint64_t complexity = 0;
    double mean_d = 0.0;
    double std_d = 0.0;
    double z_opt = 0.0;

    /// mean_d - z_opt * std_d; a zero std_d gives mean_d.
    double threshold() const;
};

/// Stages sorted by decreasing complexity, ties by name.
struct MultiStageModel {
    std::vector<MultiStageStage> stages;
};

/// {0.0, 0.25, ..., 3.0}
std::vector<double> default_z_grid();

/// Orders scorer names by decreasing complexity, breaking ties lexicographically.
std::vector<std::string> order_by_complexity(const std::map<std::string, std::uint64_t> & complexity);

/// Greedy stage-by-stage choice of z_opt maximizing training AUROC of the
/// multi-stage score; undecided later stages sit at the grid's middle element
/// and ties keep the smallest z.
MultiStageModel fit_multistage(const ScoreMatrix & train, const std::map<std::string, std::uint64_t> & complexity,
                               std::span<const double> z_grid);

/// Visits stages in order and stops after the first stage whose d falls below
/// its threshold; returns the mean of the visited d values.
double multistage_score(const MultiStageModel & model, std::span<const std::string> scorer_names,
                        std::span<const double> d_values);

std::vector<double> multistage_scores(const MultiStageModel & model, const ScoreMatrix & matrix);

nlohmann::json to_json(const MultiStageModel & model);
MultiStageModel multistage_from_json(const nlohmann::json & j);

using TrainedModel = std::variant<std::monostate, TrainedAggregator, MultiStageModel>;

FeatureMatrix feature_matrix(const ScoreMatrix & matrix, Feature f);
BinaryLabels binary_labels(const ScoreMatrix & matrix);

/// Fits the model a supervised method needs; returns monostate otherwise.
TrainedModel fit_ensemble(const EnsembleMethod & method, const ScoreMatrix & train,
                          const std::map<std::string, std::uint64_t> & complexity = {}, std::uint64_t seed = 0);

/// One score per sample; higher means more machine-like.
std::vector<double> apply_ensemble(const EnsembleMethod & method, const ScoreMatrix & matrix,
                                   const TrainedModel & trained = {});

void save_trained_model(const TrainedModel & model, const std::filesystem::path & path);
TrainedModel load_trained_model(const std::filesystem::path & path);

/// Drops one scorer column. Throws "unknown scorer: <name>".
ScoreMatrix exclude_scorer(const ScoreMatrix & matrix, std::string_view name);

/// Appends the named column of `source` (matched by sample id) to `target`.
ScoreMatrix restore_scorer(const ScoreMatrix & target, const ScoreMatrix & source, std::string_view name);

/// Keeps the given rows, in order.
ScoreMatrix select_rows(const ScoreMatrix & matrix, std::span<const std::size_t> rows);

}  // namespace curvens
