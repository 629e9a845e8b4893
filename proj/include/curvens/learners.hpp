#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace curvens {

/// Rows are samples, columns are features (one per scorer).
using FeatureMatrix = Eigen::MatrixXd;
/// 1 = machine, 0 = human.
using BinaryLabels = std::vector<int>;

enum class Method { lr, rf, gnb, svm };

std::string_view to_string(Method m);
Method parse_method(std::string_view s);

enum class Penalty { l2, none };
enum class Kernel { linear, rbf };

struct LogisticHyper {
    double C = 1.0;
    Penalty penalty = Penalty::l2;
    int max_iter = 100;
};

struct GaussianNbHyper {
    double var_smoothing = 1e-9;
};

struct ForestHyper {
    int n_estimators = 100;
    std::optional<int> max_depth;  // unlimited when empty
    int min_samples_split = 2;
    bool bootstrap = true;
    std::uint64_t seed = 0;
};

struct SvmHyper {
    double C = 1.0;
    Kernel kernel = Kernel::rbf;
    std::optional<double> gamma;  // empty means "scale": 1 / (M * Var(X))
};

/// Per-column train-set mean and scale (population std, 1 for constant columns).
struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;

    static Standardizer fit(const FeatureMatrix & X);
    FeatureMatrix apply(const FeatureMatrix & X) const;
};

struct LogisticParams {
    Eigen::VectorXd weights;  // on standardized features
    double intercept = 0.0;
    int iterations = 0;
};

struct GaussianNbParams {
    std::array<double, 2> class_prior{};  // [human, machine]
    Eigen::MatrixXd mean;                  // 2 x M
    Eigen::MatrixXd var;                   // 2 x M, smoothing included
};

struct TreeNode {
    int feature = -1;  // -1 for leaves
    double threshold = 0.0;  // x <= threshold goes left
    int left = -1;
    int right = -1;
    double value = 0.0;  // fraction of machine samples reaching the node
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double predict(const Eigen::Ref<const Eigen::RowVectorXd> & x) const;
};

struct ForestParams {
    std::vector<DecisionTree> trees;
};

struct SvmParams {
    Kernel kernel = Kernel::rbf;
    double gamma = 1.0;
    Eigen::MatrixXd support_vectors;  // standardized
    Eigen::VectorXd dual_coef;        // alpha_i * y_i
    double bias = 0.0;                // f(x) = sum coef_i K(sv_i, x) + bias
    double platt_a = 0.0;             // P(machine) = 1 / (1 + exp(a f + b))
    double platt_b = 0.0;
};

struct TrainedAggregator {
    Method method = Method::lr;
    std::vector<std::string> feature_names;
    std::variant<LogisticParams, GaussianNbParams, ForestParams, SvmParams> parameters;
    nlohmann::json hyperparameters = nlohmann::json::object();
    std::optional<Standardizer> train_stats;
};

// Fitting. Every fit validates X (finite, rows == labels) and y (both classes
// present) and is a pure function of its arguments.
TrainedAggregator fit_logistic(const FeatureMatrix & X, const BinaryLabels & y, std::vector<std::string> names,
                               const LogisticHyper & hyper = {});
TrainedAggregator fit_gnb(const FeatureMatrix & X, const BinaryLabels & y, std::vector<std::string> names,
                          const GaussianNbHyper & hyper = {});
TrainedAggregator fit_random_forest(const FeatureMatrix & X, const BinaryLabels & y, std::vector<std::string> names,
                                    const ForestHyper & hyper = {});
TrainedAggregator fit_svm(const FeatureMatrix & X, const BinaryLabels & y, std::vector<std::string> names,
                          const SvmHyper & hyper = {});

/// Dispatches on method; `hyper` uses the grid axis names (C, penalty, ...).
TrainedAggregator fit_aggregator(Method method, const FeatureMatrix & X, const BinaryLabels & y,
                                 std::vector<std::string> names, const nlohmann::json & hyper = nlohmann::json::object(),
                                 std::uint64_t seed = 0);

/// P(machine | x) per row; columns must follow model.feature_names.
std::vector<double> predict_proba(const TrainedAggregator & model, const FeatureMatrix & X);

/// Realigns columns by name before predicting. Throws "missing feature column: <name>".
std::vector<double> predict_proba(const TrainedAggregator & model, const FeatureMatrix & X,
                                  std::span<const std::string> column_names);

/// Raw decision value: logit for lr, SVM margin, log-odds for gnb, mean leaf value for rf.
std::vector<double> decision_function(const TrainedAggregator & model, const FeatureMatrix & X);

nlohmann::json to_json(const TrainedAggregator & model);
TrainedAggregator aggregator_from_json(const nlohmann::json & j);
void save_aggregator(const TrainedAggregator & model, const std::filesystem::path & path);
TrainedAggregator load_aggregator(const std::filesystem::path & path);

LogisticHyper logistic_hyper_from_json(const nlohmann::json & j);
GaussianNbHyper gnb_hyper_from_json(const nlohmann::json & j);
ForestHyper forest_hyper_from_json(const nlohmann::json & j, std::uint64_t seed);
SvmHyper svm_hyper_from_json(const nlohmann::json & j);

// Exposed for gradient checks: objective over theta = [w..., b] on the given
// (already standardized) features.
struct LogisticObjective {
    double value = 0.0;
    Eigen::VectorXd gradient;
};
LogisticObjective logistic_objective(const Eigen::VectorXd & theta, const FeatureMatrix & X, const BinaryLabels & y,
                                     double C, Penalty penalty);

// Exposed SVM internals: dual solve on a precomputed kernel matrix.
Eigen::MatrixXd kernel_matrix(const FeatureMatrix & A, const FeatureMatrix & B, Kernel kernel, double gamma);

struct SvmDualSolution {
    Eigen::VectorXd alpha;
    double bias = 0.0;
    int iterations = 0;
};
SvmDualSolution solve_svm_dual(const Eigen::MatrixXd & K, const BinaryLabels & y, double C, double tolerance = 1e-3);

/// Platt sigmoid fit on decision values; returns (a, b) with P = 1 / (1 + exp(a f + b)).
std::pair<double, double> fit_platt(std::span<const double> decision, const BinaryLabels & y);

struct HyperGrid {
    Method method = Method::lr;
    std::vector<std::pair<std::string, std::vector<nlohmann::json>>> axes;

    /// Throws when an axis name is not a hyperparameter of the method or an axis is empty.
    void validate() const;
    /// Cartesian product, last axis varying fastest.
    std::vector<nlohmann::json> points() const;
};

HyperGrid default_grid(Method method);

struct GridSearchResult {
    nlohmann::json best;
    double cv_score = 0.0;
    std::vector<std::pair<nlohmann::json, double>> evaluated;
};

/// Assigns every row to one of k folds, class by class, after a seeded shuffle.
std::vector<int> stratified_folds(const BinaryLabels & y, int folds, std::uint64_t seed);

/// Exhaustive search scored by mean held-out AUROC over stratified folds;
/// ties keep the earliest grid point.
GridSearchResult grid_search(const HyperGrid & grid, const FeatureMatrix & X, const BinaryLabels & y,
                             const std::vector<std::string> & names, int folds, std::uint64_t seed, unsigned jobs = 1);

}  // namespace curvens
