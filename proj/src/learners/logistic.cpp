#include "curvens/error.hpp"
#include "detail.hpp"

#include <cmath>

namespace curvens {

namespace {

// log(1 + exp(x)) without overflow.
double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

LogisticObjective logistic_objective(const Eigen::VectorXd & theta, const FeatureMatrix & X, const BinaryLabels & y,
                                     double C, Penalty penalty) {
    const Eigen::Index m = X.cols();
    if (theta.size() != m + 1) {
        throw Error("logistic_objective: theta must have M + 1 entries");
    }
    const auto w = theta.head(m);
    const double b = theta(m);
    LogisticObjective out;
    out.gradient = Eigen::VectorXd::Zero(m + 1);
    if (penalty == Penalty::l2) {
        out.value = 0.5 * w.squaredNorm() / C;
        out.gradient.head(m) = w / C;
    }
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const double sign = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
        const double margin = sign * (X.row(i).dot(w) + b);
        out.value += softplus(-margin);
        const double coef = -sign * detail::sigmoid(-margin);
        out.gradient.head(m) += coef * X.row(i).transpose();
        out.gradient(m) += coef;
    }
    return out;
}

TrainedAggregator fit_logistic(const FeatureMatrix & X, const BinaryLabels & y, std::vector<std::string> names,
                               const LogisticHyper & hyper) {
    detail::check_training_data(X, y, names.size());
    if (!(hyper.C > 0.0)) {
        throw Error("fit_logistic: C must be > 0");
    }
    const auto stats = Standardizer::fit(X);
    const FeatureMatrix Xs = stats.apply(X);
    const Eigen::Index m = Xs.cols();
    const Eigen::Index n = Xs.rows();

    // Damped Newton with Armijo backtracking.
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(m + 1);
    auto obj = logistic_objective(theta, Xs, y, hyper.C, hyper.penalty);
    int iter = 0;
    for (; iter < hyper.max_iter; ++iter) {
        if (obj.gradient.norm() < 1e-8) {
            break;
        }
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m + 1);
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::VectorXd xi(m + 1);
            xi.head(m) = Xs.row(i).transpose();
            xi(m) = 1.0;
            const double p = detail::sigmoid(Xs.row(i).dot(theta.head(m)) + theta(m));
            H.noalias() += p * (1.0 - p) * xi * xi.transpose();
        }
        if (hyper.penalty == Penalty::l2) {
            H.topLeftCorner(m, m).diagonal().array() += 1.0 / hyper.C;
        }
        H.diagonal().array() += 1e-10;
        const Eigen::VectorXd step = -H.ldlt().solve(obj.gradient);
        const double slope = obj.gradient.dot(step);
        if (!step.allFinite() || slope >= 0.0) {
            break;
        }
        double t = 1.0;
        bool moved = false;
        while (t > 1e-12) {
            const Eigen::VectorXd cand = theta + t * step;
            auto cand_obj = logistic_objective(cand, Xs, y, hyper.C, hyper.penalty);
            if (cand_obj.value <= obj.value + 1e-4 * t * slope) {
                theta = cand;
                obj = std::move(cand_obj);
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if (!moved) {
            break;
        }
    }

    LogisticParams params;
    params.weights = theta.head(m);
    params.intercept = theta(m);
    params.iterations = iter;

    TrainedAggregator model;
    model.method = Method::lr;
    model.feature_names = std::move(names);
    model.parameters = std::move(params);
    model.hyperparameters = { { "C", hyper.C }, { "penalty", hyper.penalty == Penalty::l2 ? "l2" : "none" } };
    model.train_stats = stats;
    return model;
}

namespace detail {

std::vector<double> logistic_decision(const TrainedAggregator & model, const FeatureMatrix & X) {
    const auto & p = std::get<LogisticParams>(model.parameters);
    const FeatureMatrix Xs = model.train_stats->apply(X);
    std::vector<double> out(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        out[static_cast<std::size_t>(i)] = Xs.row(i).dot(p.weights) + p.intercept;
    }
    return out;
}

}  // namespace detail

}  // namespace curvens
