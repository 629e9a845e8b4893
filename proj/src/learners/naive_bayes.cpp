#include "curvens/error.hpp"
#include "detail.hpp"

#include <cmath>
#include <numbers>

namespace curvens {

TrainedAggregator fit_gnb(const FeatureMatrix & X, const BinaryLabels & y, std::vector<std::string> names,
                          const GaussianNbHyper & hyper) {
    detail::check_training_data(X, y, names.size());
    if (!(hyper.var_smoothing >= 0.0)) {
        throw Error("fit_gnb: var_smoothing must be >= 0");
    }
    const Eigen::Index m = X.cols();
    const double n = static_cast<double>(X.rows());

    // Smoothing is relative to the largest per-feature variance of the whole set.
    double max_var = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
        const double mu = X.col(j).mean();
        max_var = std::max(max_var, (X.col(j).array() - mu).square().sum() / n);
    }
    const double epsilon = hyper.var_smoothing * max_var;

    GaussianNbParams p;
    p.mean = Eigen::MatrixXd::Zero(2, m);
    p.var = Eigen::MatrixXd::Zero(2, m);
    std::array<double, 2> count{ 0.0, 0.0 };
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const int c = y[static_cast<std::size_t>(i)];
        count[static_cast<std::size_t>(c)] += 1.0;
        p.mean.row(c) += X.row(i);
    }
    for (int c = 0; c < 2; ++c) {
        p.mean.row(c) /= count[static_cast<std::size_t>(c)];
    }
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const int c = y[static_cast<std::size_t>(i)];
        p.var.row(c) += (X.row(i) - p.mean.row(c)).array().square().matrix();
    }
    for (int c = 0; c < 2; ++c) {
        p.var.row(c) /= count[static_cast<std::size_t>(c)];
        p.var.row(c).array() += epsilon;
        p.class_prior[static_cast<std::size_t>(c)] = count[static_cast<std::size_t>(c)] / n;
    }
    if ((p.var.array() <= 0.0).any()) {
        throw Error("fit_gnb: singular variance (a feature is constant within a class; raise var_smoothing)");
    }

    TrainedAggregator model;
    model.method = Method::gnb;
    model.feature_names = std::move(names);
    model.parameters = std::move(p);
    model.hyperparameters = { { "var_smoothing", hyper.var_smoothing } };
    return model;
}

namespace detail {

// Log-odds log P(machine, x) - log P(human, x).
std::vector<double> gnb_decision(const TrainedAggregator & model, const FeatureMatrix & X) {
    const auto & p = std::get<GaussianNbParams>(model.parameters);
    std::vector<double> out(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        std::array<double, 2> jll{};
        for (int c = 0; c < 2; ++c) {
            double s = std::log(p.class_prior[static_cast<std::size_t>(c)]);
            for (Eigen::Index j = 0; j < X.cols(); ++j) {
                const double var = p.var(c, j);
                const double diff = X(i, j) - p.mean(c, j);
                s += -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * diff * diff / var;
            }
            jll[static_cast<std::size_t>(c)] = s;
        }
        out[static_cast<std::size_t>(i)] = jll[1] - jll[0];
    }
    return out;
}

}  // namespace detail

}  // namespace curvens
