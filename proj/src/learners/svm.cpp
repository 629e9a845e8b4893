#include "curvens/error.hpp"
#include "detail.hpp"

#include <algorithm>
#include <cmath>

namespace curvens {

namespace {

constexpr double tau = 1e-12;

}  // namespace

Eigen::MatrixXd kernel_matrix(const FeatureMatrix & A, const FeatureMatrix & B, Kernel kernel, double gamma) {
    Eigen::MatrixXd K = A * B.transpose();
    if (kernel == Kernel::linear) {
        return K;
    }
    const Eigen::VectorXd an = A.rowwise().squaredNorm();
    const Eigen::VectorXd bn = B.rowwise().squaredNorm();
    for (Eigen::Index i = 0; i < K.rows(); ++i) {
        for (Eigen::Index j = 0; j < K.cols(); ++j) {
            const double d2 = std::max(0.0, an(i) + bn(j) - 2.0 * K(i, j));
            K(i, j) = std::exp(-gamma * d2);
        }
    }
    return K;
}

// SMO with second-order working-set selection (Fan, Chen & Lin), solving
//   min 1/2 a'Qa - e'a   s.t. 0 <= a <= C, y'a = 0,   Q_ij = y_i y_j K_ij.
SvmDualSolution solve_svm_dual(const Eigen::MatrixXd & K, const BinaryLabels & labels, double C, double tolerance) {
    const Eigen::Index n = K.rows();
    if (K.cols() != n || static_cast<Eigen::Index>(labels.size()) != n) {
        throw Error("solve_svm_dual: kernel/label size mismatch");
    }
    if (!(C > 0.0)) {
        throw Error("solve_svm_dual: C must be > 0");
    }
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        y(i) = labels[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
    }
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd G = Eigen::VectorXd::Constant(n, -1.0);
    const auto upper = [&](Eigen::Index t) { return alpha(t) >= C; };
    const auto lower = [&](Eigen::Index t) { return alpha(t) <= 0.0; };

    const long max_iter = std::max<long>(10'000'000L, 100L * static_cast<long>(n));
    long iter = 0;
    double violation = INFINITY;
    for (; iter < max_iter; ++iter) {
        double gmax = -INFINITY;
        double gmax2 = -INFINITY;
        Eigen::Index i = -1;
        for (Eigen::Index t = 0; t < n; ++t) {
            if (y(t) > 0 ? !upper(t) : !lower(t)) {
                const double v = -y(t) * G(t);
                if (v >= gmax) {
                    gmax = v;
                    i = t;
                }
            }
        }
        Eigen::Index j = -1;
        double best_obj = INFINITY;
        for (Eigen::Index t = 0; t < n; ++t) {
            if (y(t) > 0 ? lower(t) : upper(t)) {
                continue;
            }
            const double v = y(t) * G(t);
            gmax2 = std::max(gmax2, v);
            if (i < 0) {
                continue;
            }
            const double grad_diff = gmax + v;
            if (grad_diff > 0.0) {
                double quad = K(i, i) + K(t, t) - 2.0 * K(i, t);
                if (quad <= 0.0) {
                    quad = tau;
                }
                const double obj = -(grad_diff * grad_diff) / quad;
                if (obj <= best_obj) {
                    best_obj = obj;
                    j = t;
                }
            }
        }
        violation = gmax + gmax2;
        if (i < 0 || j < 0 || violation < tolerance) {
            break;
        }

        const double old_ai = alpha(i);
        const double old_aj = alpha(j);
        const double qij = y(i) * y(j) * K(i, j);
        if (y(i) != y(j)) {
            double quad = K(i, i) + K(j, j) + 2.0 * qij;
            if (quad <= 0.0) {
                quad = tau;
            }
            const double delta = (-G(i) - G(j)) / quad;
            const double diff = alpha(i) - alpha(j);
            alpha(i) += delta;
            alpha(j) += delta;
            if (diff > 0.0) {
                if (alpha(j) < 0.0) {
                    alpha(j) = 0.0;
                    alpha(i) = diff;
                }
            } else if (alpha(i) < 0.0) {
                alpha(i) = 0.0;
                alpha(j) = -diff;
            }
            if (diff > 0.0) {
                if (alpha(i) > C) {
                    alpha(i) = C;
                    alpha(j) = C - diff;
                }
            } else if (alpha(j) > C) {
                alpha(j) = C;
                alpha(i) = C + diff;
            }
        } else {
            double quad = K(i, i) + K(j, j) - 2.0 * qij;
            if (quad <= 0.0) {
                quad = tau;
            }
            const double delta = (G(i) - G(j)) / quad;
            const double sum = alpha(i) + alpha(j);
            alpha(i) -= delta;
            alpha(j) += delta;
            if (sum > C) {
                if (alpha(i) > C) {
                    alpha(i) = C;
                    alpha(j) = sum - C;
                }
            } else if (alpha(j) < 0.0) {
                alpha(j) = 0.0;
                alpha(i) = sum;
            }
            if (sum > C) {
                if (alpha(j) > C) {
                    alpha(j) = C;
                    alpha(i) = sum - C;
                }
            } else if (alpha(i) < 0.0) {
                alpha(i) = 0.0;
                alpha(j) = sum;
            }
        }
        const double dai = alpha(i) - old_ai;
        const double daj = alpha(j) - old_aj;
        for (Eigen::Index t = 0; t < n; ++t) {
            G(t) += y(t) * (y(i) * K(i, t) * dai + y(j) * K(j, t) * daj);
        }
    }
    if (iter >= max_iter) {
        throw Error("svm: no convergence after " + std::to_string(iter) + " iterations (KKT violation " +
                    std::to_string(violation) + ")");
    }

    double ub = INFINITY;
    double lb = -INFINITY;
    double sum_free = 0.0;
    int free = 0;
    for (Eigen::Index t = 0; t < n; ++t) {
        const double yg = y(t) * G(t);
        if (upper(t)) {
            if (y(t) < 0) {
                ub = std::min(ub, yg);
            } else {
                lb = std::max(lb, yg);
            }
        } else if (lower(t)) {
            if (y(t) > 0) {
                ub = std::min(ub, yg);
            } else {
                lb = std::max(lb, yg);
            }
        } else {
            ++free;
            sum_free += yg;
        }
    }
    const double rho = free > 0 ? sum_free / free : 0.5 * (ub + lb);

    SvmDualSolution sol;
    sol.alpha = alpha;
    sol.bias = -rho;
    sol.iterations = static_cast<int>(iter);
    return sol;
}

// Lin, Lin & Weng's regularized Newton variant of Platt scaling.
std::pair<double, double> fit_platt(std::span<const double> decision, const BinaryLabels & y) {
    const std::size_t n = decision.size();
    double prior1 = 0.0;
    for (int v : y) {
        prior1 += v;
    }
    const double prior0 = static_cast<double>(n) - prior1;
    const double hi = (prior1 + 1.0) / (prior1 + 2.0);
    const double lo = 1.0 / (prior0 + 2.0);
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = y[i] == 1 ? hi : lo;
    }
    const auto objective = [&](double a, double b) {
        double f = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double fapb = decision[i] * a + b;
            f += fapb >= 0.0 ? t[i] * fapb + std::log1p(std::exp(-fapb)) : (t[i] - 1.0) * fapb + std::log1p(std::exp(fapb));
        }
        return f;
    };
    double a = 0.0;
    double b = std::log((prior0 + 1.0) / (prior1 + 1.0));
    double fval = objective(a, b);
    for (int iter = 0; iter < 100; ++iter) {
        double h11 = 1e-12, h22 = 1e-12, h21 = 0.0, g1 = 0.0, g2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double fapb = decision[i] * a + b;
            double p, q;
            if (fapb >= 0.0) {
                p = std::exp(-fapb) / (1.0 + std::exp(-fapb));
                q = 1.0 / (1.0 + std::exp(-fapb));
            } else {
                p = 1.0 / (1.0 + std::exp(fapb));
                q = std::exp(fapb) / (1.0 + std::exp(fapb));
            }
            const double d2 = p * q;
            h11 += decision[i] * decision[i] * d2;
            h22 += d2;
            h21 += decision[i] * d2;
            const double d1 = t[i] - p;
            g1 += decision[i] * d1;
            g2 += d1;
        }
        if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) {
            break;
        }
        const double det = h11 * h22 - h21 * h21;
        const double da = -(h22 * g1 - h21 * g2) / det;
        const double db = -(-h21 * g1 + h11 * g2) / det;
        const double gd = g1 * da + g2 * db;
        double step = 1.0;
        while (step >= 1e-10) {
            const double na = a + step * da;
            const double nb = b + step * db;
            const double nf = objective(na, nb);
            if (nf < fval + 1e-4 * step * gd) {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step *= 0.5;
        }
        if (step < 1e-10) {
            break;
        }
    }
    return { a, b };
}

TrainedAggregator fit_svm(const FeatureMatrix & X, const BinaryLabels & y, std::vector<std::string> names,
                          const SvmHyper & hyper) {
    detail::check_training_data(X, y, names.size());
    if (!(hyper.C > 0.0)) {
        throw Error("fit_svm: C must be > 0");
    }
    if (hyper.gamma && !(*hyper.gamma > 0.0)) {
        throw Error("fit_svm: gamma must be > 0");
    }
    bool identical = true;
    for (Eigen::Index i = 1; i < X.rows() && identical; ++i) {
        identical = X.row(i) == X.row(0);
    }
    if (identical) {
        throw Error("fit_svm: all training points are identical; the classes cannot be separated");
    }

    const auto stats = Standardizer::fit(X);
    const FeatureMatrix Xs = stats.apply(X);
    double gamma = 1.0;
    if (hyper.gamma) {
        gamma = *hyper.gamma;
    } else {
        const double mean = Xs.mean();
        const double var = (Xs.array() - mean).square().mean();
        gamma = var > 0.0 ? 1.0 / (static_cast<double>(Xs.cols()) * var) : 1.0;
    }
    const Eigen::MatrixXd K = kernel_matrix(Xs, Xs, hyper.kernel, gamma);
    const auto sol = solve_svm_dual(K, y, hyper.C);

    SvmParams p;
    p.kernel = hyper.kernel;
    p.gamma = gamma;
    p.bias = sol.bias;
    std::vector<Eigen::Index> sv;
    for (Eigen::Index i = 0; i < Xs.rows(); ++i) {
        if (sol.alpha(i) > 0.0) {
            sv.push_back(i);
        }
    }
    p.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), Xs.cols());
    p.dual_coef.resize(static_cast<Eigen::Index>(sv.size()));
    for (std::size_t k = 0; k < sv.size(); ++k) {
        const auto i = sv[k];
        p.support_vectors.row(static_cast<Eigen::Index>(k)) = Xs.row(i);
        p.dual_coef(static_cast<Eigen::Index>(k)) = sol.alpha(i) * (y[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0);
    }

    TrainedAggregator model;
    model.method = Method::svm;
    model.feature_names = std::move(names);
    model.train_stats = stats;
    model.hyperparameters = { { "C", hyper.C },
                              { "kernel", hyper.kernel == Kernel::linear ? "linear" : "rbf" },
                              { "gamma", hyper.gamma ? nlohmann::json(*hyper.gamma) : nlohmann::json("scale") } };
    model.parameters = p;
    const auto decision = detail::svm_decision(model, X);
    const auto [a, b] = fit_platt(decision, y);
    std::get<SvmParams>(model.parameters).platt_a = a;
    std::get<SvmParams>(model.parameters).platt_b = b;
    return model;
}

namespace detail {

std::vector<double> svm_decision(const TrainedAggregator & model, const FeatureMatrix & X) {
    const auto & p = std::get<SvmParams>(model.parameters);
    const FeatureMatrix Xs = model.train_stats->apply(X);
    std::vector<double> out(static_cast<std::size_t>(X.rows()), p.bias);
    if (p.support_vectors.rows() == 0) {
        return out;
    }
    const Eigen::MatrixXd K = kernel_matrix(Xs, p.support_vectors, p.kernel, p.gamma);
    const Eigen::VectorXd f = K * p.dual_coef;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        out[static_cast<std::size_t>(i)] += f(i);
    }
    return out;
}

}  // namespace detail

}  // namespace curvens
