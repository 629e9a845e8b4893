#include "curvens/auroc.hpp"
#include "curvens/error.hpp"
#include "curvens/learners.hpp"
#include "curvens/rng.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace curvens;

namespace {

struct Data {
    FeatureMatrix X;
    BinaryLabels y;
    std::vector<std::string> names;
};

double normal(Rng & rng) {
    // Box-Muller; good enough for test data.
    const double u = 1.0 - rng.uniform();
    const double v = rng.uniform();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
}

// Two overlapping Gaussian blobs in M dimensions.
Data blobs(std::uint64_t seed, int n, int m, double shift) {
    Rng rng(seed);
    Data d;
    d.X.resize(n, m);
    for (int i = 0; i < n; ++i) {
        const int label = i % 2;
        d.y.push_back(label);
        for (int j = 0; j < m; ++j) {
            d.X(i, j) = normal(rng) * (1.0 + 0.3 * j) + (label ? shift * (j + 1) : 0.0) + j;
        }
    }
    for (int j = 0; j < m; ++j) {
        d.names.push_back("s" + std::to_string(j));
    }
    return d;
}

double train_auroc(const TrainedAggregator & model, const Data & d) {
    const auto p = predict_proba(model, d.X);
    return auroc(p, d.y);
}

std::vector<TrainedAggregator> all_models(const Data & d) {
    return { fit_logistic(d.X, d.y, d.names), fit_gnb(d.X, d.y, d.names),
             fit_random_forest(d.X, d.y, d.names, ForestHyper{ 20, std::nullopt, 2, true, 3 }),
             fit_svm(d.X, d.y, d.names) };
}

}  // namespace

TEST_CASE("logistic regression on separable 1-D data") {
    Data d;
    d.X.resize(40, 1);
    for (int i = 0; i < 40; ++i) {
        d.X(i, 0) = i % 2 ? 1.0 : -1.0;
        d.y.push_back(i % 2);
    }
    d.names = { "a" };
    const auto m = fit_logistic(d.X, d.y, d.names, LogisticHyper{ 1e4, Penalty::l2, 100 });
    FeatureMatrix q(2, 1);
    q << 1.0, -1.0;
    const auto p = predict_proba(m, q);
    CHECK(p[0] > 0.99);
    CHECK(p[1] < 0.01);
}

TEST_CASE("logistic regression on all-zero features recovers the prior") {
    for (int machines : { 3, 10, 17 }) {
        FeatureMatrix X = FeatureMatrix::Zero(20, 2);
        BinaryLabels y(20, 0);
        for (int i = 0; i < machines; ++i) {
            y[static_cast<std::size_t>(i)] = 1;
        }
        const auto m = fit_logistic(X, y, { "a", "b" });
        const auto & params = std::get<LogisticParams>(m.parameters);
        CHECK(params.weights.norm() == 0.0);
        const double prior = machines / 20.0;
        CHECK(params.intercept == doctest::Approx(std::log(prior / (1.0 - prior))).epsilon(1e-9));
        CHECK(predict_proba(m, X)[0] == doctest::Approx(prior).epsilon(1e-9));
    }
}

TEST_CASE("flipping labels flips logistic probabilities") {
    const auto d = blobs(1, 60, 3, 0.8);
    BinaryLabels flipped;
    for (int v : d.y) {
        flipped.push_back(1 - v);
    }
    for (const auto penalty : { Penalty::l2, Penalty::none }) {
        const auto a = predict_proba(fit_logistic(d.X, d.y, d.names, { 1.0, penalty, 100 }), d.X);
        const auto b = predict_proba(fit_logistic(d.X, flipped, d.names, { 1.0, penalty, 100 }), d.X);
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i] + b[i] == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("logistic gradient matches central differences") {
    const auto d = blobs(2, 50, 4, 0.5);
    const auto Xs = Standardizer::fit(d.X).apply(d.X);
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd theta(5);
        for (int i = 0; i < 5; ++i) {
            theta(i) = 2.0 * normal(rng);
        }
        const double C = std::exp(3.0 * normal(rng));
        for (const auto penalty : { Penalty::l2, Penalty::none }) {
            const auto obj = logistic_objective(theta, Xs, d.y, C, penalty);
            for (int k = 0; k < 5; ++k) {
                const double h = 1e-5 * std::max(1.0, std::abs(theta(k)));
                Eigen::VectorXd up = theta;
                Eigen::VectorXd down = theta;
                up(k) += h;
                down(k) -= h;
                const double fd = (logistic_objective(up, Xs, d.y, C, penalty).value -
                                   logistic_objective(down, Xs, d.y, C, penalty).value) /
                                  (2.0 * h);
                REQUIRE(std::abs(fd - obj.gradient(k)) <= 1e-5 * std::max(1.0, std::abs(fd)));
            }
        }
    }
}

TEST_CASE("logistic optimum has a vanishing gradient") {
    const auto d = blobs(4, 80, 3, 0.7);
    const auto m = fit_logistic(d.X, d.y, d.names, { 2.0, Penalty::l2, 100 });
    const auto & p = std::get<LogisticParams>(m.parameters);
    Eigen::VectorXd theta(4);
    theta << p.weights, p.intercept;
    const auto obj = logistic_objective(theta, m.train_stats->apply(d.X), d.y, 2.0, Penalty::l2);
    CHECK(obj.gradient.norm() < 1e-8);
}

TEST_CASE("gaussian naive bayes closed-form example") {
    FeatureMatrix X(4, 1);
    X << 1, 3, 5, 7;
    const BinaryLabels y = { 0, 0, 1, 1 };  // class A = human = 0
    const auto m = fit_gnb(X, y, { "a" }, GaussianNbHyper{ 0.0 });
    const auto & p = std::get<GaussianNbParams>(m.parameters);
    CHECK(p.mean(0, 0) == 2.0);
    CHECK(p.mean(1, 0) == 6.0);
    CHECK(p.var(0, 0) == 1.0);
    CHECK(p.var(1, 0) == 1.0);
    FeatureMatrix q(2, 1);
    q << 2, 4;
    const auto prob = predict_proba(m, q);
    const double p_human = 1.0 / (1.0 + std::exp(-8.0));
    CHECK(1.0 - prob[0] == doctest::Approx(p_human).epsilon(1e-12));
    CHECK(1.0 - prob[0] == doctest::Approx(0.99966).epsilon(1e-5));
    CHECK(prob[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("huge variance smoothing flattens the posterior to the prior") {
    FeatureMatrix X(5, 1);
    X << 1, 3, 5, 7, 9;
    const BinaryLabels y = { 0, 0, 1, 1, 1 };
    const auto m = fit_gnb(X, y, { "a" }, GaussianNbHyper{ 1e6 });
    FeatureMatrix q(3, 1);
    q << 1, 5, 9;
    for (double p : predict_proba(m, q)) {
        CHECK(p == doctest::Approx(0.6).epsilon(1e-4));
    }
}

TEST_CASE("gaussian naive bayes matches a density-product oracle") {
    Rng rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 6 + static_cast<int>(rng.below(20));
        const int mcols = 1 + static_cast<int>(rng.below(4));
        const auto d = blobs(rng.next(), n, mcols, 0.5 + rng.uniform());
        const double smoothing = std::pow(10.0, -9.0 + 8.0 * rng.uniform());
        const auto model = fit_gnb(d.X, d.y, d.names, GaussianNbHyper{ smoothing });

        // Oracle: population variances, smoothing scaled by the widest feature variance.
        double max_var = 0.0;
        for (int j = 0; j < mcols; ++j) {
            const double mu = d.X.col(j).mean();
            max_var = std::max(max_var, (d.X.col(j).array() - mu).square().mean());
        }
        double mean[2][4] = {};
        double var[2][4] = {};
        double count[2] = {};
        for (int i = 0; i < n; ++i) {
            count[d.y[i]] += 1.0;
        }
        for (int c = 0; c < 2; ++c) {
            for (int j = 0; j < mcols; ++j) {
                for (int i = 0; i < n; ++i) {
                    if (d.y[i] == c) {
                        mean[c][j] += d.X(i, j) / count[c];
                    }
                }
                for (int i = 0; i < n; ++i) {
                    if (d.y[i] == c) {
                        var[c][j] += (d.X(i, j) - mean[c][j]) * (d.X(i, j) - mean[c][j]) / count[c];
                    }
                }
                var[c][j] += smoothing * max_var;
            }
        }
        const auto got = predict_proba(model, d.X);
        for (int i = 0; i < n; ++i) {
            double density[2];
            for (int c = 0; c < 2; ++c) {
                density[c] = count[c] / n;
                for (int j = 0; j < mcols; ++j) {
                    const double z = d.X(i, j) - mean[c][j];
                    density[c] *= std::exp(-z * z / (2.0 * var[c][j])) / std::sqrt(2.0 * std::numbers::pi * var[c][j]);
                }
            }
            const double oracle = density[1] / (density[0] + density[1]);
            REQUIRE(std::abs(got[static_cast<std::size_t>(i)] - oracle) <= 1e-9);
        }
    }
}

TEST_CASE("zero smoothing on a constant class feature is singular") {
    FeatureMatrix X(4, 1);
    X << 1, 1, 5, 7;
    CHECK_THROWS_WITH(fit_gnb(X, { 0, 0, 1, 1 }, { "a" }, GaussianNbHyper{ 0.0 }),
                      doctest::Contains("singular variance"));
}

TEST_CASE("single-class labels are degenerate for every learner") {
    const auto d = blobs(5, 10, 2, 1.0);
    const BinaryLabels ones(10, 1);
    CHECK_THROWS_WITH(fit_logistic(d.X, ones, d.names), doctest::Contains("degenerate labels"));
    CHECK_THROWS_WITH(fit_gnb(d.X, ones, d.names), doctest::Contains("degenerate labels"));
    CHECK_THROWS_WITH(fit_random_forest(d.X, ones, d.names), doctest::Contains("degenerate labels"));
    CHECK_THROWS_WITH(fit_svm(d.X, ones, d.names), doctest::Contains("degenerate labels"));
}

TEST_CASE("a single unpruned tree memorizes consistent data") {
    const auto d = blobs(6, 80, 3, 0.3);
    const auto m = fit_random_forest(d.X, d.y, d.names, ForestHyper{ 1, std::nullopt, 2, false, 1 });
    const auto p = predict_proba(m, d.X);
    for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(p[i] == static_cast<double>(d.y[i]));
    }
    CHECK(train_auroc(m, d) == 1.0);
}

TEST_CASE("constant features give the class prior") {
    FeatureMatrix X = FeatureMatrix::Constant(10, 2, 3.5);
    const BinaryLabels y = { 1, 0, 0, 1, 0, 0, 0, 1, 0, 0 };
    const auto m = fit_random_forest(X, y, { "a", "b" }, ForestHyper{ 7, std::nullopt, 2, false, 1 });
    FeatureMatrix q(2, 2);
    q << 3.5, 3.5, -100, 100;
    for (double p : predict_proba(m, q)) {
        CHECK(p == doctest::Approx(0.3).epsilon(1e-15));
    }
}

TEST_CASE("forests are deterministic in their seed") {
    const auto d = blobs(7, 60, 4, 0.5);
    const ForestHyper h{ 15, 6, 2, true, 99 };
    const auto a = fit_random_forest(d.X, d.y, d.names, h);
    const auto b = fit_random_forest(d.X, d.y, d.names, h);
    CHECK(to_json(a).dump() == to_json(b).dump());
    CHECK(predict_proba(a, d.X) == predict_proba(b, d.X));
    auto other = h;
    other.seed = 100;
    CHECK(to_json(fit_random_forest(d.X, d.y, d.names, other)).dump() != to_json(a).dump());
}

TEST_CASE("forest probability averages leaf frequencies") {
    // Tree 1 splits feature 0 at 0.5; tree 2 splits feature 1 at 2.0.
    DecisionTree t1;
    t1.nodes = { { 0, 0.5, 1, 2, 0.5 }, { -1, 0.0, -1, -1, 0.25 }, { -1, 0.0, -1, -1, 1.0 } };
    DecisionTree t2;
    t2.nodes = { { 1, 2.0, 1, 2, 0.5 }, { -1, 0.0, -1, -1, 0.0 }, { -1, 0.0, -1, -1, 0.75 } };
    TrainedAggregator m;
    m.method = Method::rf;
    m.feature_names = { "a", "b" };
    m.parameters = ForestParams{ { t1, t2 } };
    FeatureMatrix q(4, 2);
    q << 0.0, 0.0,  //
        0.5, 3.0,   //
        1.0, 2.0,   //
        9.0, 9.0;
    const auto p = predict_proba(m, q);
    CHECK(p[0] == (0.25 + 0.0) / 2.0);
    CHECK(p[1] == (0.25 + 0.75) / 2.0);
    CHECK(p[2] == (1.0 + 0.0) / 2.0);
    CHECK(p[3] == (1.0 + 0.75) / 2.0);
}

TEST_CASE("linear svm separates separable data") {
    FeatureMatrix X(8, 2);
    X << 0, 0, 1, 0, 0, 1, 1, 1,  //
        3, 3, 4, 3, 3, 4, 4, 4;
    const BinaryLabels y = { 0, 0, 0, 0, 1, 1, 1, 1 };
    const auto m = fit_svm(X, y, { "a", "b" }, SvmHyper{ 1e3, Kernel::linear, std::nullopt });
    const auto f = decision_function(m, X);
    for (std::size_t i = 0; i < f.size(); ++i) {
        CHECK((y[i] == 1 ? f[i] > 0.0 : f[i] < 0.0));
    }
    const Data d{ X, y, { "a", "b" } };
    CHECK(train_auroc(m, d) == 1.0);
    // Margin oracle: the max-margin separator of this instance is x + y = 3.5 on raw features,
    // so the two closest points on either side get |f| = 1.
    CHECK(std::abs(f[3]) == doctest::Approx(1.0).epsilon(1e-2));
    CHECK(std::abs(f[4]) == doctest::Approx(1.0).epsilon(1e-2));
}

TEST_CASE("svm refuses identical training points") {
    FeatureMatrix X = FeatureMatrix::Constant(6, 2, 1.0);
    CHECK_THROWS_WITH(fit_svm(X, { 0, 1, 0, 1, 0, 1 }, { "a", "b" }), doctest::Contains("identical"));
}

TEST_CASE("rescaled inputs with rescaled gamma give the same kernel and dual") {
    const auto d = blobs(8, 40, 3, 0.7);
    for (double lambda : { 0.5, 2.0, 4.0 }) {
        const double gamma = 0.3;
        const FeatureMatrix Y = d.X * lambda;
        const auto K = kernel_matrix(d.X, d.X, Kernel::rbf, gamma);
        const auto L = kernel_matrix(Y, Y, Kernel::rbf, gamma / (lambda * lambda));
        CHECK(K == L);
        const auto a = solve_svm_dual(K, d.y, 1.0);
        const auto b = solve_svm_dual(L, d.y, 1.0);
        CHECK(a.alpha == b.alpha);
        CHECK(a.bias == b.bias);
    }
    // Arbitrary scale: equal up to rounding.
    const FeatureMatrix Y = d.X * 3.0;
    CHECK(kernel_matrix(Y, Y, Kernel::rbf, 0.3 / 9.0).isApprox(kernel_matrix(d.X, d.X, Kernel::rbf, 0.3), 1e-12));
}

TEST_CASE("dual solution satisfies the box and equality constraints") {
    const auto d = blobs(10, 50, 2, 0.6);
    const auto Xs = Standardizer::fit(d.X).apply(d.X);
    const auto K = kernel_matrix(Xs, Xs, Kernel::rbf, 0.5);
    const double C = 2.0;
    const auto sol = solve_svm_dual(K, d.y, C);
    double eq = 0.0;
    for (Eigen::Index i = 0; i < sol.alpha.size(); ++i) {
        CHECK(sol.alpha(i) >= 0.0);
        CHECK(sol.alpha(i) <= C);
        eq += sol.alpha(i) * (d.y[static_cast<std::size_t>(i)] ? 1.0 : -1.0);
    }
    CHECK(std::abs(eq) < 1e-9);
}

TEST_CASE("platt scaling is monotone in the decision value") {
    const std::vector<double> f = { -2, -1, -0.5, 0.1, 0.3, 1.2, 2.5, -0.2 };
    const BinaryLabels y = { 0, 0, 1, 0, 1, 1, 1, 0 };
    const auto [a, b] = fit_platt(f, y);
    CHECK(a < 0.0);
    CHECK(std::isfinite(b));
}

TEST_CASE("probabilities stay in range and gnb/lr are normalized") {
    Rng rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        const auto d = blobs(rng.next(), 40, 1 + static_cast<int>(rng.below(4)), rng.uniform());
        for (const auto & m : all_models(d)) {
            FeatureMatrix probe = d.X * (1.0 + 5.0 * rng.uniform());
            for (double p : predict_proba(m, probe)) {
                REQUIRE(p >= 0.0);
                REQUIRE(p <= 1.0);
            }
        }
        // P(human) is computed as 1 - P(machine) in closed form for both.
        const auto lr = fit_logistic(d.X, d.y, d.names);
        const auto f = decision_function(lr, d.X);
        const auto p = predict_proba(lr, d.X);
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double p_human = 1.0 / (1.0 + std::exp(f[i]));
            REQUIRE(std::abs(p[i] + p_human - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("predictions are invariant to column order given names") {
    const auto d = blobs(13, 50, 4, 0.6);
    const std::vector<int> perm = { 2, 0, 3, 1 };
    FeatureMatrix shuffled(d.X.rows(), 4);
    std::vector<std::string> names;
    for (int j = 0; j < 4; ++j) {
        shuffled.col(j) = d.X.col(perm[j]);
        names.push_back(d.names[static_cast<std::size_t>(perm[j])]);
    }
    for (const auto & m : all_models(d)) {
        CHECK(predict_proba(m, shuffled, names) == predict_proba(m, d.X));
    }
    names[1] = "other";
    CHECK_THROWS_WITH(predict_proba(fit_gnb(d.X, d.y, d.names), shuffled, names),
                      doctest::Contains("missing feature column: s0"));
}

TEST_CASE("fits are pure functions of their inputs") {
    const auto d = blobs(14, 40, 3, 0.5);
    const auto a = all_models(d);
    const auto b = all_models(d);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(to_json(a[i]).dump() == to_json(b[i]).dump());
    }
}

TEST_CASE("trained models round trip through JSON byte-stably") {
    const auto d = blobs(15, 40, 3, 0.5);
    test::TempDir dir;
    for (const auto & m : all_models(d)) {
        const auto j = to_json(m);
        CHECK(j["format"] == "curvens-agg-v1");
        save_aggregator(m, dir / "m.json");
        const auto back = load_aggregator(dir / "m.json");
        CHECK(to_json(back).dump() == j.dump());
        CHECK(predict_proba(back, d.X) == predict_proba(m, d.X));
    }
    CHECK_THROWS_AS(aggregator_from_json(nlohmann::json{ { "format", "x" } }), ConfigError);
}

TEST_CASE("hyperparameter parsing") {
    CHECK(logistic_hyper_from_json({ { "C", 10 }, { "penalty", "none" } }).penalty == Penalty::none);
    CHECK_THROWS_AS(logistic_hyper_from_json({ { "penalty", "l1" } }), ConfigError);
    CHECK_THROWS_AS(svm_hyper_from_json({ { "degree", 3 } }), ConfigError);
    CHECK_FALSE(svm_hyper_from_json({ { "gamma", "scale" } }).gamma.has_value());
    CHECK(forest_hyper_from_json({ { "max_depth", nullptr } }, 5).seed == 5);
    CHECK_FALSE(forest_hyper_from_json({ { "max_depth", nullptr } }, 5).max_depth.has_value());
    const auto d = blobs(16, 20, 2, 1.0);
    CHECK_THROWS_AS(fit_aggregator(Method::lr, d.X, d.y, d.names, { { "C", "big" } }), ConfigError);
    CHECK(parse_method("svm") == Method::svm);
    CHECK_THROWS_AS(parse_method("knn"), ConfigError);
}

TEST_CASE("grids validate axis names and enumerate the product") {
    HyperGrid g{ Method::rf, { { "n_estimators", { 5, 10 } }, { "bootstrap", { true, false } }, { "max_depth", { 2 } } } };
    g.validate();
    const auto pts = g.points();
    REQUIRE(pts.size() == 4);
    CHECK(pts[0] == nlohmann::json{ { "n_estimators", 5 }, { "bootstrap", true }, { "max_depth", 2 } });
    CHECK(pts[1] == nlohmann::json{ { "n_estimators", 5 }, { "bootstrap", false }, { "max_depth", 2 } });
    HyperGrid bad{ Method::lr, { { "kernel", { "rbf" } } } };
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    HyperGrid empty_axis{ Method::gnb, { { "var_smoothing", {} } } };
    CHECK_THROWS_AS(empty_axis.validate(), ConfigError);
    for (const auto m : { Method::lr, Method::rf, Method::gnb, Method::svm }) {
        default_grid(m).validate();
    }
    CHECK(default_grid(Method::lr).points().size() == 10);
}

TEST_CASE("stratified folds balance classes") {
    BinaryLabels y;
    for (int i = 0; i < 23; ++i) {
        y.push_back(i % 3 == 0);
    }
    const auto folds = stratified_folds(y, 4, 1);
    int counts[4][2] = {};
    for (std::size_t i = 0; i < y.size(); ++i) {
        REQUIRE(folds[i] >= 0);
        REQUIRE(folds[i] < 4);
        ++counts[folds[i]][y[i]];
    }
    for (auto & c : counts) {
        CHECK(c[0] >= 3);
        CHECK(c[0] <= 4);
        CHECK(c[1] >= 2);
        CHECK(c[1] <= 2 + 1);
    }
    CHECK(stratified_folds(y, 4, 1) == folds);
    CHECK_THROWS(stratified_folds(y, 9, 1));
    CHECK_THROWS(stratified_folds(y, 1, 1));
}

TEST_CASE("singleton grid returns its point and CV score") {
    const auto d = blobs(17, 40, 2, 1.0);
    const HyperGrid g{ Method::gnb, { { "var_smoothing", { 1e-9 } } } };
    const auto r = grid_search(g, d.X, d.y, d.names, 4, 2);
    CHECK(r.best == nlohmann::json{ { "var_smoothing", 1e-9 } });
    REQUIRE(r.evaluated.size() == 1);
    CHECK(r.cv_score == r.evaluated[0].second);

    // Oracle: mean held-out AUROC over the same folds.
    const auto folds = stratified_folds(d.y, 4, 2);
    double total = 0.0;
    for (int k = 0; k < 4; ++k) {
        std::vector<int> tr;
        std::vector<int> te;
        for (int i = 0; i < 40; ++i) {
            (folds[static_cast<std::size_t>(i)] == k ? te : tr).push_back(i);
        }
        FeatureMatrix Xtr(static_cast<Eigen::Index>(tr.size()), 2);
        FeatureMatrix Xte(static_cast<Eigen::Index>(te.size()), 2);
        BinaryLabels ytr;
        BinaryLabels yte;
        for (std::size_t i = 0; i < tr.size(); ++i) {
            Xtr.row(static_cast<Eigen::Index>(i)) = d.X.row(tr[i]);
            ytr.push_back(d.y[static_cast<std::size_t>(tr[i])]);
        }
        for (std::size_t i = 0; i < te.size(); ++i) {
            Xte.row(static_cast<Eigen::Index>(i)) = d.X.row(te[i]);
            yte.push_back(d.y[static_cast<std::size_t>(te[i])]);
        }
        total += auroc(predict_proba(fit_gnb(Xtr, ytr, d.names, { 1e-9 }), Xte), yte);
    }
    CHECK(r.cv_score == doctest::Approx(total / 4.0).epsilon(1e-14));
}

TEST_CASE("grid ties keep the first point") {
    const auto d = blobs(18, 40, 1, 3.0);
    // One feature: every positive-slope logistic fit ranks identically.
    const HyperGrid g{ Method::lr, { { "C", { 1.0, 10.0, 0.5 } } } };
    const auto r = grid_search(g, d.X, d.y, d.names, 3, 4);
    CHECK(r.evaluated[0].second == r.evaluated[1].second);
    CHECK(r.best == nlohmann::json{ { "C", 1.0 } });
}

TEST_CASE("weak regularization wins on separable data") {
    // x0 = label + noise, x1 = noise: separable only along x0 - x1. A heavily
    // regularized fit follows the class-mean direction (mostly x0) and misranks;
    // a weakly regularized one finds the separating direction.
    Rng rng(19);
    Data d;
    d.X.resize(80, 2);
    for (int i = 0; i < 80; ++i) {
        const int label = i % 2;
        const double noise = 3.0 * normal(rng);
        d.X(i, 0) = (label ? 1.0 : -1.0) + noise;
        d.X(i, 1) = noise;
        d.y.push_back(label);
    }
    d.names = { "a", "b" };
    const HyperGrid g{ Method::lr, { { "C", { 0.01, 100.0 } } } };
    const auto r = grid_search(g, d.X, d.y, d.names, 4, 5, 2);
    INFO("cv(0.01) = " << r.evaluated[0].second << ", cv(100) = " << r.evaluated[1].second);
    CHECK(r.evaluated[1].second > r.evaluated[0].second);
    CHECK(r.best == nlohmann::json{ { "C", 100.0 } });
}

TEST_CASE("grid search is deterministic and thread-count independent") {
    const auto d = blobs(20, 48, 3, 0.4);
    const HyperGrid g{ Method::rf, { { "n_estimators", { 5, 10 } }, { "max_depth", { 2, nullptr } } } };
    const auto a = grid_search(g, d.X, d.y, d.names, 3, 7, 1);
    const auto b = grid_search(g, d.X, d.y, d.names, 3, 7, 4);
    CHECK(a.best == b.best);
    CHECK(a.cv_score == b.cv_score);
    REQUIRE(a.evaluated.size() == b.evaluated.size());
    for (std::size_t i = 0; i < a.evaluated.size(); ++i) {
        CHECK(a.evaluated[i].second == b.evaluated[i].second);
    }
}
