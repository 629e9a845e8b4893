#include "curvens/auroc.hpp"
#include "curvens/error.hpp"
#include "curvens/parallel.hpp"
#include "curvens/rng.hpp"
#include "detail.hpp"

#include <algorithm>
#include <map>

namespace curvens {

namespace {

std::vector<std::string> legal_axes(Method m) {
    switch (m) {
    case Method::lr: return { "C", "penalty" };
    case Method::rf: return { "bootstrap", "max_depth", "min_samples_split", "n_estimators" };
    case Method::gnb: return { "var_smoothing" };
    case Method::svm: return { "C", "gamma", "kernel" };
    }
    return {};
}

FeatureMatrix take_rows(const FeatureMatrix & X, const std::vector<std::size_t> & rows) {
    FeatureMatrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

}  // namespace

void HyperGrid::validate() const {
    const auto legal = legal_axes(method);
    if (axes.empty()) {
        throw ConfigError("hyperparameter grid is empty");
    }
    for (const auto & [name, values] : axes) {
        if (std::find(legal.begin(), legal.end(), name) == legal.end()) {
            throw ConfigError("\"" + name + "\" is not a hyperparameter of " + std::string(to_string(method)));
        }
        if (values.empty()) {
            throw ConfigError("hyperparameter axis \"" + name + "\" has no values");
        }
    }
}

std::vector<nlohmann::json> HyperGrid::points() const {
    validate();
    std::vector<nlohmann::json> out;
    std::vector<std::size_t> idx(axes.size(), 0);
    while (true) {
        nlohmann::json p = nlohmann::json::object();
        for (std::size_t a = 0; a < axes.size(); ++a) {
            p[axes[a].first] = axes[a].second[idx[a]];
        }
        out.push_back(std::move(p));
        std::size_t a = axes.size();
        while (a > 0) {
            --a;
            if (++idx[a] < axes[a].second.size()) {
                break;
            }
            idx[a] = 0;
            if (a == 0) {
                return out;
            }
        }
    }
}

HyperGrid default_grid(Method method) {
    using J = nlohmann::json;
    HyperGrid g;
    g.method = method;
    switch (method) {
    case Method::lr:
        g.axes = { { "C", { J(0.01), J(0.1), J(1.0), J(10.0), J(100.0) } }, { "penalty", { J("l2"), J("none") } } };
        break;
    case Method::rf:
        g.axes = { { "bootstrap", { J(true), J(false) } },
                   { "max_depth", { J(), J(4), J(8), J(16) } },
                   { "min_samples_split", { J(2), J(5), J(10) } },
                   { "n_estimators", { J(50), J(100), J(200) } } };
        break;
    case Method::gnb:
        g.axes = { { "var_smoothing", { J(1e-12), J(1e-9), J(1e-6) } } };
        break;
    case Method::svm:
        g.axes = { { "C", { J(0.01), J(0.1), J(1.0), J(10.0), J(100.0) } },
                   { "gamma", { J("scale"), J(0.01), J(0.1), J(1.0) } },
                   { "kernel", { J("linear"), J("rbf") } } };
        break;
    }
    return g;
}

std::vector<int> stratified_folds(const BinaryLabels & y, int folds, std::uint64_t seed) {
    if (folds < 2) {
        throw Error("stratified_folds: need at least 2 folds");
    }
    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i = 0; i < y.size(); ++i) {
        by_class[static_cast<std::size_t>(y[i] == 1)].push_back(i);
    }
    const std::size_t minority = std::min(by_class[0].size(), by_class[1].size());
    if (static_cast<std::size_t>(folds) > minority) {
        throw Error("stratified_folds: " + std::to_string(folds) + " folds exceed the minority class size " +
                    std::to_string(minority));
    }
    std::vector<int> fold(y.size(), 0);
    Rng rng(derive_seed(seed, "folds"));
    int offset = 0;
    for (auto & members : by_class) {
        for (std::size_t i = members.size(); i > 1; --i) {
            std::swap(members[i - 1], members[rng.below(i)]);
        }
        // Continue the round-robin across classes so fold sizes stay balanced.
        for (std::size_t k = 0; k < members.size(); ++k) {
            fold[members[k]] = static_cast<int>((static_cast<std::size_t>(offset) + k) % static_cast<std::size_t>(folds));
        }
        offset = static_cast<int>((static_cast<std::size_t>(offset) + members.size()) % static_cast<std::size_t>(folds));
    }
    return fold;
}

GridSearchResult grid_search(const HyperGrid & grid, const FeatureMatrix & X, const BinaryLabels & y,
                             const std::vector<std::string> & names, int folds, std::uint64_t seed, unsigned jobs) {
    detail::check_training_data(X, y, names.size());
    const auto points = grid.points();
    const auto fold = stratified_folds(y, folds, seed);

    std::vector<double> scores(points.size(), 0.0);
    parallel_for(points.size(), jobs, [&](std::size_t p) {
        double total = 0.0;
        for (int f = 0; f < folds; ++f) {
            std::vector<std::size_t> train, test;
            for (std::size_t i = 0; i < y.size(); ++i) {
                (fold[i] == f ? test : train).push_back(i);
            }
            BinaryLabels ytr, yte;
            for (auto i : train) {
                ytr.push_back(y[i]);
            }
            for (auto i : test) {
                yte.push_back(y[i]);
            }
            const auto model = fit_aggregator(grid.method, take_rows(X, train), ytr, names, points[p],
                                              derive_seed(seed, "fit", static_cast<std::uint64_t>(f)));
            const auto proba = predict_proba(model, take_rows(X, test));
            total += auroc(proba, yte);
        }
        scores[p] = total / folds;
    });

    GridSearchResult result;
    std::size_t best = 0;
    for (std::size_t p = 0; p < points.size(); ++p) {
        result.evaluated.emplace_back(points[p], scores[p]);
        if (scores[p] > scores[best]) {
            best = p;
        }
    }
    result.best = points[best];
    result.cv_score = scores[best];
    return result;
}

}  // namespace curvens
