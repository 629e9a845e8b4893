#include "curvens/error.hpp"
#include "curvens/rng.hpp"
#include "detail.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace curvens {

namespace {

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double impurity = INFINITY;  // weighted child Gini, n_l * gini_l + n_r * gini_r
};

double weighted_gini(double n, double pos) {
    if (n <= 0.0) {
        return 0.0;
    }
    const double neg = n - pos;
    return n - (pos * pos + neg * neg) / n;
}

class TreeBuilder {
public:
    TreeBuilder(const FeatureMatrix & X, const BinaryLabels & y, const ForestHyper & hyper, Rng & rng)
        : X_(X), y_(y), hyper_(hyper), rng_(rng) {
        const auto m = static_cast<std::size_t>(X.cols());
        max_features_ = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(m))));
    }

    DecisionTree build(std::vector<std::size_t> rows) {
        DecisionTree tree;
        grow(tree, rows, 0);
        return tree;
    }

private:
    int grow(DecisionTree & tree, std::vector<std::size_t> & rows, int depth) {
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        double pos = 0.0;
        for (auto r : rows) {
            pos += y_[r];
        }
        const double n = static_cast<double>(rows.size());
        tree.nodes[static_cast<std::size_t>(id)].value = pos / n;

        const bool pure = pos == 0.0 || pos == n;
        const bool too_deep = hyper_.max_depth && depth >= *hyper_.max_depth;
        if (pure || too_deep || rows.size() < static_cast<std::size_t>(hyper_.min_samples_split)) {
            return id;
        }
        const Split split = best_split(rows);
        if (split.feature < 0) {
            return id;
        }
        std::vector<std::size_t> left, right;
        for (auto r : rows) {
            (X_(static_cast<Eigen::Index>(r), split.feature) <= split.threshold ? left : right).push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();
        const int l = grow(tree, left, depth + 1);
        const int r = grow(tree, right, depth + 1);
        auto & node = tree.nodes[static_cast<std::size_t>(id)];
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.left = l;
        node.right = r;
        return id;
    }

    // Evaluates a random subset of ceil(sqrt(M)) features; when none of them can
    // split the node, keeps drawing the remaining features until one can.
    Split best_split(const std::vector<std::size_t> & rows) {
        const auto m = static_cast<std::size_t>(X_.cols());
        std::vector<std::size_t> order(m);
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = m; i > 1; --i) {
            std::swap(order[i - 1], order[rng_.below(i)]);
        }
        Split best;
        for (std::size_t k = 0; k < m; ++k) {
            if (k >= max_features_ && best.feature >= 0) {
                break;
            }
            const Split s = best_for_feature(rows, static_cast<int>(order[k]));
            if (s.feature < 0) {
                continue;
            }
            const bool better = s.impurity < best.impurity ||
                                (s.impurity == best.impurity &&
                                 (s.feature < best.feature || (s.feature == best.feature && s.threshold < best.threshold)));
            if (best.feature < 0 || better) {
                best = s;
            }
        }
        return best;
    }

    Split best_for_feature(const std::vector<std::size_t> & rows, int feature) const {
        std::vector<std::pair<double, int>> vals;
        vals.reserve(rows.size());
        double total_pos = 0.0;
        for (auto r : rows) {
            vals.emplace_back(X_(static_cast<Eigen::Index>(r), feature), y_[r]);
            total_pos += y_[r];
        }
        std::sort(vals.begin(), vals.end());
        const double n = static_cast<double>(vals.size());
        Split best;
        double left_pos = 0.0;
        for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
            left_pos += vals[i].second;
            if (vals[i].first == vals[i + 1].first) {
                continue;
            }
            const double nl = static_cast<double>(i + 1);
            const double impurity = weighted_gini(nl, left_pos) + weighted_gini(n - nl, total_pos - left_pos);
            if (impurity < best.impurity) {
                double threshold = 0.5 * (vals[i].first + vals[i + 1].first);
                if (threshold >= vals[i + 1].first) {
                    threshold = vals[i].first;
                }
                best = { feature, threshold, impurity };
            }
        }
        return best;
    }

    const FeatureMatrix & X_;
    const BinaryLabels & y_;
    const ForestHyper & hyper_;
    Rng & rng_;
    std::size_t max_features_ = 1;
};

}  // namespace

double DecisionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd> & x) const {
    std::size_t i = 0;
    while (nodes[i].feature >= 0) {
        i = static_cast<std::size_t>(x(nodes[i].feature) <= nodes[i].threshold ? nodes[i].left : nodes[i].right);
    }
    return nodes[i].value;
}

TrainedAggregator fit_random_forest(const FeatureMatrix & X, const BinaryLabels & y, std::vector<std::string> names,
                                    const ForestHyper & hyper) {
    detail::check_training_data(X, y, names.size());
    if (hyper.n_estimators < 1) {
        throw Error("fit_random_forest: n_estimators must be >= 1");
    }
    if (hyper.min_samples_split < 2) {
        throw Error("fit_random_forest: min_samples_split must be >= 2");
    }
    if (hyper.max_depth && *hyper.max_depth < 1) {
        throw Error("fit_random_forest: max_depth must be >= 1");
    }
    const auto n = static_cast<std::size_t>(X.rows());
    ForestParams params;
    for (int t = 0; t < hyper.n_estimators; ++t) {
        Rng rng(derive_seed(hyper.seed, "tree", static_cast<std::uint64_t>(t)));
        std::vector<std::size_t> rows(n);
        if (hyper.bootstrap) {
            for (auto & r : rows) {
                r = rng.below(n);
            }
        } else {
            std::iota(rows.begin(), rows.end(), 0);
        }
        TreeBuilder builder(X, y, hyper, rng);
        params.trees.push_back(builder.build(std::move(rows)));
    }

    TrainedAggregator model;
    model.method = Method::rf;
    model.feature_names = std::move(names);
    model.parameters = std::move(params);
    model.hyperparameters = { { "n_estimators", hyper.n_estimators },
                              { "max_depth", hyper.max_depth ? nlohmann::json(*hyper.max_depth) : nlohmann::json() },
                              { "min_samples_split", hyper.min_samples_split },
                              { "bootstrap", hyper.bootstrap },
                              { "seed", hyper.seed } };
    return model;
}

namespace detail {

std::vector<double> forest_decision(const TrainedAggregator & model, const FeatureMatrix & X) {
    const auto & p = std::get<ForestParams>(model.parameters);
    std::vector<double> out(static_cast<std::size_t>(X.rows()), 0.0);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        double s = 0.0;
        for (const auto & tree : p.trees) {
            s += tree.predict(X.row(i));
        }
        out[static_cast<std::size_t>(i)] = s / static_cast<double>(p.trees.size());
    }
    return out;
}

}  // namespace detail

}  // namespace curvens
