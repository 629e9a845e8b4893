#include "curvens/error.hpp"
#include "detail.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace curvens {

namespace detail {

void check_training_data(const FeatureMatrix & X, const BinaryLabels & y, std::size_t names) {
    if (static_cast<std::size_t>(X.rows()) != y.size()) {
        throw Error("training data: " + std::to_string(X.rows()) + " rows but " + std::to_string(y.size()) + " labels");
    }
    if (static_cast<std::size_t>(X.cols()) != names || X.cols() == 0) {
        throw Error("training data: feature names do not match the column count");
    }
    if (!X.allFinite()) {
        throw Error("training data: non-finite feature value");
    }
    bool pos = false;
    bool neg = false;
    for (int v : y) {
        if (v != 0 && v != 1) {
            throw Error("training data: labels must be 0 or 1");
        }
        pos = pos || v == 1;
        neg = neg || v == 0;
    }
    if (!pos || !neg) {
        throw Error("degenerate labels: both classes must be present");
    }
}

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace detail

std::string_view to_string(Method m) {
    switch (m) {
    case Method::lr: return "lr";
    case Method::rf: return "rf";
    case Method::gnb: return "gnb";
    case Method::svm: return "svm";
    }
    return "?";
}

Method parse_method(std::string_view s) {
    if (s == "lr") return Method::lr;
    if (s == "rf") return Method::rf;
    if (s == "gnb") return Method::gnb;
    if (s == "svm") return Method::svm;
    throw ConfigError("unknown learner: " + std::string(s));
}

Standardizer Standardizer::fit(const FeatureMatrix & X) {
    Standardizer s;
    s.mean = X.colwise().mean().transpose();
    s.scale.resize(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const double var = (X.col(j).array() - s.mean(j)).square().mean();
        s.scale(j) = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    return s;
}

FeatureMatrix Standardizer::apply(const FeatureMatrix & X) const {
    if (X.cols() != mean.size()) {
        throw Error("standardizer: column count mismatch");
    }
    FeatureMatrix out = X;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        out.col(j) = (X.col(j).array() - mean(j)) / scale(j);
    }
    return out;
}

namespace {

void reject_unknown(const nlohmann::json & j, std::initializer_list<const char *> allowed, std::string_view method) {
    if (!j.is_object()) {
        throw ConfigError(std::string(method) + " hyperparameters must be an object");
    }
    for (const auto & [key, value] : j.items()) {
        bool ok = false;
        for (const char * a : allowed) {
            ok = ok || key == a;
        }
        if (!ok) {
            throw ConfigError("unknown " + std::string(method) + " hyperparameter: " + key);
        }
    }
}

}  // namespace

LogisticHyper logistic_hyper_from_json(const nlohmann::json & j) {
    reject_unknown(j, { "C", "penalty", "max_iter" }, "lr");
    LogisticHyper h;
    h.C = j.value("C", h.C);
    const std::string pen = j.value("penalty", std::string("l2"));
    if (pen == "l2") {
        h.penalty = Penalty::l2;
    } else if (pen == "none") {
        h.penalty = Penalty::none;
    } else {
        throw ConfigError("lr penalty must be l2 or none, got " + pen);
    }
    h.max_iter = j.value("max_iter", h.max_iter);
    return h;
}

GaussianNbHyper gnb_hyper_from_json(const nlohmann::json & j) {
    reject_unknown(j, { "var_smoothing" }, "gnb");
    GaussianNbHyper h;
    h.var_smoothing = j.value("var_smoothing", h.var_smoothing);
    return h;
}

ForestHyper forest_hyper_from_json(const nlohmann::json & j, std::uint64_t seed) {
    reject_unknown(j, { "n_estimators", "max_depth", "min_samples_split", "bootstrap", "seed" }, "rf");
    ForestHyper h;
    h.n_estimators = j.value("n_estimators", h.n_estimators);
    if (j.contains("max_depth") && !j["max_depth"].is_null() && j["max_depth"] != "none") {
        h.max_depth = j["max_depth"].get<int>();
    }
    h.min_samples_split = j.value("min_samples_split", h.min_samples_split);
    h.bootstrap = j.value("bootstrap", h.bootstrap);
    h.seed = j.value("seed", seed);
    return h;
}

SvmHyper svm_hyper_from_json(const nlohmann::json & j) {
    reject_unknown(j, { "C", "kernel", "gamma" }, "svm");
    SvmHyper h;
    h.C = j.value("C", h.C);
    const std::string kernel = j.value("kernel", std::string("rbf"));
    if (kernel == "rbf") {
        h.kernel = Kernel::rbf;
    } else if (kernel == "linear") {
        h.kernel = Kernel::linear;
    } else {
        throw ConfigError("svm kernel must be linear or rbf, got " + kernel);
    }
    if (j.contains("gamma") && j["gamma"] != "scale") {
        h.gamma = j["gamma"].get<double>();
    }
    return h;
}

TrainedAggregator fit_aggregator(Method method, const FeatureMatrix & X, const BinaryLabels & y,
                                 std::vector<std::string> names, const nlohmann::json & hyper, std::uint64_t seed) {
    try {
        switch (method) {
        case Method::lr: return fit_logistic(X, y, std::move(names), logistic_hyper_from_json(hyper));
        case Method::gnb: return fit_gnb(X, y, std::move(names), gnb_hyper_from_json(hyper));
        case Method::rf: return fit_random_forest(X, y, std::move(names), forest_hyper_from_json(hyper, seed));
        case Method::svm: return fit_svm(X, y, std::move(names), svm_hyper_from_json(hyper));
        }
    } catch (const nlohmann::json::exception & e) {
        throw ConfigError(std::string(to_string(method)) + " hyperparameters: " + e.what());
    }
    throw Error("unreachable");
}

std::vector<double> decision_function(const TrainedAggregator & model, const FeatureMatrix & X) {
    if (static_cast<std::size_t>(X.cols()) != model.feature_names.size()) {
        throw Error("predict: expected " + std::to_string(model.feature_names.size()) + " feature columns");
    }
    if (!X.allFinite()) {
        throw Error("predict: non-finite feature value");
    }
    switch (model.method) {
    case Method::lr: return detail::logistic_decision(model, X);
    case Method::gnb: return detail::gnb_decision(model, X);
    case Method::rf: return detail::forest_decision(model, X);
    case Method::svm: return detail::svm_decision(model, X);
    }
    throw Error("unreachable");
}

std::vector<double> predict_proba(const TrainedAggregator & model, const FeatureMatrix & X) {
    auto out = decision_function(model, X);
    switch (model.method) {
    case Method::lr:
    case Method::gnb:
        for (auto & v : out) {
            v = detail::sigmoid(v);
        }
        break;
    case Method::rf:
        break;
    case Method::svm: {
        const auto & p = std::get<SvmParams>(model.parameters);
        for (auto & v : out) {
            v = detail::sigmoid(-(p.platt_a * v + p.platt_b));
        }
        break;
    }
    }
    return out;
}

std::vector<double> predict_proba(const TrainedAggregator & model, const FeatureMatrix & X,
                                  std::span<const std::string> column_names) {
    if (static_cast<std::size_t>(X.cols()) != column_names.size()) {
        throw Error("predict: column names do not match the column count");
    }
    FeatureMatrix aligned(X.rows(), static_cast<Eigen::Index>(model.feature_names.size()));
    for (std::size_t f = 0; f < model.feature_names.size(); ++f) {
        Eigen::Index src = -1;
        for (std::size_t c = 0; c < column_names.size(); ++c) {
            if (column_names[c] == model.feature_names[f]) {
                src = static_cast<Eigen::Index>(c);
                break;
            }
        }
        if (src < 0) {
            throw Error("missing feature column: " + model.feature_names[f]);
        }
        aligned.col(static_cast<Eigen::Index>(f)) = X.col(src);
    }
    return predict_proba(model, aligned);
}

namespace {

nlohmann::json vec(const Eigen::VectorXd & v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd to_vec(const nlohmann::json & j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json mat(const Eigen::MatrixXd & m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        rows.push_back(vec(m.row(i).transpose()));
    }
    return rows;
}

Eigen::MatrixXd to_mat(const nlohmann::json & j, Eigen::Index cols) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const auto row = to_vec(j[static_cast<std::size_t>(i)]);
        if (row.size() != cols) {
            throw ConfigError("aggregator: matrix row has the wrong width");
        }
        m.row(i) = row.transpose();
    }
    return m;
}

}  // namespace

nlohmann::json to_json(const TrainedAggregator & model) {
    nlohmann::json j;
    j["format"] = "curvens-agg-v1";
    j["method"] = to_string(model.method);
    j["feature_names"] = model.feature_names;
    j["hyperparameters"] = model.hyperparameters;
    nlohmann::json p;
    std::visit(
        [&](const auto & params) {
            using T = std::decay_t<decltype(params)>;
            if constexpr (std::is_same_v<T, LogisticParams>) {
                p["weights"] = vec(params.weights);
                p["intercept"] = params.intercept;
                p["iterations"] = params.iterations;
            } else if constexpr (std::is_same_v<T, GaussianNbParams>) {
                p["class_prior"] = params.class_prior;
                p["mean"] = mat(params.mean);
                p["var"] = mat(params.var);
            } else if constexpr (std::is_same_v<T, ForestParams>) {
                nlohmann::json trees = nlohmann::json::array();
                for (const auto & t : params.trees) {
                    nlohmann::json nodes = nlohmann::json::array();
                    for (const auto & n : t.nodes) {
                        nodes.push_back({ n.feature, n.threshold, n.left, n.right, n.value });
                    }
                    trees.push_back(std::move(nodes));
                }
                p["trees"] = std::move(trees);
            } else {
                p["kernel"] = params.kernel == Kernel::linear ? "linear" : "rbf";
                p["gamma"] = params.gamma;
                p["support_vectors"] = mat(params.support_vectors);
                p["dual_coef"] = vec(params.dual_coef);
                p["bias"] = params.bias;
                p["platt_a"] = params.platt_a;
                p["platt_b"] = params.platt_b;
            }
        },
        model.parameters);
    j["parameters"] = std::move(p);
    if (model.train_stats) {
        j["train_stats"] = { { "mean", vec(model.train_stats->mean) }, { "scale", vec(model.train_stats->scale) } };
    } else {
        j["train_stats"] = nullptr;
    }
    return j;
}

TrainedAggregator aggregator_from_json(const nlohmann::json & j) {
    if (!j.is_object() || j.value("format", std::string{}) != "curvens-agg-v1") {
        throw ConfigError("not a curvens-agg-v1 model");
    }
    TrainedAggregator m;
    try {
        m.method = parse_method(j.at("method").get<std::string>());
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        m.hyperparameters = j.value("hyperparameters", nlohmann::json::object());
        const auto cols = static_cast<Eigen::Index>(m.feature_names.size());
        const auto & p = j.at("parameters");
        switch (m.method) {
        case Method::lr: {
            LogisticParams lp;
            lp.weights = to_vec(p.at("weights"));
            lp.intercept = p.at("intercept").get<double>();
            lp.iterations = p.value("iterations", 0);
            m.parameters = lp;
            break;
        }
        case Method::gnb: {
            GaussianNbParams gp;
            gp.class_prior = p.at("class_prior").get<std::array<double, 2>>();
            gp.mean = to_mat(p.at("mean"), cols);
            gp.var = to_mat(p.at("var"), cols);
            m.parameters = gp;
            break;
        }
        case Method::rf: {
            ForestParams fp;
            for (const auto & t : p.at("trees")) {
                DecisionTree tree;
                for (const auto & n : t) {
                    tree.nodes.push_back({ n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(),
                                           n.at(3).get<int>(), n.at(4).get<double>() });
                }
                fp.trees.push_back(std::move(tree));
            }
            m.parameters = fp;
            break;
        }
        case Method::svm: {
            SvmParams sp;
            sp.kernel = p.at("kernel") == "linear" ? Kernel::linear : Kernel::rbf;
            sp.gamma = p.at("gamma").get<double>();
            sp.support_vectors = to_mat(p.at("support_vectors"), cols);
            sp.dual_coef = to_vec(p.at("dual_coef"));
            sp.bias = p.at("bias").get<double>();
            sp.platt_a = p.at("platt_a").get<double>();
            sp.platt_b = p.at("platt_b").get<double>();
            m.parameters = sp;
            break;
        }
        }
        if (j.contains("train_stats") && !j["train_stats"].is_null()) {
            Standardizer s;
            s.mean = to_vec(j["train_stats"].at("mean"));
            s.scale = to_vec(j["train_stats"].at("scale"));
            m.train_stats = s;
        }
    } catch (const nlohmann::json::exception & e) {
        throw ConfigError(std::string("aggregator: ") + e.what());
    }
    if ((m.method == Method::lr || m.method == Method::svm) && !m.train_stats) {
        throw ConfigError("aggregator: missing train_stats");
    }
    return m;
}

void save_aggregator(const TrainedAggregator & model, const std::filesystem::path & path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << to_json(model).dump() << '\n';
}

TrainedAggregator load_aggregator(const std::filesystem::path & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open " + path.string());
    }
    try {
        return aggregator_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error & e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

}  // namespace curvens
