#include "curvens/ensemble.hpp"

#include "curvens/auroc.hpp"
#include "curvens/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace curvens {

std::string_view to_string(EnsembleKind k) {
    switch (k) {
    case EnsembleKind::single: return "single";
    case EnsembleKind::max: return "max";
    case EnsembleKind::mean: return "mean";
    case EnsembleKind::median: return "median";
    case EnsembleKind::lr: return "lr";
    case EnsembleKind::rf: return "rf";
    case EnsembleKind::gnb: return "gnb";
    case EnsembleKind::svm: return "svm";
    case EnsembleKind::multistage: return "multistage";
    }
    return "?";
}

EnsembleKind parse_ensemble_kind(std::string_view s) {
    for (auto k : { EnsembleKind::single, EnsembleKind::max, EnsembleKind::mean, EnsembleKind::median,
                    EnsembleKind::lr, EnsembleKind::rf, EnsembleKind::gnb, EnsembleKind::svm,
                    EnsembleKind::multistage }) {
        if (to_string(k) == s) {
            return k;
        }
    }
    throw ConfigError("unknown method: " + std::string(s));
}

bool is_supervised(EnsembleKind k) {
    return k == EnsembleKind::lr || k == EnsembleKind::rf || k == EnsembleKind::gnb || k == EnsembleKind::svm ||
           k == EnsembleKind::multistage;
}

namespace {

Method learner_of(EnsembleKind k) {
    switch (k) {
    case EnsembleKind::lr: return Method::lr;
    case EnsembleKind::rf: return Method::rf;
    case EnsembleKind::gnb: return Method::gnb;
    case EnsembleKind::svm: return Method::svm;
    default: throw Error("not a learner: " + std::string(to_string(k)));
    }
}

Feature default_feature(EnsembleKind k) {
    return k == EnsembleKind::multistage ? Feature::d : Feature::z;
}

}  // namespace

std::string EnsembleMethod::label() const {
    std::string out(to_string(kind));
    if (kind == EnsembleKind::single) {
        out += ":" + scorer;
    }
    if (feature != default_feature(kind)) {
        out += "@";
        out += to_string(feature);
    }
    return out;
}

EnsembleMethod parse_ensemble_method(const nlohmann::json & j) {
    EnsembleMethod m;
    if (j.is_string()) {
        std::string s = j.get<std::string>();
        std::optional<Feature> feature;
        if (const auto at = s.find('@'); at != std::string::npos) {
            feature = parse_feature(s.substr(at + 1));
            s = s.substr(0, at);
        }
        if (const auto colon = s.find(':'); colon != std::string::npos) {
            m.scorer = s.substr(colon + 1);
            s = s.substr(0, colon);
        }
        m.kind = parse_ensemble_kind(s);
        m.feature = feature.value_or(default_feature(m.kind));
    } else if (j.is_object()) {
        if (!j.contains("kind") || !j["kind"].is_string()) {
            throw ConfigError("method object needs a \"kind\"");
        }
        m.kind = parse_ensemble_kind(j["kind"].get<std::string>());
        m.feature = j.contains("feature") ? parse_feature(j["feature"].get<std::string>()) : default_feature(m.kind);
        m.scorer = j.value("scorer", std::string{});
        if (j.contains("params")) {
            m.params = j["params"];
        }
    } else {
        throw ConfigError("method must be a string or an object");
    }
    if (m.kind == EnsembleKind::single && m.scorer.empty()) {
        throw ConfigError("single needs a scorer, e.g. single:<name>");
    }
    if (m.kind != EnsembleKind::single && !m.scorer.empty()) {
        throw ConfigError("only single takes a scorer: " + m.label());
    }
    if (m.kind == EnsembleKind::multistage && m.feature != Feature::d) {
        throw ConfigError("multistage operates on d");
    }
    return m;
}

double summarize(std::span<const double> scores, EnsembleKind kind) {
    if (scores.empty()) {
        throw Error("summarize: no scores");
    }
    for (double s : scores) {
        if (!std::isfinite(s)) {
            throw Error("summarize: non-finite score");
        }
    }
    switch (kind) {
    case EnsembleKind::max: return *std::max_element(scores.begin(), scores.end());
    case EnsembleKind::mean: {
        double s = 0.0;
        for (double v : scores) {
            s += v;
        }
        return s / static_cast<double>(scores.size());
    }
    case EnsembleKind::median: {
        std::vector<double> v(scores.begin(), scores.end());
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    }
    default: throw Error("summarize: " + std::string(to_string(kind)) + " is not a summary statistic");
    }
}

double MultiStageStage::threshold() const {
    return std_d > 0.0 ? mean_d - z_opt * std_d : mean_d;
}

std::vector<double> default_z_grid() {
    std::vector<double> g;
    for (int i = 0; i <= 12; ++i) {
        g.push_back(0.25 * i);
    }
    return g;
}

std::vector<std::string> order_by_complexity(const std::map<std::string, std::uint64_t> & complexity) {
    std::vector<std::pair<std::string, std::uint64_t>> v(complexity.begin(), complexity.end());
    std::stable_sort(v.begin(), v.end(), [](const auto & a, const auto & b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    std::vector<std::string> out;
    for (auto & [name, c] : v) {
        out.push_back(name);
    }
    return out;
}

double multistage_score(const MultiStageModel & model, std::span<const std::string> scorer_names,
                        std::span<const double> d_values) {
    if (scorer_names.size() != d_values.size()) {
        throw Error("multistage_score: names and values differ in length");
    }
    if (model.stages.empty()) {
        throw Error("multistage_score: model has no stages");
    }
    double sum = 0.0;
    std::size_t visited = 0;
    for (const auto & stage : model.stages) {
        const auto it = std::find(scorer_names.begin(), scorer_names.end(), stage.scorer);
        if (it == scorer_names.end()) {
            throw Error("multistage_score: missing scorer " + stage.scorer);
        }
        const double d = d_values[static_cast<std::size_t>(it - scorer_names.begin())];
        sum += d;
        ++visited;
        if (d < stage.threshold()) {
            break;
        }
    }
    return sum / static_cast<double>(visited);
}

std::vector<double> multistage_scores(const MultiStageModel & model, const ScoreMatrix & matrix) {
    std::vector<double> out(matrix.rows());
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        out[i] = multistage_score(model, matrix.scorer_names, matrix.row(i, Feature::d));
    }
    return out;
}

MultiStageModel fit_multistage(const ScoreMatrix & train, const std::map<std::string, std::uint64_t> & complexity,
                               std::span<const double> z_grid) {
    train.validate();
    if (z_grid.empty()) {
        throw Error("fit_multistage: empty z grid");
    }
    const auto labels = binary_labels(train);
    const bool both = std::find(labels.begin(), labels.end(), 0) != labels.end() &&
                      std::find(labels.begin(), labels.end(), 1) != labels.end();
    if (!both) {
        throw Error("fit_multistage: training matrix needs both labels");
    }
    std::map<std::string, std::uint64_t> used;
    for (const auto & name : train.scorer_names) {
        const auto it = complexity.find(name);
        if (it == complexity.end()) {
            throw Error("fit_multistage: no complexity for scorer " + name);
        }
        used[name] = it->second;
    }

    MultiStageModel model;
    const double middle = z_grid[(z_grid.size() - 1) / 2];
    for (const auto & name : order_by_complexity(used)) {
        const auto d = train.column(train.scorer_index(name), Feature::d);
        MultiStageStage stage;
        stage.scorer = name;
        stage.complexity = used[name];
        for (double v : d) {
            stage.mean_d += v;
        }
        stage.mean_d /= static_cast<double>(d.size());
        if (d.size() >= 2) {
            stage.std_d = sample_stddev(d);
        }
        if (stage.std_d == 0.0) {
            warn("multistage: d has zero spread for scorer " + name + "; its threshold is the mean");
        }
        stage.z_opt = middle;
        model.stages.push_back(stage);
    }

    for (auto & stage : model.stages) {
        double best_auc = -1.0;
        double best_z = 0.0;
        for (double z : z_grid) {
            stage.z_opt = z;
            const double auc = auroc(multistage_scores(model, train), labels);
            if (auc > best_auc || (auc == best_auc && z < best_z)) {
                best_auc = auc;
                best_z = z;
            }
        }
        stage.z_opt = best_z;
    }
    return model;
}

nlohmann::json to_json(const MultiStageModel & model) {
    nlohmann::json j;
    j["format"] = "curvens-multistage-v1";
    nlohmann::json stages = nlohmann::json::array();
    for (const auto & s : model.stages) {
        stages.push_back({ { "scorer", s.scorer },
                           { "complexity", s.complexity },
                           { "mean_d", s.mean_d },
                           { "std_d", s.std_d },
                           { "z_opt", s.z_opt } });
    }
    j["stages"] = std::move(stages);
    return j;
}

MultiStageModel multistage_from_json(const nlohmann::json & j) {
    if (!j.is_object() || j.value("format", std::string{}) != "curvens-multistage-v1") {
        throw ConfigError("not a curvens-multistage-v1 model");
    }
    MultiStageModel m;
    try {
        for (const auto & s : j.at("stages")) {
            MultiStageStage st;
            st.scorer = s.at("scorer").get<std::string>();
            st.complexity = s.at("complexity").get<std::uint64_t>();
            st.mean_d = s.at("mean_d").get<double>();
            st.std_d = s.at("std_d").get<double>();
            st.z_opt = s.at("z_opt").get<double>();
            if (st.std_d < 0.0) {
                throw ConfigError("multistage: negative std_d");
            }
            m.stages.push_back(std::move(st));
        }
    } catch (const nlohmann::json::exception & e) {
        throw ConfigError(std::string("multistage model: ") + e.what());
    }
    return m;
}

FeatureMatrix feature_matrix(const ScoreMatrix & matrix, Feature f) {
    FeatureMatrix X(static_cast<Eigen::Index>(matrix.rows()), static_cast<Eigen::Index>(matrix.cols()));
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        for (std::size_t j = 0; j < matrix.cols(); ++j) {
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = matrix.cells[i][j].feature(f);
        }
    }
    return X;
}

BinaryLabels binary_labels(const ScoreMatrix & matrix) {
    BinaryLabels y;
    y.reserve(matrix.rows());
    for (auto l : matrix.labels) {
        y.push_back(l == Label::machine ? 1 : 0);
    }
    return y;
}

TrainedModel fit_ensemble(const EnsembleMethod & method, const ScoreMatrix & train,
                          const std::map<std::string, std::uint64_t> & complexity, std::uint64_t seed) {
    if (!is_supervised(method.kind)) {
        return std::monostate{};
    }
    if (method.kind == EnsembleKind::multistage) {
        std::vector<double> grid = default_z_grid();
        if (method.params.contains("z_grid")) {
            grid = method.params["z_grid"].get<std::vector<double>>();
        }
        return fit_multistage(train, complexity, grid);
    }
    return fit_aggregator(learner_of(method.kind), feature_matrix(train, method.feature), binary_labels(train),
                          train.scorer_names, method.params, seed);
}

std::vector<double> apply_ensemble(const EnsembleMethod & method, const ScoreMatrix & matrix,
                                   const TrainedModel & trained) {
    matrix.validate();
    switch (method.kind) {
    case EnsembleKind::single:
        return matrix.column(matrix.scorer_index(method.scorer), method.feature);
    case EnsembleKind::max:
    case EnsembleKind::mean:
    case EnsembleKind::median: {
        std::vector<double> out(matrix.rows());
        for (std::size_t i = 0; i < matrix.rows(); ++i) {
            out[i] = summarize(matrix.row(i, method.feature), method.kind);
        }
        return out;
    }
    case EnsembleKind::multistage: {
        const auto * ms = std::get_if<MultiStageModel>(&trained);
        if (ms == nullptr) {
            throw Error("multistage needs a trained multi-stage model");
        }
        return multistage_scores(*ms, matrix);
    }
    default: {
        const auto * agg = std::get_if<TrainedAggregator>(&trained);
        if (agg == nullptr) {
            throw Error(std::string(to_string(method.kind)) + " needs a trained model");
        }
        if (agg->method != learner_of(method.kind)) {
            throw Error("trained model is " + std::string(to_string(agg->method)) + ", method is " +
                        std::string(to_string(method.kind)));
        }
        return predict_proba(*agg, feature_matrix(matrix, method.feature), matrix.scorer_names);
    }
    }
}

void save_trained_model(const TrainedModel & model, const std::filesystem::path & path) {
    nlohmann::json j;
    if (const auto * agg = std::get_if<TrainedAggregator>(&model)) {
        j = to_json(*agg);
    } else if (const auto * ms = std::get_if<MultiStageModel>(&model)) {
        j = to_json(*ms);
    } else {
        throw Error("save_trained_model: nothing to save");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << j.dump() << '\n';
}

TrainedModel load_trained_model(const std::filesystem::path & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open " + path.string());
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error & e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    if (j.is_object() && j.value("format", std::string{}) == "curvens-multistage-v1") {
        return multistage_from_json(j);
    }
    return aggregator_from_json(j);
}

ScoreMatrix exclude_scorer(const ScoreMatrix & matrix, std::string_view name) {
    const std::size_t drop = matrix.scorer_index(name);
    ScoreMatrix out = matrix;
    out.scorer_names.erase(out.scorer_names.begin() + static_cast<std::ptrdiff_t>(drop));
    for (auto & row : out.cells) {
        row.erase(row.begin() + static_cast<std::ptrdiff_t>(drop));
    }
    return out;
}

ScoreMatrix restore_scorer(const ScoreMatrix & target, const ScoreMatrix & source, std::string_view name) {
    if (std::find(target.scorer_names.begin(), target.scorer_names.end(), name) != target.scorer_names.end()) {
        throw Error("scorer already present: " + std::string(name));
    }
    const std::size_t col = source.scorer_index(name);
    ScoreMatrix out = target;
    out.scorer_names.emplace_back(name);
    for (std::size_t i = 0; i < out.rows(); ++i) {
        const auto it = std::find(source.sample_ids.begin(), source.sample_ids.end(), out.sample_ids[i]);
        if (it == source.sample_ids.end()) {
            throw Error("restore_scorer: sample " + out.sample_ids[i] + " not in source");
        }
        out.cells[i].push_back(source.cells[static_cast<std::size_t>(it - source.sample_ids.begin())][col]);
    }
    return out;
}

ScoreMatrix select_rows(const ScoreMatrix & matrix, std::span<const std::size_t> rows) {
    ScoreMatrix out;
    out.scorer_names = matrix.scorer_names;
    for (auto r : rows) {
        out.sample_ids.push_back(matrix.sample_ids.at(r));
        out.labels.push_back(matrix.labels.at(r));
        out.cells.push_back(matrix.cells.at(r));
    }
    return out;
}

}  // namespace curvens
