#include "curvens/experiment.hpp"

#include "curvens/auroc.hpp"
#include "curvens/error.hpp"
#include "curvens/parallel.hpp"
#include "curvens/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace curvens {

void GenerationConfig::validate() const {
    if (prompt_tokens < 1) {
        throw ConfigError("generation: prompt_tokens must be >= 1");
    }
    if (max_tokens && *max_tokens < 1) {
        throw ConfigError("generation: max_tokens must be >= 1");
    }
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw ConfigError("generation: temperature must be > 0");
    }
}

nlohmann::json to_json(const GenerationConfig & cfg) {
    nlohmann::json j;
    j["prompt_tokens"] = cfg.prompt_tokens;
    j["max_tokens"] = cfg.max_tokens ? nlohmann::json(*cfg.max_tokens) : nlohmann::json(nullptr);
    j["temperature"] = cfg.temperature;
    j["seed"] = cfg.seed;
    return j;
}

GenerationConfig generation_config_from_json(const nlohmann::json & j) {
    if (!j.is_object()) {
        throw ConfigError("generation config must be an object");
    }
    GenerationConfig cfg;
    try {
        for (const auto & [key, value] : j.items()) {
            if (key == "prompt_tokens") {
                cfg.prompt_tokens = value.get<std::size_t>();
            } else if (key == "max_tokens") {
                if (!value.is_null()) {
                    cfg.max_tokens = value.get<std::size_t>();
                }
            } else if (key == "temperature") {
                cfg.temperature = value.get<double>();
            } else if (key == "seed") {
                cfg.seed = value.get<std::uint64_t>();
            } else {
                throw ConfigError("unknown key \"" + key + "\"");
            }
        }
    } catch (const nlohmann::json::exception & e) {
        throw ConfigError(std::string("generation config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

namespace {

// Text up to and including word `count - 1`, with its original spacing.
std::string prompt_prefix(const TokenizedText & t, std::size_t count) {
    std::string out = t.separators[0];
    for (std::size_t i = 0; i < count; ++i) {
        if (i > 0) {
            out += t.separators[i];
        }
        out += t.words[i];
    }
    return out;
}

}  // namespace

Dataset make_synthetic_dataset(const Dataset & human, const LanguageModel & base, const GenerationConfig & cfg,
                               unsigned jobs) {
    cfg.validate();
    std::vector<const TextSample *> eligible;
    std::size_t skipped = 0;
    for (const auto & s : human.samples) {
        if (s.label != Label::human) {
            warn("sample " + s.id + " is not labeled human; skipped");
            ++skipped;
        } else if (count_words(s.text) < cfg.prompt_tokens) {
            warn("sample " + s.id + " has fewer than " + std::to_string(cfg.prompt_tokens) + " words; skipped");
            ++skipped;
        } else {
            eligible.push_back(&s);
        }
    }
    if (eligible.empty()) {
        throw Error("no sample of " + human.name + " is eligible for generation (" + std::to_string(skipped) +
                    " skipped)");
    }

    std::vector<std::string> generated(eligible.size());
    std::vector<std::string> errors(eligible.size());
    parallel_for(eligible.size(), jobs, [&](std::size_t i) {
        const TextSample & s = *eligible[i];
        const auto tokens = tokenize_words(s.text);
        const std::size_t rest = tokens.words.size() - cfg.prompt_tokens;
        const std::size_t max_tokens = cfg.max_tokens.value_or(std::max<std::size_t>(rest, 1));
        try {
            generated[i] = base.generate(prompt_prefix(tokens, cfg.prompt_tokens), max_tokens, cfg.temperature,
                                         derive_seed(cfg.seed, s.id));
        } catch (const std::exception & e) {
            errors[i] = e.what();
        }
    });

    std::size_t failed = 0;
    std::string first_error;
    Dataset out;
    out.name = human.name;
    for (std::size_t i = 0; i < eligible.size(); ++i) {
        const TextSample & s = *eligible[i];
        if (!errors[i].empty()) {
            warn("generation failed for " + s.id + ": " + errors[i]);
            if (failed++ == 0) {
                first_error = errors[i];
            }
            continue;
        }
        if (count_words(generated[i]) == 0) {
            warn("generation for " + s.id + " is empty; skipped");
            if (failed++ == 0) {
                first_error = "empty generation";
            }
            continue;
        }
        out.add(s);
        TextSample m;
        m.id = s.id + "/" + base.name();
        m.text = std::move(generated[i]);
        m.label = Label::machine;
        m.source_model = base.name();
        m.dataset = s.dataset ? s.dataset : std::optional<std::string>(human.name);
        out.add(std::move(m));
    }
    if (2 * failed > eligible.size()) {
        throw Error("generation failed for " + std::to_string(failed) + " of " + std::to_string(eligible.size()) +
                    " samples: " + first_error);
    }
    return out;
}

void ExperimentConfig::validate() const {
    if (datasets.empty()) {
        throw ConfigError("datasets: at least one dataset is required");
    }
    if (base_models.empty()) {
        throw ConfigError("base_models: at least one base model is required");
    }
    if (scoring_models.empty()) {
        throw ConfigError("scoring_models: at least one scoring model is required");
    }
    if (methods.empty()) {
        throw ConfigError("methods: at least one method is required");
    }
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ConfigError("train_fraction must lie in (0, 1)");
    }
    if (max_samples && *max_samples < 1) {
        throw ConfigError("max_samples must be >= 1");
    }
    perturbation.validate();
    generation.validate();
    auto unique = [](const auto & items, const char * field, auto name_of) {
        std::set<std::string> seen;
        for (const auto & item : items) {
            if (!seen.insert(name_of(item)).second) {
                throw ConfigError(std::string(field) + ": duplicate name " + name_of(item));
            }
        }
    };
    unique(datasets, "datasets", [](const DatasetRef & d) { return d.name; });
    unique(base_models, "base_models", [](const ModelSpec & m) { return m.name; });
    unique(scoring_models, "scoring_models", [](const ModelSpec & m) { return m.name; });
}

namespace {

template <typename F>
auto field(const char * name, F && parse) {
    try {
        return parse();
    } catch (const nlohmann::json::exception & e) {
        throw ConfigError(std::string("field \"") + name + "\": " + e.what());
    } catch (const std::exception & e) {
        throw ConfigError(std::string("field \"") + name + "\": " + e.what());
    }
}

std::vector<ModelSpec> model_list(const nlohmann::json & j, const std::filesystem::path & base_dir) {
    if (!j.is_array()) {
        throw ConfigError("expected an array of model specs");
    }
    std::vector<ModelSpec> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        try {
            out.push_back(model_spec_from_json(j[i], base_dir));
        } catch (const std::exception & e) {
            throw ConfigError("[" + std::to_string(i) + "] " + e.what());
        }
    }
    return out;
}

nlohmann::json method_to_json(const EnsembleMethod & m) {
    nlohmann::json j;
    j["kind"] = std::string(to_string(m.kind));
    j["feature"] = std::string(to_string(m.feature));
    if (!m.scorer.empty()) {
        j["scorer"] = m.scorer;
    }
    if (!m.params.empty()) {
        j["params"] = m.params;
    }
    return j;
}

}  // namespace

ExperimentConfig experiment_config_from_json(const nlohmann::json & j, const std::filesystem::path & base_dir) {
    if (!j.is_object()) {
        throw ConfigError("experiment config must be a JSON object");
    }
    static const std::set<std::string> known = { "datasets",     "base_models", "scoring_models",
                                                 "filler",       "perturbation", "generation",
                                                 "methods",      "exclude_base_from_scorers",
                                                 "train_fraction", "seed",       "max_samples" };
    for (const auto & [key, value] : j.items()) {
        if (!known.contains(key)) {
            throw ConfigError("unknown field \"" + key + "\"");
        }
    }
    for (const char * required : { "datasets", "base_models", "scoring_models", "filler", "methods" }) {
        if (!j.contains(required)) {
            throw ConfigError(std::string("missing field \"") + required + "\"");
        }
    }

    ExperimentConfig cfg;
    cfg.datasets = field("datasets", [&] {
        std::vector<DatasetRef> out;
        for (const auto & d : j.at("datasets")) {
            DatasetRef ref;
            if (d.is_string()) {
                ref.path = d.get<std::string>();
            } else {
                ref.path = d.at("path").get<std::string>();
                ref.name = d.value("name", std::string{});
            }
            if (ref.path.is_relative() && !base_dir.empty()) {
                ref.path = base_dir / ref.path;
            }
            if (ref.name.empty()) {
                ref.name = ref.path.stem().string();
            }
            out.push_back(std::move(ref));
        }
        return out;
    });
    cfg.base_models = field("base_models", [&] { return model_list(j.at("base_models"), base_dir); });
    cfg.scoring_models = field("scoring_models", [&] { return model_list(j.at("scoring_models"), base_dir); });
    cfg.filler = field("filler", [&] { return model_spec_from_json(j.at("filler"), base_dir); });
    if (j.contains("perturbation")) {
        cfg.perturbation = field("perturbation", [&] { return perturbation_config_from_json(j["perturbation"]); });
    }
    if (j.contains("generation")) {
        cfg.generation = field("generation", [&] { return generation_config_from_json(j["generation"]); });
    }
    cfg.methods = field("methods", [&] {
        std::vector<EnsembleMethod> out;
        const auto & arr = j.at("methods");
        if (!arr.is_array()) {
            throw ConfigError("expected an array");
        }
        for (std::size_t i = 0; i < arr.size(); ++i) {
            try {
                out.push_back(parse_ensemble_method(arr[i]));
            } catch (const std::exception & e) {
                throw ConfigError("[" + std::to_string(i) + "] " + e.what());
            }
        }
        return out;
    });
    if (j.contains("exclude_base_from_scorers")) {
        cfg.exclude_base_from_scorers =
            field("exclude_base_from_scorers", [&] { return j["exclude_base_from_scorers"].get<bool>(); });
    }
    if (j.contains("train_fraction")) {
        cfg.train_fraction = field("train_fraction", [&] { return j["train_fraction"].get<double>(); });
    }
    if (j.contains("seed")) {
        cfg.seed = field("seed", [&] { return j["seed"].get<std::uint64_t>(); });
    }
    if (j.contains("max_samples") && !j["max_samples"].is_null()) {
        cfg.max_samples = field("max_samples", [&] { return j["max_samples"].get<std::size_t>(); });
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open config " + path.string());
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error & e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return experiment_config_from_json(j, path.parent_path());
}

nlohmann::json to_json(const ExperimentConfig & cfg) {
    nlohmann::json j;
    j["datasets"] = nlohmann::json::array();
    for (const auto & d : cfg.datasets) {
        j["datasets"].push_back({ { "name", d.name }, { "path", d.path.string() } });
    }
    for (const char * key : { "base_models", "scoring_models" }) {
        j[key] = nlohmann::json::array();
    }
    for (const auto & m : cfg.base_models) {
        j["base_models"].push_back(to_json(m));
    }
    for (const auto & m : cfg.scoring_models) {
        j["scoring_models"].push_back(to_json(m));
    }
    j["filler"] = to_json(cfg.filler);
    j["perturbation"] = to_json(cfg.perturbation);
    j["generation"] = to_json(cfg.generation);
    j["methods"] = nlohmann::json::array();
    for (const auto & m : cfg.methods) {
        j["methods"].push_back(method_to_json(m));
    }
    j["exclude_base_from_scorers"] = cfg.exclude_base_from_scorers;
    j["train_fraction"] = cfg.train_fraction;
    j["seed"] = cfg.seed;
    j["max_samples"] = cfg.max_samples ? nlohmann::json(*cfg.max_samples) : nlohmann::json(nullptr);
    return j;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(const std::vector<Label> & labels,
                                                                               double train_fraction,
                                                                               std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw Error("train_fraction must lie in (0, 1)");
    }
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    Rng rng(seed);
    for (Label cls : { Label::human, Label::machine }) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == cls) {
                idx.push_back(i);
            }
        }
        if (idx.size() < 2) {
            throw Error("train/test split needs at least two " + std::string(to_string(cls)) + " samples");
        }
        for (std::size_t i = idx.size() - 1; i > 0; --i) {
            std::swap(idx[i], idx[rng.below(i + 1)]);
        }
        const auto n = static_cast<double>(idx.size());
        const auto k = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(train_fraction * n)), 1,
                                               idx.size() - 1);
        train.insert(train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
        test.insert(test.end(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end());
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return { train, test };
}

namespace {

bool is_summary(EnsembleKind k) {
    return k == EnsembleKind::max || k == EnsembleKind::mean || k == EnsembleKind::median;
}

std::string baseline_label(Feature f) {
    return f == Feature::z ? "baseline" : "baseline@d";
}

struct CellMethod {
    std::string label;
    std::optional<EnsembleMethod> method;  // unset for baselines
    Feature feature = Feature::z;
};

// Expands "single:*" over the cell's scorers and prepends one baseline per
// feature used by a summary statistic.
std::vector<CellMethod> expand_methods(const std::vector<EnsembleMethod> & methods,
                                       const std::vector<std::string> & scorers) {
    std::vector<CellMethod> out;
    std::set<std::string> seen;
    auto push = [&](CellMethod cm) {
        if (seen.insert(cm.label).second) {
            out.push_back(std::move(cm));
        }
    };
    for (const auto & m : methods) {
        if (is_summary(m.kind)) {
            push({ baseline_label(m.feature), std::nullopt, m.feature });
        }
    }
    for (const auto & m : methods) {
        if (m.kind == EnsembleKind::single && m.scorer == "*") {
            for (const auto & s : scorers) {
                EnsembleMethod one = m;
                one.scorer = s;
                push({ one.label(), one, one.feature });
            }
        } else {
            push({ m.label(), m, m.feature });
        }
    }
    return out;
}

std::string to_hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

class ModelCache {
public:
    ModelPtr get(const ModelSpec & spec) {
        const std::string key = to_json(spec).dump();
        auto it = cache_.find(key);
        if (it == cache_.end()) {
            Entry e;
            try {
                e.model = make_model(spec);
            } catch (const std::exception & ex) {
                e.error = "model " + spec.name + ": " + ex.what();
            }
            it = cache_.emplace(key, std::move(e)).first;
        }
        if (!it->second.error.empty()) {
            throw Error(it->second.error);
        }
        return it->second.model;
    }

private:
    struct Entry {
        ModelPtr model;
        std::string error;
    };
    std::map<std::string, Entry> cache_;
};

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig & cfg, const RunOptions & options) {
    cfg.validate();
    ExperimentOutcome outcome;
    auto & report = outcome.report;
    report.seed = cfg.seed;
    report.config_hash = to_hex(fnv1a64(to_json(cfg).dump()));

    ModelCache models;
    std::map<std::string, std::pair<Dataset, std::string>> datasets;
    for (const auto & ref : cfg.datasets) {
        auto & slot = datasets[ref.name];
        try {
            slot.first = load_jsonl(ref.path);
            slot.first.name = ref.name;
            if (cfg.max_samples && slot.first.samples.size() > *cfg.max_samples) {
                slot.first.samples.resize(*cfg.max_samples);
            }
        } catch (const std::exception & e) {
            slot.second = "dataset " + ref.name + ": " + e.what();
        }
    }

    for (const auto & base_spec : cfg.base_models) {
        std::vector<ModelSpec> scorer_specs;
        for (const auto & s : cfg.scoring_models) {
            if (!(cfg.exclude_base_from_scorers && s.name == base_spec.name)) {
                scorer_specs.push_back(s);
            }
        }
        std::vector<std::string> scorer_names;
        for (const auto & s : scorer_specs) {
            scorer_names.push_back(s.name);
        }
        const auto cell_methods = expand_methods(cfg.methods, scorer_names);

        for (const auto & ref : cfg.datasets) {
            const std::string where = base_spec.name + "/" + ref.name;
            CellArtifacts art;
            art.base_model = base_spec.name;
            art.dataset = ref.name;
            auto fail_all = [&](const std::string & message) {
                warn(where + ": " + message);
                for (const auto & cm : cell_methods) {
                    report.cells.push_back({ base_spec.name, ref.name, cm.label, std::nan(""), 0, 0, cfg.seed,
                                             where + ": " + message });
                }
            };

            std::map<std::string, std::uint64_t> complexity;
            try {
                if (scorer_specs.empty()) {
                    throw Error("no scoring models left after excluding the base model");
                }
                const auto & [human, load_error] = datasets.at(ref.name);
                if (!load_error.empty()) {
                    throw Error(load_error);
                }
                const auto base = models.get(base_spec);
                const auto filler = models.get(cfg.filler);
                std::vector<ModelPtr> scorers;
                for (const auto & s : scorer_specs) {
                    scorers.push_back(models.get(s));
                    complexity[s.name] = effective_complexity(s, *scorers.back());
                }
                const Dataset synth = make_synthetic_dataset(human, *base, cfg.generation, options.jobs);
                const auto sets = perturb_dataset(synth, *filler, cfg.perturbation, options.jobs);
                const ScoreMatrix full = build_score_matrix(sets, scorers, { options.jobs, false });
                art.matrix = full.complete_rows();
                if (art.matrix.rows() < full.rows()) {
                    warn(where + ": dropped " + std::to_string(full.rows() - art.matrix.rows()) +
                         " samples with failed scores");
                }
            } catch (const std::exception & e) {
                fail_all(e.what());
                outcome.cells.push_back(std::move(art));
                continue;
            }

            const ScoreMatrix & matrix = art.matrix;
            const auto labels = binary_labels(matrix);
            std::optional<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> split;
            std::string split_error;

            for (const auto & cm : cell_methods) {
                ReportCell cell{ base_spec.name, ref.name, cm.label, std::nan(""), 0, 0, cfg.seed, {} };
                MethodScores ms;
                ms.method = cm.label;
                try {
                    if (!cm.method) {
                        double sum = 0.0;
                        for (std::size_t c = 0; c < matrix.cols(); ++c) {
                            sum += auroc(matrix.column(c, cm.feature), labels);
                        }
                        cell.auroc = sum / static_cast<double>(matrix.cols());
                        cell.n_test = matrix.rows();
                    } else if (is_supervised(cm.method->kind)) {
                        if (!split && split_error.empty()) {
                            try {
                                split = stratified_split(matrix.labels, cfg.train_fraction,
                                                         derive_seed(cfg.seed, "split/" + where));
                            } catch (const std::exception & e) {
                                split_error = e.what();
                            }
                        }
                        if (!split) {
                            throw Error(split_error);
                        }
                        const ScoreMatrix train = select_rows(matrix, split->first);
                        const ScoreMatrix test = select_rows(matrix, split->second);
                        const auto trained =
                            fit_ensemble(*cm.method, train, complexity, derive_seed(cfg.seed, "fit/" + where));
                        ms.scores = apply_ensemble(*cm.method, test, trained);
                        ms.sample_ids = test.sample_ids;
                        ms.labels = test.labels;
                        cell.auroc = auroc(ms.scores, binary_labels(test));
                        cell.n_test = test.rows();
                        cell.n_train = train.rows();
                    } else {
                        ms.scores = apply_ensemble(*cm.method, matrix);
                        ms.sample_ids = matrix.sample_ids;
                        ms.labels = matrix.labels;
                        cell.auroc = auroc(ms.scores, labels);
                        cell.n_test = matrix.rows();
                    }
                } catch (const std::exception & e) {
                    cell.auroc = std::nan("");
                    cell.error = where + "/" + cm.label + ": " + e.what();
                    warn(cell.error);
                    ms = MethodScores{ cm.label, {}, {}, {} };
                }
                report.cells.push_back(std::move(cell));
                if (!ms.scores.empty()) {
                    art.scores.push_back(std::move(ms));
                }
            }
            outcome.cells.push_back(std::move(art));
        }
    }
    return outcome;
}

}  // namespace curvens
