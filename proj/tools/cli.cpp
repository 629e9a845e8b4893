#include "cli.hpp"

#include "curvens/auroc.hpp"
#include "curvens/csv.hpp"
#include "curvens/curvature.hpp"
#include "curvens/ensemble.hpp"
#include "curvens/error.hpp"
#include "curvens/experiment.hpp"
#include "curvens/learners.hpp"
#include "curvens/lm.hpp"
#include "curvens/ngram.hpp"
#include "curvens/perturb.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace curvens {

namespace fs = std::filesystem;

namespace {

void write_file(const fs::path & path, std::string_view content) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
        throw Error("write failed: " + path.string());
    }
}

std::string read_file(const fs::path & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Writes to --out when given, otherwise to stdout.
void emit(const std::string & out_path, std::string_view content, std::ostream & out) {
    if (out_path.empty() || out_path == "-") {
        out << content;
    } else {
        write_file(out_path, content);
    }
}

std::string file_safe(std::string_view s) {
    std::string out;
    for (char c : s) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                        c == '_' || c == '.';
        out += ok ? c : '_';
    }
    return out;
}

std::map<std::string, std::uint64_t> parse_complexities(const std::vector<std::string> & entries) {
    std::map<std::string, std::uint64_t> out;
    for (const auto & e : entries) {
        const auto eq = e.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ConfigError("--complexity expects name=value, got " + e);
        }
        try {
            out[e.substr(0, eq)] = std::stoull(e.substr(eq + 1));
        } catch (const std::exception &) {
            throw ConfigError("--complexity: bad value in " + e);
        }
    }
    return out;
}

nlohmann::json parse_json_flag(const std::string & flag, const std::string & text) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error & e) {
        throw ConfigError(flag + ": " + e.what());
    }
}

std::vector<ModelPtr> make_models(const std::vector<std::string> & refs) {
    std::vector<ModelPtr> out;
    for (const auto & r : refs) {
        out.push_back(make_model(parse_model_ref(r)));
    }
    return out;
}

struct PerturbFlags {
    std::size_t n_perturbations = 50;
    std::size_t span_length = 2;
    double mask_fraction = 0.15;
    std::size_t buffer = 1;

    void add(CLI::App & cmd) {
        cmd.add_option("--n-perturbations", n_perturbations, "Rewrites per sample")->capture_default_str();
        cmd.add_option("--span-length", span_length, "Words per masked span")->capture_default_str();
        cmd.add_option("--mask-fraction", mask_fraction, "Fraction of words to mask")->capture_default_str();
        cmd.add_option("--buffer", buffer, "Minimum gap between spans, in words")->capture_default_str();
    }

    PerturbationConfig config(std::uint64_t seed) const {
        PerturbationConfig cfg;
        cfg.num_perturbations = n_perturbations;
        cfg.span_length = span_length;
        cfg.mask_fraction = mask_fraction;
        cfg.buffer = buffer;
        cfg.seed = seed;
        cfg.validate();
        return cfg;
    }
};

EnsembleMethod method_from_flags(const std::string & method, const std::optional<std::string> & feature,
                                 const std::string & params) {
    EnsembleMethod m = parse_ensemble_method(method);
    if (feature) {
        m.feature = parse_feature(*feature);
        if (m.kind == EnsembleKind::multistage && m.feature != Feature::d) {
            throw ConfigError("multistage operates on d");
        }
    }
    if (!params.empty()) {
        m.params = parse_json_flag("--params", params);
    }
    return m;
}

ScoreMatrix load_complete_matrix(const fs::path & path) {
    const ScoreMatrix full = load_score_matrix(path);
    ScoreMatrix m = full.complete_rows();
    if (m.rows() < full.rows()) {
        warn("dropped " + std::to_string(full.rows() - m.rows()) + " samples with failed scores");
    }
    return m;
}

}  // namespace

int run_cli(int argc, const char * const * argv, std::ostream & out, std::ostream & err) {
    CLI::App app{ "Ensemble perturbation-curvature detection of machine-generated text", "curvens" };
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");

    std::string out_path;
    std::uint64_t seed = 0;
    unsigned jobs = 1;

    // train-lm
    auto * train = app.add_subcommand("train-lm", "Train an n-gram language model on a JSONL corpus");
    std::string train_corpus;
    NgramOptions ngram_opts;
    train->add_option("--corpus", train_corpus, "JSONL corpus")->required();
    train->add_option("--order", ngram_opts.order, "n-gram order")->capture_default_str();
    train->add_option("--k", ngram_opts.k, "Add-k smoothing constant")->capture_default_str();
    train->add_option("--min-count", ngram_opts.min_count, "Rarer words map to <unk>")->capture_default_str();
    train->add_option("--name", ngram_opts.name, "Model name (default: output file stem)");
    train->add_option("--out", out_path, "Output model file")->required();

    // generate
    auto * gen = app.add_subcommand("generate", "Sample continuations from a base model");
    std::string gen_model;
    std::string gen_prompt;
    std::string gen_input;
    GenerationConfig gen_cfg;
    std::optional<std::size_t> gen_max;
    gen->add_option("--model", gen_model, "Model reference: n-gram file or remote:<model>[@endpoint]")->required();
    auto * prompt_opt = gen->add_option("--prompt", gen_prompt, "Prompt text (prints one continuation)");
    gen->add_option("--input", gen_input, "Human JSONL dataset; writes the synthetic dataset")
        ->excludes(prompt_opt);
    gen->add_option("--prompt-tokens", gen_cfg.prompt_tokens, "Prompt words taken from each human sample")
        ->capture_default_str();
    gen->add_option("--max-tokens", gen_max, "Tokens to sample (default: match the human sample, or 50)");
    gen->add_option("--temperature", gen_cfg.temperature, "Sampling temperature")->capture_default_str();
    gen->add_option("--seed", seed, "Random seed")->capture_default_str();
    gen->add_option("--jobs", jobs, "Worker threads")->capture_default_str();
    gen->add_option("--out", out_path, "Output file (default: stdout)");

    // perturb
    auto * perturb = app.add_subcommand("perturb", "Write N mask-and-fill rewrites per sample");
    std::string perturb_input;
    std::string perturb_filler;
    PerturbFlags perturb_flags;
    perturb->add_option("--input", perturb_input, "JSONL dataset")->required();
    perturb->add_option("--filler", perturb_filler, "Mask-filling model reference")->required();
    perturb_flags.add(*perturb);
    perturb->add_option("--seed", seed, "Random seed")->capture_default_str();
    perturb->add_option("--jobs", jobs, "Worker threads")->capture_default_str();
    perturb->add_option("--out", out_path, "Output perturbation JSONL (default: stdout)");

    // score
    auto * score = app.add_subcommand("score", "Score perturbation sets under one or more scoring models");
    std::string score_input;
    std::vector<std::string> score_models;
    bool score_strict = false;
    score->add_option("--perturbations", score_input, "Perturbation JSONL")->required();
    score->add_option("--scorer", score_models, "Scoring model reference (repeatable)")->required();
    score->add_flag("--strict", score_strict, "Fail on the first failed cell");
    score->add_option("--jobs", jobs, "Worker threads")->capture_default_str();
    score->add_option("--out", out_path, "Score matrix CSV; raw log-probs go to <out>.raw.jsonl")->required();

    // fit
    auto * fit = app.add_subcommand("fit", "Train a supervised aggregator on a score matrix");
    std::string fit_scores;
    std::string fit_method;
    std::optional<std::string> fit_feature;
    std::string fit_params;
    std::vector<std::string> fit_complexity;
    bool fit_grid = false;
    int fit_folds = 5;
    fit->add_option("--scores", fit_scores, "Score matrix CSV")->required();
    fit->add_option("--method", fit_method, "lr, rf, gnb, svm or multistage")->required();
    fit->add_option("--feature", fit_feature, "Feature: d or z")->check(CLI::IsMember({ "d", "z" }));
    fit->add_option("--params", fit_params, "Hyperparameters as a JSON object");
    fit->add_option("--complexity", fit_complexity, "Scorer complexity name=value (multistage)");
    fit->add_flag("--grid", fit_grid, "Pick hyperparameters by grid search over the default grid");
    fit->add_option("--folds", fit_folds, "Cross-validation folds for --grid")->capture_default_str();
    fit->add_option("--seed", seed, "Random seed")->capture_default_str();
    fit->add_option("--jobs", jobs, "Worker threads for --grid")->capture_default_str();
    fit->add_option("--out", out_path, "Output model file")->required();

    // detect
    auto * detect = app.add_subcommand("detect", "Print a detection score (and verdict) per sample");
    std::string detect_scores;
    std::string detect_input;
    std::string detect_filler;
    std::vector<std::string> detect_scorers;
    std::string detect_method = "mean";
    std::optional<std::string> detect_feature;
    std::string detect_model;
    std::optional<double> detect_threshold;
    PerturbFlags detect_flags;
    auto * scores_opt = detect->add_option("--scores", detect_scores, "Score matrix CSV");
    detect->add_option("--input", detect_input, "JSONL of texts to perturb and score")->excludes(scores_opt);
    detect->add_option("--filler", detect_filler, "Mask-filling model (with --input)");
    detect->add_option("--scorer", detect_scorers, "Scoring model (with --input, repeatable)");
    detect->add_option("--method", detect_method, "Ensemble method")->capture_default_str();
    detect->add_option("--feature", detect_feature, "Feature: d or z")->check(CLI::IsMember({ "d", "z" }));
    detect->add_option("--model", detect_model, "Trained model file (supervised methods)");
    detect->add_option("--threshold", detect_threshold, "Verdict is machine when score >= threshold");
    detect_flags.add(*detect);
    detect->add_option("--seed", seed, "Random seed")->capture_default_str();
    detect->add_option("--jobs", jobs, "Worker threads")->capture_default_str();

    // eval
    auto * eval = app.add_subcommand("eval", "AUROC of ensemble methods on a labeled score matrix");
    std::string eval_scores;
    std::string eval_predictions;
    std::vector<std::string> eval_methods;
    std::optional<std::string> eval_feature;
    std::string eval_model;
    auto * eval_scores_opt = eval->add_option("--scores", eval_scores, "Score matrix CSV");
    eval->add_option("--predictions", eval_predictions, "Per-sample scores CSV (sample_id,label,method,score)")
        ->excludes(eval_scores_opt);
    eval->add_option("--method", eval_methods, "Ensemble method (repeatable; default mean)");
    eval->add_option("--feature", eval_feature, "Feature: d or z")->check(CLI::IsMember({ "d", "z" }));
    eval->add_option("--model", eval_model, "Trained model file (supervised methods)");

    // experiment
    auto * exp = app.add_subcommand("experiment", "Run a full experiment grid from a JSON config");
    std::string exp_config;
    std::optional<std::uint64_t> exp_seed;
    std::optional<std::size_t> exp_n;
    std::optional<std::size_t> exp_span;
    std::optional<double> exp_fraction;
    std::optional<std::size_t> exp_prompt;
    std::optional<double> exp_temperature;
    std::optional<bool> exp_exclude;
    exp->add_option("--config", exp_config, "Experiment config JSON")->required();
    exp->add_option("--out", out_path, "Output directory")->required();
    exp->add_option("--seed", exp_seed, "Override the config seed");
    exp->add_option("--jobs", jobs, "Worker threads")->capture_default_str();
    exp->add_option("--n-perturbations", exp_n, "Override perturbation.num_perturbations");
    exp->add_option("--span-length", exp_span, "Override perturbation.span_length");
    exp->add_option("--mask-fraction", exp_fraction, "Override perturbation.mask_fraction");
    exp->add_option("--prompt-tokens", exp_prompt, "Override generation.prompt_tokens");
    exp->add_option("--temperature", exp_temperature, "Override generation.temperature");
    exp->add_flag("--exclude-base,!--no-exclude-base", exp_exclude, "Override exclude_base_from_scorers");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp & e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp & e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError & e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (*train) {
            const Dataset corpus = load_jsonl(train_corpus);
            if (ngram_opts.name.empty()) {
                ngram_opts.name = fs::path(out_path).stem().string();
            }
            const auto model = train_ngram(corpus, ngram_opts);
            model.save(out_path);
            return 0;
        }
        if (*gen) {
            const auto model = make_model(parse_model_ref(gen_model));
            gen_cfg.seed = seed;
            if (!gen_input.empty()) {
                gen_cfg.max_tokens = gen_max;
                const Dataset synth = make_synthetic_dataset(load_jsonl(gen_input), *model, gen_cfg, jobs);
                emit(out_path, to_jsonl(synth), out);
                return 0;
            }
            if (prompt_opt->count() == 0) {
                throw ConfigError("generate needs --prompt or --input");
            }
            gen_cfg.validate();
            const std::string text = model->generate(gen_prompt, gen_max.value_or(50), gen_cfg.temperature, seed);
            emit(out_path, text + "\n", out);
            return 0;
        }
        if (*perturb) {
            const auto cfg = perturb_flags.config(seed);
            const auto filler = make_model(parse_model_ref(perturb_filler));
            const auto sets = perturb_dataset(load_jsonl(perturb_input), *filler, cfg, jobs);
            emit(out_path, to_jsonl(sets), out);
            return 0;
        }
        if (*score) {
            const auto sets = load_perturbations(score_input);
            const auto matrix = build_score_matrix(sets, make_models(score_models), { jobs, score_strict });
            save_score_matrix(matrix, out_path);
            return 0;
        }
        if (*fit) {
            EnsembleMethod m = method_from_flags(fit_method, fit_feature, fit_params);
            if (!is_supervised(m.kind)) {
                throw ConfigError(m.label() + " needs no training");
            }
            const ScoreMatrix matrix = load_complete_matrix(fit_scores);
            if (fit_grid) {
                if (m.kind == EnsembleKind::multistage) {
                    throw ConfigError("--grid applies to lr, rf, gnb and svm");
                }
                const Method learner = parse_method(to_string(m.kind));
                const auto result = grid_search(default_grid(learner), feature_matrix(matrix, m.feature),
                                                binary_labels(matrix), matrix.scorer_names, fit_folds, seed, jobs);
                err << "grid search: best " << result.best.dump() << " cv auroc " << format_double(result.cv_score)
                    << "\n";
                m.params = result.best;
            }
            auto complexity = parse_complexities(fit_complexity);
            if (m.kind == EnsembleKind::multistage) {
                for (const auto & name : matrix.scorer_names) {
                    if (!complexity.contains(name)) {
                        throw ConfigError("multistage needs --complexity " + name + "=<value>");
                    }
                }
            }
            save_trained_model(fit_ensemble(m, matrix, complexity, seed), out_path);
            return 0;
        }
        if (*detect) {
            EnsembleMethod m = method_from_flags(detect_method, detect_feature, "");
            TrainedModel trained;
            if (is_supervised(m.kind)) {
                if (detect_model.empty()) {
                    throw ConfigError(m.label() + " needs --model");
                }
                trained = load_trained_model(detect_model);
            }
            ScoreMatrix matrix;
            if (!detect_scores.empty()) {
                matrix = load_complete_matrix(detect_scores);
            } else if (!detect_input.empty()) {
                if (detect_filler.empty() || detect_scorers.empty()) {
                    throw ConfigError("--input needs --filler and at least one --scorer");
                }
                const auto filler = make_model(parse_model_ref(detect_filler));
                const auto sets =
                    perturb_dataset(load_jsonl(detect_input), *filler, detect_flags.config(seed), jobs);
                matrix = build_score_matrix(sets, make_models(detect_scorers), { jobs, true });
            } else {
                throw ConfigError("detect needs --scores or --input");
            }
            const auto scores = apply_ensemble(m, matrix, trained);
            for (std::size_t i = 0; i < scores.size(); ++i) {
                out << matrix.sample_ids[i] << '\t' << format_double(scores[i]);
                if (detect_threshold) {
                    out << '\t' << (scores[i] >= *detect_threshold ? "machine" : "human");
                }
                out << '\n';
            }
            return 0;
        }
        if (*eval) {
            if (!eval_predictions.empty()) {
                const auto rows = parse_csv(read_file(eval_predictions));
                if (rows.empty() || rows[0] != std::vector<std::string>{ "sample_id", "label", "method", "score" }) {
                    throw ConfigError(eval_predictions + ": expected header sample_id,label,method,score");
                }
                std::vector<std::string> order;
                std::map<std::string, LabeledScores> by_method;
                for (std::size_t r = 1; r < rows.size(); ++r) {
                    if (rows[r].size() != 4) {
                        throw ConfigError(eval_predictions + ": line " + std::to_string(r + 1) + ": expected 4 fields");
                    }
                    if (!by_method.contains(rows[r][2])) {
                        order.push_back(rows[r][2]);
                    }
                    auto & ls = by_method[rows[r][2]];
                    const double s = parse_double(rows[r][3]);
                    (parse_label(rows[r][1]) == Label::machine ? ls.machine_scores : ls.human_scores).push_back(s);
                }
                for (const auto & name : order) {
                    out << name << '\t' << format_double(auroc(by_method[name])) << '\n';
                }
                return 0;
            }
            if (eval_scores.empty()) {
                throw ConfigError("eval needs --scores or --predictions");
            }
            const ScoreMatrix matrix = load_complete_matrix(eval_scores);
            if (eval_methods.empty()) {
                eval_methods.push_back("mean");
            }
            const auto labels = binary_labels(matrix);
            for (const auto & name : eval_methods) {
                EnsembleMethod m = method_from_flags(name, eval_feature, "");
                TrainedModel trained;
                if (is_supervised(m.kind)) {
                    if (eval_model.empty()) {
                        throw ConfigError(m.label() + " needs --model");
                    }
                    trained = load_trained_model(eval_model);
                }
                out << m.label() << '\t' << format_double(auroc(apply_ensemble(m, matrix, trained), labels)) << '\n';
            }
            return 0;
        }
        if (*exp) {
            ExperimentConfig cfg = load_experiment_config(exp_config);
            if (exp_seed) {
                cfg.seed = *exp_seed;
            }
            if (exp_n) {
                cfg.perturbation.num_perturbations = *exp_n;
            }
            if (exp_span) {
                cfg.perturbation.span_length = *exp_span;
            }
            if (exp_fraction) {
                cfg.perturbation.mask_fraction = *exp_fraction;
            }
            if (exp_prompt) {
                cfg.generation.prompt_tokens = *exp_prompt;
            }
            if (exp_temperature) {
                cfg.generation.temperature = *exp_temperature;
            }
            if (exp_exclude) {
                cfg.exclude_base_from_scorers = *exp_exclude;
            }
            cfg.validate();

            const auto outcome = run_experiment(cfg, { jobs });
            const fs::path dir = out_path;
            write_file(dir / "report.csv", emit_report(outcome.report, ReportFormat::csv));
            write_file(dir / "report.json", emit_report(outcome.report, ReportFormat::json));
            write_file(dir / "report.md", emit_report(outcome.report, ReportFormat::markdown));
            for (const auto & cell : outcome.cells) {
                const std::string stem = file_safe(cell.base_model) + "__" + file_safe(cell.dataset);
                write_file(dir / "scores" / (stem + ".csv"), scores_csv(cell.scores));
                if (cell.matrix.rows() > 0) {
                    save_score_matrix(cell.matrix, dir / "scores" / (stem + ".matrix.csv"));
                }
            }
            if (outcome.report.has_failures()) {
                err << "error: some report cells failed; see NA entries in " << (dir / "report.csv").string()
                    << "\n";
                return 1;
            }
            return 0;
        }
    } catch (const ConfigError & e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception & e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace curvens
