#include "curvens/auroc.hpp"
#include "curvens/error.hpp"
#include "curvens/experiment.hpp"
#include "curvens/rng.hpp"
#include "fixture.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

using namespace curvens;

namespace {

std::string words(std::size_t n, const std::string & stem) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        out += (i ? (i % 4 == 0 ? "  " : " ") : "") + stem + std::to_string(i);
    }
    return out;
}

Dataset humans(std::size_t n, std::size_t length = 40) {
    Dataset ds;
    ds.name = "h";
    for (std::size_t i = 0; i < n; ++i) {
        ds.add(test::sample("h" + std::to_string(i), words(length, "w")));
    }
    return ds;
}

// Generator that fails for the listed sample prompts (matched by first word).
class PickyGenerator final : public LanguageModel {
public:
    PickyGenerator(std::set<std::string> bad_first_words) : bad_(std::move(bad_first_words)) {}
    const std::string & name() const override { return name_; }
    std::uint64_t complexity() const override { return 1; }
    LogProbResult log_prob(std::string_view) const override { return { -1.0, 1 }; }
    TokenizedText fill_masks(const MaskedText & m, std::uint64_t) const override { return m.text; }
    std::string generate(std::string_view prompt, std::size_t, double, std::uint64_t) const override {
        const auto first = tokenize_words(prompt).words.front();
        if (bad_.contains(first)) {
            throw Error("refused");
        }
        return std::string(prompt) + " more";
    }

private:
    std::string name_ = "picky";
    std::set<std::string> bad_;
};

ExperimentReport small_report(std::size_t bases, const std::vector<std::string> & methods) {
    ExperimentReport r;
    r.config_hash = "00000000deadbeef";
    r.seed = 9;
    for (std::size_t b = 0; b < bases; ++b) {
        for (std::size_t m = 0; m < methods.size(); ++m) {
            r.cells.push_back({ "base" + std::to_string(b), "news", methods[m], 0.5 + 0.01 * static_cast<double>(b * 7 + m) / 3.0,
                                100, 0, 9, {} });
        }
    }
    return r;
}

// Tiny toy experiment for fast end-to-end checks.
test::ToyExperiment tiny() {
    test::ToyExperiment t;
    t.human_documents = 12;
    t.training_documents = 10;
    t.num_perturbations = 5;
    return t;
}

}  // namespace

TEST_CASE("ten eligible samples give ten pairs") {
    const test::FakeModel base("fake");
    const auto out = make_synthetic_dataset(humans(10), base, GenerationConfig{});
    REQUIRE(out.samples.size() == 20);
    for (std::size_t i = 0; i < 10; ++i) {
        const auto & h = out.samples[2 * i];
        const auto & m = out.samples[2 * i + 1];
        CHECK(h.label == Label::human);
        CHECK(h.id == "h" + std::to_string(i));
        CHECK(m.label == Label::machine);
        CHECK(m.id == h.id + "/fake");
        CHECK(m.source_model == "fake");
        CHECK(m.dataset == "h");
        // Prompt is the first 30 words with their spacing; the continuation
        // defaults to the human sample's remaining length.
        const auto ht = tokenize_words(h.text);
        std::string prefix = ht.separators[0];
        for (std::size_t w = 0; w < 30; ++w) {
            prefix += (w ? ht.separators[w] : "") + ht.words[w];
        }
        CHECK(m.text.rfind(prefix, 0) == 0);
        CHECK(m.text[prefix.size()] == ' ');
        CHECK(count_words(m.text) == count_words(h.text));
    }
}

TEST_CASE("generation uses a per-sample derived seed") {
    const test::FakeModel base("fake");
    GenerationConfig cfg;
    cfg.seed = 77;
    cfg.max_tokens = 3;
    const auto out = make_synthetic_dataset(humans(3), base, cfg);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto & m = out.samples[2 * i + 1];
        const std::string prompt = m.text.substr(0, m.text.size() - 9);
        CHECK(m.text == base.generate(prompt, 3, 1.0, derive_seed(77, "h" + std::to_string(i))));
    }
    CHECK(make_synthetic_dataset(humans(3), base, cfg).samples[1].text == out.samples[1].text);
}

TEST_CASE("short samples are skipped") {
    QuietWarnings quiet;
    const test::FakeModel base("fake");
    auto ds = humans(4);
    ds.add(test::sample("short", "only five words right here"));
    const auto out = make_synthetic_dataset(ds, base, GenerationConfig{});
    CHECK(out.samples.size() == 8);
    for (const auto & s : out.samples) {
        CHECK(s.id.rfind("short", 0) != 0);
    }
}

TEST_CASE("generation tolerates up to half the samples failing") {
    QuietWarnings quiet;
    Dataset ds;
    ds.name = "h";
    for (int i = 0; i < 4; ++i) {
        ds.add(test::sample("s" + std::to_string(i), words(35, "a" + std::to_string(i) + "x")));
    }
    const PickyGenerator two_bad({ "a0x0", "a1x0" });
    CHECK(make_synthetic_dataset(ds, two_bad, GenerationConfig{}).samples.size() == 4);
    const PickyGenerator three_bad({ "a0x0", "a1x0", "a2x0" });
    CHECK_THROWS_WITH(make_synthetic_dataset(ds, three_bad, GenerationConfig{}),
                      doctest::Contains("generation failed for 3 of 4 samples"));
    test::FakeModel broken("broken");
    broken.fail_generate = true;
    CHECK_THROWS(make_synthetic_dataset(ds, broken, GenerationConfig{}));
}

TEST_CASE("generation config validation") {
    GenerationConfig bad;
    bad.temperature = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_THROWS_AS(generation_config_from_json({ { "prompt_tokens", 0 } }), ConfigError);
    CHECK_THROWS_AS(generation_config_from_json({ { "top_p", 0.9 } }), ConfigError);
    const auto cfg = generation_config_from_json({ { "prompt_tokens", 10 }, { "max_tokens", 4 }, { "seed", 5 } });
    CHECK(cfg.prompt_tokens == 10);
    CHECK(cfg.max_tokens == 4u);
    CHECK(generation_config_from_json(to_json(cfg)).seed == 5);
}

TEST_CASE("stratified split properties") {
    Rng rng(3);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<Label> labels;
        const auto n = 4 + rng.below(60);
        std::size_t machines = 0;
        for (std::uint64_t i = 0; i < n; ++i) {
            const bool m = i < 2 || (i >= 4 && rng.below(2));
            labels.push_back(m ? Label::machine : Label::human);
            machines += m;
        }
        const double f = 0.1 + 0.8 * rng.uniform();
        const auto seed = rng.next();
        const auto [train, test] = stratified_split(labels, f, seed);
        REQUIRE(train.size() + test.size() == n);
        REQUIRE(std::is_sorted(train.begin(), train.end()));
        std::vector<std::size_t> all = train;
        all.insert(all.end(), test.begin(), test.end());
        std::sort(all.begin(), all.end());
        for (std::size_t i = 0; i < n; ++i) {
            REQUIRE(all[i] == i);
        }
        for (const auto cls : { Label::human, Label::machine }) {
            const std::size_t total = cls == Label::machine ? machines : n - machines;
            const auto in_train = static_cast<std::size_t>(
                std::count_if(train.begin(), train.end(), [&](std::size_t i) { return labels[i] == cls; }));
            const auto expected = std::clamp<std::size_t>(
                static_cast<std::size_t>(std::llround(f * static_cast<double>(total))), 1, total - 1);
            REQUIRE(in_train == expected);
        }
        REQUIRE(stratified_split(labels, f, seed) == std::make_pair(train, test));
    }
    CHECK_THROWS(stratified_split({ Label::human, Label::human, Label::machine }, 0.5, 1));
    CHECK_THROWS(stratified_split({ Label::human, Label::machine }, 1.5, 1));
}

TEST_CASE("config parsing resolves paths and rejects bad input") {
    test::TempDir dir;
    const auto path = tiny().write(dir.path());
    const auto cfg = load_experiment_config(path);
    CHECK(cfg.datasets.size() == 1);
    CHECK(cfg.datasets[0].path == dir / "human.jsonl");
    CHECK(cfg.base_models.size() == 3);
    CHECK(cfg.scoring_models.size() == 5);
    CHECK(cfg.scoring_models[3].params["train"] == (dir / "train4.jsonl").string());
    CHECK(cfg.perturbation.num_perturbations == 5);
    CHECK(cfg.methods.size() == 4);
    CHECK(cfg.exclude_base_from_scorers);

    auto j = tiny().config();
    j["colour"] = "blue";
    CHECK_THROWS_WITH_AS(experiment_config_from_json(j), doctest::Contains("unknown field \"colour\""), ConfigError);
    j = tiny().config();
    j.erase("methods");
    CHECK_THROWS_WITH_AS(experiment_config_from_json(j), doctest::Contains("missing field \"methods\""), ConfigError);
    j = tiny().config();
    j["methods"] = { "mean", "vote" };
    CHECK_THROWS_WITH_AS(experiment_config_from_json(j), doctest::Contains("field \"methods\": [1] unknown method"),
                         ConfigError);
    j = tiny().config();
    j["perturbation"]["mask_fraction"] = 2.0;
    CHECK_THROWS_WITH_AS(experiment_config_from_json(j), doctest::Contains("field \"perturbation\""), ConfigError);
    j = tiny().config();
    j["scoring_models"].push_back(j["scoring_models"][0]);
    CHECK_THROWS_WITH_AS(experiment_config_from_json(j), doctest::Contains("duplicate name b1"), ConfigError);
    j = tiny().config();
    j["train_fraction"] = 1.0;
    CHECK_THROWS_AS(experiment_config_from_json(j), ConfigError);
    CHECK_THROWS_AS(load_experiment_config(dir / "missing.json"), ConfigError);
    test::write_text(dir / "broken.json", "{ \"datasets\": [\n");
    CHECK_THROWS_AS(load_experiment_config(dir / "broken.json"), ConfigError);

    // The canonical dump parses back to the same dump.
    CHECK(to_json(experiment_config_from_json(to_json(cfg))) == to_json(cfg));
}

TEST_CASE("three bases by two datasets with mean") {
    QuietWarnings quiet;
    test::TempDir dir;
    auto t = tiny();
    t.methods = { "mean" };
    t.write(dir.path());
    auto j = t.config();
    ToyCorpusOptions other;
    other.documents = 10;
    other.seed = 2;
    other.id_prefix = "wiki";
    other.surprise_rate = 0.15;
    save_jsonl(make_toy_corpus(other), dir / "wiki.jsonl");
    j["datasets"].push_back({ { "name", "wiki" }, { "path", "wiki.jsonl" } });
    const auto outcome = run_experiment(experiment_config_from_json(j, dir.path()));
    const auto & r = outcome.report;

    std::size_t mean_cells = 0;
    std::set<std::pair<std::string, std::string>> pairs;
    double sum = 0.0;
    for (const auto & c : r.cells) {
        CHECK(c.ok());
        CHECK(c.auroc >= 0.0);
        CHECK(c.auroc <= 1.0);
        if (c.method == "mean") {
            ++mean_cells;
            sum += c.auroc;
            pairs.insert({ c.base_model, c.dataset });
        }
    }
    CHECK(mean_cells == 6);
    CHECK(pairs.size() == 6);
    CHECK(r.methods() == std::vector<std::string>{ "baseline", "mean" });
    CHECK(r.average("mean") == doctest::Approx(sum / 6.0).epsilon(1e-12));
    CHECK(outcome.cells.size() == 6);

    // Baseline is the mean single-scorer AUROC over the non-base scorers.
    const auto & art = outcome.cells[0];
    CHECK(art.matrix.scorer_names == std::vector<std::string>{ "b2", "b3", "s4", "s5" });
    double single_sum = 0.0;
    for (std::size_t c = 0; c < 4; ++c) {
        single_sum += auroc(art.matrix.column(c, Feature::z), binary_labels(art.matrix));
    }
    CHECK(r.cells[0].method == "baseline");
    CHECK(r.cells[0].auroc == doctest::Approx(single_sum / 4.0).epsilon(1e-12));

    // Rendered table: 6 rows, 2 method columns and an Average row.
    const auto md = emit_report(r, ReportFormat::markdown);
    CHECK(std::count(md.begin(), md.end(), '\n') == 2 + 6 + 1);
}

TEST_CASE("full scorer-by-base grid without exclusion") {
    QuietWarnings quiet;
    test::TempDir dir;
    auto t = tiny();
    t.exclude_base = false;
    t.methods = { "single:*" };
    const auto cfg = load_experiment_config(t.write(dir.path()));
    const auto r = run_experiment(cfg).report;
    CHECK(r.methods() ==
          std::vector<std::string>{ "single:b1", "single:b2", "single:b3", "single:s4", "single:s5" });
    CHECK(r.cells.size() == 15);
    const auto md = emit_report(r, ReportFormat::markdown);
    std::vector<std::string> lines;
    std::stringstream ss(md);
    for (std::string line; std::getline(ss, line);) {
        lines.push_back(line);
    }
    REQUIRE(lines.size() == 2 + 3 + 1);
    for (const auto & line : lines) {
        CHECK(std::count(line.begin(), line.end(), '|') == 2 + 1 + 5);
    }
    CHECK(lines[2].rfind("| b1 | news |", 0) == 0);
    CHECK(lines[5].rfind("| Average |", 0) == 0);
}

TEST_CASE("supervised cells train and test on disjoint halves") {
    QuietWarnings quiet;
    test::TempDir dir;
    auto t = tiny();
    t.methods = { "lr", "multistage", "gnb@d" };
    const auto outcome = run_experiment(load_experiment_config(t.write(dir.path())));
    for (const auto & c : outcome.report.cells) {
        REQUIRE(c.ok());
        CHECK(c.n_train == 12);
        CHECK(c.n_test == 12);
    }
    const auto & art = outcome.cells[0];
    REQUIRE(art.scores.size() == 3);
    CHECK(art.scores[0].sample_ids.size() == 12);
    const auto csv = scores_csv(art.scores);
    CHECK(csv.rfind("sample_id,label,method,score\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 36);
}

TEST_CASE("experiments are deterministic and thread-count independent") {
    QuietWarnings quiet;
    test::TempDir dir;
    auto t = tiny();
    t.methods = { "single:*", "mean", "max", "lr", "multistage" };
    const auto cfg = load_experiment_config(t.write(dir.path()));
    const auto a = run_experiment(cfg).report;
    const auto b = run_experiment(cfg, RunOptions{ 3 }).report;
    CHECK(a == b);
    for (const auto f : { ReportFormat::csv, ReportFormat::json, ReportFormat::markdown }) {
        CHECK(emit_report(a, f) == emit_report(b, f));
    }
    auto other = cfg;
    other.seed = 4;
    const auto c = run_experiment(other).report;
    CHECK(c.config_hash != a.config_hash);
}

TEST_CASE("report emission") {
    const auto one = small_report(1, { "mean" });
    const auto csv = emit_report(one, ReportFormat::csv);
    CHECK(csv.rfind("base_model,dataset,method,auroc,n_test,n_train,seed\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);

    const auto grid = small_report(3, { "s1", "s2", "s3", "s4", "s5" });
    CHECK(parse_report_json(emit_report(grid, ReportFormat::json)) == grid);
    const auto md = emit_report(grid, ReportFormat::markdown);
    CHECK(std::count(md.begin(), md.end(), '\n') == 2 + 3 + 1);
    CHECK(md.find("| base0 | news | 0.50 | 0.50 | 0.51 | 0.51 | 0.51 |") != std::string::npos);

    // Full precision survives in csv and json.
    CHECK(csv.find("0.5,") != std::string::npos);
    const auto j = nlohmann::json::parse(emit_report(grid, ReportFormat::json));
    for (const auto & m : grid.methods()) {
        double sum = 0.0;
        int n = 0;
        for (const auto & c : j["cells"]) {
            if (c["method"] == m) {
                sum += c["auroc"].get<double>();
                ++n;
            }
        }
        CHECK(std::abs(j["averages"][m].get<double>() - sum / n) <= 1e-12);
    }
    CHECK(parse_report_format("md") == ReportFormat::markdown);
    CHECK(parse_report_format("markdown-table") == ReportFormat::markdown);
    CHECK_THROWS_AS(parse_report_format("xml"), ConfigError);
    CHECK_THROWS_AS(parse_report_json("{\"format\":\"other\"}"), ConfigError);
}

TEST_CASE("average identity on random reports") {
    Rng rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        ExperimentReport r;
        const auto n = 1 + rng.below(12);
        std::vector<double> values;
        for (std::uint64_t i = 0; i < n; ++i) {
            values.push_back(rng.uniform());
            r.cells.push_back({ "b" + std::to_string(i), "d", "mean", values.back(), 10, 0, 0, {} });
        }
        long double s = 0.0L;
        for (double v : values) {
            s += v;
        }
        REQUIRE(std::abs(r.average("mean") - static_cast<double>(s / n)) <= 1e-12);
    }
}

TEST_CASE("failed cells render as NA and poison the average") {
    QuietWarnings quiet;
    test::TempDir dir;
    auto t = tiny();
    t.methods = { "mean" };
    t.write(dir.path());
    auto j = t.config();
    j["datasets"].push_back({ { "name", "gone" }, { "path", "nowhere.jsonl" } });
    const auto r = run_experiment(experiment_config_from_json(j, dir.path())).report;
    CHECK(r.has_failures());
    std::size_t failed = 0;
    for (const auto & c : r.cells) {
        if (c.dataset == "gone") {
            CHECK_FALSE(c.ok());
            CHECK(std::isnan(c.auroc));
            CHECK(c.error.find("nowhere.jsonl") != std::string::npos);
            ++failed;
        } else {
            CHECK(c.ok());
        }
    }
    CHECK(failed == 6);
    CHECK(std::isnan(r.average("mean")));
    CHECK(emit_report(r, ReportFormat::csv).find(",gone,mean,NA,") != std::string::npos);
    CHECK(emit_report(r, ReportFormat::markdown).find("| NA |") != std::string::npos);
    const auto back = parse_report_json(emit_report(r, ReportFormat::json));
    CHECK(back == r);
}

TEST_CASE("unreachable remote base fails only its own cells") {
    QuietWarnings quiet;
    test::TempDir dir;
    auto t = tiny();
    t.methods = { "mean" };
    t.write(dir.path());
    auto j = t.config();
    j["base_models"].push_back({ { "name", "remote-base" },
                                 { "kind", "remote" },
                                 { "params", { { "endpoint", "http://127.0.0.1:9" }, { "timeout", 2.0 } } } });
    const auto r = run_experiment(experiment_config_from_json(j, dir.path())).report;
    for (const auto & c : r.cells) {
        if (c.base_model == "remote-base") {
            CHECK_FALSE(c.ok());
            CHECK(c.error.find("transport error") != std::string::npos);
        } else {
            CHECK(c.ok());
        }
    }
}
