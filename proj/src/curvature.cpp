#include "curvens/curvature.hpp"

#include "curvens/csv.hpp"
#include "curvens/error.hpp"
#include "curvens/parallel.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace curvens {

namespace {

void check_inputs(double original_lp, std::span<const double> perturbed_lps) {
    if (perturbed_lps.empty()) {
        throw Error("discrepancy: no perturbed log-probabilities");
    }
    if (!std::isfinite(original_lp)) {
        throw Error("discrepancy: non-finite original log-probability");
    }
    for (std::size_t i = 0; i < perturbed_lps.size(); ++i) {
        if (!std::isfinite(perturbed_lps[i])) {
            throw Error("discrepancy: non-finite perturbed log-probability at index " + std::to_string(i));
        }
    }
}

// Both statistics are computed from the gaps q_i = original - perturbed_i, so a
// shift applied to all N + 1 inputs only enters through those subtractions.
double gap_sum(double original_lp, std::span<const double> perturbed_lps) {
    double sum = 0.0;
    for (double p : perturbed_lps) {
        sum += original_lp - p;
    }
    return sum;
}

// sqrt(sum_i (N q_i - Q)^2 / (N - 1)), i.e. N times the sample std.
double scaled_spread(double original_lp, std::span<const double> perturbed_lps, double q_sum) {
    const double n = static_cast<double>(perturbed_lps.size());
    double ss = 0.0;
    for (double p : perturbed_lps) {
        const double dev = n * (original_lp - p) - q_sum;
        ss += dev * dev;
    }
    return std::sqrt(ss / (n - 1.0));
}

bool same(double a, double b) {
    return a == b || (std::isnan(a) && std::isnan(b));
}

std::string read_text(const std::filesystem::path & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

double discrepancy(double original_lp, std::span<const double> perturbed_lps) {
    check_inputs(original_lp, perturbed_lps);
    return gap_sum(original_lp, perturbed_lps) / static_cast<double>(perturbed_lps.size());
}

double sample_stddev(std::span<const double> values) {
    if (values.size() < 2) {
        throw Error("sample_stddev: need at least 2 values");
    }
    double mean = 0.0;
    for (double v : values) {
        mean += v;
    }
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double normalized_discrepancy(double original_lp, std::span<const double> perturbed_lps) {
    check_inputs(original_lp, perturbed_lps);
    if (perturbed_lps.size() < 2) {
        throw Error("normalized_discrepancy: need at least 2 perturbations");
    }
    const double q_sum = gap_sum(original_lp, perturbed_lps);
    const double spread = scaled_spread(original_lp, perturbed_lps, q_sum);
    if (spread == 0.0) {
        if (q_sum == 0.0) {
            return 0.0;
        }
        warn("zero variance across perturbed log-probabilities; z clamped to +/-" + format_double(z_cap));
        return q_sum > 0.0 ? z_cap : -z_cap;
    }
    // d / sigma with both numerator and denominator carrying the same factor N.
    return q_sum / spread;
}

std::string_view to_string(Feature f) {
    return f == Feature::d ? "d" : "z";
}

Feature parse_feature(std::string_view s) {
    if (s == "d") {
        return Feature::d;
    }
    if (s == "z") {
        return Feature::z;
    }
    throw ConfigError("unknown feature: " + std::string(s) + " (expected d or z)");
}

SubModelScore make_cell(std::string scorer_name, double original_lp, std::vector<double> perturbed_lps) {
    SubModelScore cell;
    cell.scorer_name = std::move(scorer_name);
    cell.original_logprob = original_lp;
    cell.d = discrepancy(original_lp, perturbed_lps);
    cell.z = perturbed_lps.size() >= 2 ? normalized_discrepancy(original_lp, perturbed_lps) : NAN;
    cell.perturbed_logprobs = std::move(perturbed_lps);
    return cell;
}

std::size_t ScoreMatrix::scorer_index(std::string_view name) const {
    for (std::size_t j = 0; j < scorer_names.size(); ++j) {
        if (scorer_names[j] == name) {
            return j;
        }
    }
    throw Error("unknown scorer: " + std::string(name));
}

void ScoreMatrix::validate() const {
    if (labels.size() != sample_ids.size() || cells.size() != sample_ids.size()) {
        throw Error("score matrix: row count mismatch");
    }
    std::set<std::string> names(scorer_names.begin(), scorer_names.end());
    if (names.size() != scorer_names.size()) {
        throw Error("score matrix: duplicate scorer names");
    }
    for (const auto & row : cells) {
        if (row.size() != scorer_names.size()) {
            throw Error("score matrix: column count mismatch");
        }
    }
}

std::vector<double> ScoreMatrix::column(std::size_t scorer, Feature f) const {
    std::vector<double> out(rows());
    for (std::size_t i = 0; i < rows(); ++i) {
        out[i] = cells[i][scorer].feature(f);
    }
    return out;
}

std::vector<double> ScoreMatrix::row(std::size_t sample, Feature f) const {
    std::vector<double> out(cols());
    for (std::size_t j = 0; j < cols(); ++j) {
        out[j] = cells[sample][j].feature(f);
    }
    return out;
}

ScoreMatrix ScoreMatrix::complete_rows() const {
    ScoreMatrix out;
    out.scorer_names = scorer_names;
    for (std::size_t i = 0; i < rows(); ++i) {
        bool ok = true;
        for (const auto & c : cells[i]) {
            ok = ok && c.ok();
        }
        if (ok) {
            out.sample_ids.push_back(sample_ids[i]);
            out.labels.push_back(labels[i]);
            out.cells.push_back(cells[i]);
        }
    }
    return out;
}

bool ScoreMatrix::operator==(const ScoreMatrix & other) const {
    if (sample_ids != other.sample_ids || labels != other.labels || scorer_names != other.scorer_names ||
        cells.size() != other.cells.size()) {
        return false;
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i].size() != other.cells[i].size()) {
            return false;
        }
        for (std::size_t j = 0; j < cells[i].size(); ++j) {
            const auto & a = cells[i][j];
            const auto & b = other.cells[i][j];
            if (a.scorer_name != b.scorer_name || a.error != b.error || !same(a.original_logprob, b.original_logprob) ||
                !same(a.d, b.d) || !same(a.z, b.z) || a.perturbed_logprobs.size() != b.perturbed_logprobs.size()) {
                return false;
            }
            for (std::size_t k = 0; k < a.perturbed_logprobs.size(); ++k) {
                if (!same(a.perturbed_logprobs[k], b.perturbed_logprobs[k])) {
                    return false;
                }
            }
        }
    }
    return true;
}

ScoreMatrix build_score_matrix(const std::vector<PerturbationSet> & sets, const std::vector<ModelPtr> & scorers,
                               const BuildOptions & options) {
    if (scorers.empty()) {
        throw Error("build_score_matrix: no scorers");
    }
    for (const auto & set : sets) {
        if (!(set.config == sets.front().config)) {
            throw Error("build_score_matrix: perturbation sets do not share one config");
        }
    }
    ScoreMatrix m;
    for (const auto & s : scorers) {
        m.scorer_names.push_back(s->name());
    }
    for (const auto & set : sets) {
        m.sample_ids.push_back(set.original.id);
        m.labels.push_back(set.original.label);
    }
    m.cells.assign(sets.size(), std::vector<SubModelScore>(scorers.size()));
    m.validate();

    const std::size_t cols = scorers.size();
    parallel_for(sets.size() * cols, options.jobs, [&](std::size_t flat) {
        const std::size_t i = flat / cols;
        const std::size_t j = flat % cols;
        const auto & set = sets[i];
        auto & cell = m.cells[i][j];
        try {
            std::vector<std::string> texts;
            texts.reserve(set.perturbed.size() + 1);
            texts.push_back(set.original.text);
            texts.insert(texts.end(), set.perturbed.begin(), set.perturbed.end());
            const auto lps = scorers[j]->log_prob_batch(texts);
            if (lps.size() != texts.size()) {
                throw ProtocolError("scorer returned " + std::to_string(lps.size()) + " results for " +
                                    std::to_string(texts.size()) + " texts");
            }
            std::vector<double> perturbed;
            perturbed.reserve(set.perturbed.size());
            for (std::size_t k = 1; k < lps.size(); ++k) {
                perturbed.push_back(lps[k].total_logprob);
            }
            cell = make_cell(m.scorer_names[j], lps[0].total_logprob, std::move(perturbed));
        } catch (const std::exception & e) {
            if (options.strict) {
                throw Error("sample " + set.original.id + ", scorer " + m.scorer_names[j] + ": " + e.what());
            }
            cell = SubModelScore{};
            cell.scorer_name = m.scorer_names[j];
            cell.original_logprob = NAN;
            cell.d = NAN;
            cell.z = NAN;
            cell.error = e.what();
        }
    });

    for (std::size_t j = 0; j < cols && !sets.empty(); ++j) {
        bool any_ok = false;
        for (std::size_t i = 0; i < sets.size(); ++i) {
            any_ok = any_ok || m.cells[i][j].ok();
        }
        if (!any_ok) {
            throw Error("scorer " + m.scorer_names[j] + " failed on every sample: " + m.cells[0][j].error);
        }
    }
    return m;
}

ScoreMatrix recompute_scores(const ScoreMatrix & matrix) {
    ScoreMatrix out = matrix;
    for (auto & row : out.cells) {
        for (auto & cell : row) {
            if (cell.ok()) {
                cell = make_cell(cell.scorer_name, cell.original_logprob, cell.perturbed_logprobs);
            }
        }
    }
    return out;
}

std::string to_csv(const ScoreMatrix & matrix) {
    matrix.validate();
    std::string out = "sample_id,label,scorer,original_logprob,d,z,n_perturbations\n";
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        for (std::size_t j = 0; j < matrix.cols(); ++j) {
            const auto & c = matrix.cells[i][j];
            out += csv_field(matrix.sample_ids[i]);
            out += ',';
            out += to_string(matrix.labels[i]);
            out += ',';
            out += csv_field(matrix.scorer_names[j]);
            out += ',';
            out += format_double(c.original_logprob);
            out += ',';
            out += format_double(c.ok() ? c.d : NAN);
            out += ',';
            out += format_double(c.ok() ? c.z : NAN);
            out += ',';
            out += std::to_string(c.perturbed_logprobs.size());
            out += '\n';
        }
    }
    return out;
}

std::string raw_scores_jsonl(const ScoreMatrix & matrix) {
    std::string out;
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        for (std::size_t j = 0; j < matrix.cols(); ++j) {
            const auto & c = matrix.cells[i][j];
            nlohmann::ordered_json line;
            line["sample_id"] = matrix.sample_ids[i];
            line["scorer"] = matrix.scorer_names[j];
            if (c.ok()) {
                line["original_logprob"] = c.original_logprob;
                line["perturbed_logprobs"] = c.perturbed_logprobs;
            } else {
                line["error"] = c.error;
            }
            out += line.dump();
            out += '\n';
        }
    }
    return out;
}

std::filesystem::path raw_scores_path(const std::filesystem::path & csv) {
    return std::filesystem::path(csv.string() + ".raw.jsonl");
}

void save_score_matrix(const ScoreMatrix & matrix, const std::filesystem::path & csv) {
    {
        std::ofstream out(csv, std::ios::binary);
        if (!out) {
            throw Error("cannot write " + csv.string());
        }
        out << to_csv(matrix);
    }
    std::ofstream raw(raw_scores_path(csv), std::ios::binary);
    if (!raw) {
        throw Error("cannot write " + raw_scores_path(csv).string());
    }
    raw << raw_scores_jsonl(matrix);
}

ScoreMatrix parse_score_matrix(std::string_view csv, std::string_view raw_jsonl) {
    const auto records = parse_csv(csv);
    const std::vector<std::string> header = { "sample_id", "label", "scorer", "original_logprob", "d", "z",
                                              "n_perturbations" };
    if (records.empty() || records[0] != header) {
        throw ConfigError("score csv: unexpected header");
    }
    ScoreMatrix m;
    std::map<std::string, std::size_t> sample_index;
    std::map<std::string, std::size_t> scorer_index;
    struct Entry {
        std::size_t i, j;
        SubModelScore cell;
    };
    std::vector<Entry> entries;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto & rec = records[r];
        const std::string where = "score csv line " + std::to_string(r + 1);
        if (rec.size() != header.size()) {
            throw ConfigError(where + ": expected " + std::to_string(header.size()) + " fields");
        }
        auto [sit, new_sample] = sample_index.emplace(rec[0], m.sample_ids.size());
        if (new_sample) {
            m.sample_ids.push_back(rec[0]);
            m.labels.push_back(parse_label(rec[1]));
        }
        auto [cit, new_scorer] = scorer_index.emplace(rec[2], m.scorer_names.size());
        if (new_scorer) {
            m.scorer_names.push_back(rec[2]);
        }
        SubModelScore cell;
        cell.scorer_name = rec[2];
        try {
            cell.original_logprob = parse_double(rec[3]);
            cell.d = parse_double(rec[4]);
            cell.z = parse_double(rec[5]);
        } catch (const Error & e) {
            throw ConfigError(where + ": " + e.what());
        }
        if (std::isnan(cell.d)) {
            cell.error = "failed";
        }
        entries.push_back({ sit->second, cit->second, std::move(cell) });
    }
    m.cells.assign(m.sample_ids.size(), std::vector<SubModelScore>(m.scorer_names.size()));
    std::vector<std::vector<bool>> seen(m.sample_ids.size(), std::vector<bool>(m.scorer_names.size(), false));
    for (auto & e : entries) {
        if (seen[e.i][e.j]) {
            throw ConfigError("score csv: duplicate cell (" + m.sample_ids[e.i] + ", " + m.scorer_names[e.j] + ")");
        }
        seen[e.i][e.j] = true;
        m.cells[e.i][e.j] = std::move(e.cell);
    }
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (!seen[i][j]) {
                throw ConfigError("score csv: missing cell (" + m.sample_ids[i] + ", " + m.scorer_names[j] + ")");
            }
        }
    }

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < raw_jsonl.size()) {
        std::size_t end = raw_jsonl.find('\n', pos);
        if (end == std::string_view::npos) {
            end = raw_jsonl.size();
        }
        const auto line = raw_jsonl.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(line);
            const auto si = sample_index.at(j.at("sample_id").get<std::string>());
            const auto ci = scorer_index.at(j.at("scorer").get<std::string>());
            auto & cell = m.cells[si][ci];
            if (j.contains("error")) {
                cell.error = j["error"].get<std::string>();
            } else {
                cell.perturbed_logprobs = j.at("perturbed_logprobs").get<std::vector<double>>();
            }
        } catch (const std::exception & e) {
            throw ConfigError("raw scores line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return m;
}

ScoreMatrix load_score_matrix(const std::filesystem::path & csv) {
    const auto raw_path = raw_scores_path(csv);
    const std::string raw = std::filesystem::exists(raw_path) ? read_text(raw_path) : std::string{};
    return parse_score_matrix(read_text(csv), raw);
}

}  // namespace curvens
