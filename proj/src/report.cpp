#include "curvens/csv.hpp"
#include "curvens/error.hpp"
#include "curvens/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <set>

namespace curvens {

bool ReportCell::operator==(const ReportCell & o) const {
    const bool same_auroc = (std::isnan(auroc) && std::isnan(o.auroc)) || auroc == o.auroc;
    return same_auroc && base_model == o.base_model && dataset == o.dataset && method == o.method &&
           n_test == o.n_test && n_train == o.n_train && seed == o.seed && error == o.error;
}

std::vector<std::string> ExperimentReport::methods() const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto & c : cells) {
        if (seen.insert(c.method).second) {
            out.push_back(c.method);
        }
    }
    return out;
}

double ExperimentReport::average(const std::string & method) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto & c : cells) {
        if (c.method != method) {
            continue;
        }
        if (!c.ok() || !std::isfinite(c.auroc)) {
            return std::nan("");
        }
        sum += c.auroc;
        ++n;
    }
    return n == 0 ? std::nan("") : sum / static_cast<double>(n);
}

bool ExperimentReport::has_failures() const {
    for (const auto & c : cells) {
        if (!c.ok()) {
            return true;
        }
    }
    return false;
}

ReportFormat parse_report_format(std::string_view s) {
    if (s == "csv") {
        return ReportFormat::csv;
    }
    if (s == "json") {
        return ReportFormat::json;
    }
    if (s == "markdown" || s == "md" || s == "markdown-table") {
        return ReportFormat::markdown;
    }
    throw ConfigError("unknown report format: " + std::string(s));
}

namespace {

std::string emit_csv(const ExperimentReport & r) {
    std::string out = "base_model,dataset,method,auroc,n_test,n_train,seed\n";
    for (const auto & c : r.cells) {
        out += csv_field(c.base_model) + "," + csv_field(c.dataset) + "," + csv_field(c.method) + "," +
               format_double(c.ok() ? c.auroc : std::nan("")) + "," + std::to_string(c.n_test) + "," +
               std::to_string(c.n_train) + "," + std::to_string(c.seed) + "\n";
    }
    return out;
}

nlohmann::ordered_json number_or_null(double x) {
    return std::isfinite(x) ? nlohmann::ordered_json(x) : nlohmann::ordered_json(nullptr);
}

std::string emit_json(const ExperimentReport & r) {
    nlohmann::ordered_json j;
    j["format"] = "curvens-report-v1";
    j["config_hash"] = r.config_hash;
    j["seed"] = r.seed;
    j["cells"] = nlohmann::ordered_json::array();
    for (const auto & c : r.cells) {
        nlohmann::ordered_json cell;
        cell["base_model"] = c.base_model;
        cell["dataset"] = c.dataset;
        cell["method"] = c.method;
        cell["auroc"] = number_or_null(c.auroc);
        cell["n_test"] = c.n_test;
        cell["n_train"] = c.n_train;
        cell["seed"] = c.seed;
        if (!c.ok()) {
            cell["error"] = c.error;
        }
        j["cells"].push_back(std::move(cell));
    }
    j["averages"] = nlohmann::ordered_json::object();
    for (const auto & m : r.methods()) {
        j["averages"][m] = number_or_null(r.average(m));
    }
    return j.dump(2) + "\n";
}

std::string display(double x) {
    if (!std::isfinite(x)) {
        return "NA";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", x);
    return buf;
}

std::string emit_markdown(const ExperimentReport & r) {
    const auto methods = r.methods();
    std::vector<std::pair<std::string, std::string>> rows;
    std::map<std::pair<std::string, std::string>, std::map<std::string, const ReportCell *>> grid;
    for (const auto & c : r.cells) {
        const auto key = std::make_pair(c.base_model, c.dataset);
        if (!grid.contains(key)) {
            rows.push_back(key);
        }
        grid[key][c.method] = &c;
    }
    std::string out = "| Base model | Dataset |";
    std::string rule = "|---|---|";
    for (const auto & m : methods) {
        out += " " + m + " |";
        rule += "---|";
    }
    out += "\n" + rule + "\n";
    for (const auto & key : rows) {
        out += "| " + key.first + " | " + key.second + " |";
        const auto & cells = grid[key];
        for (const auto & m : methods) {
            const auto it = cells.find(m);
            out += " ";
            if (it != cells.end()) {
                out += it->second->ok() ? display(it->second->auroc) : "NA";
            }
            out += " |";
        }
        out += "\n";
    }
    out += "| Average | |";
    for (const auto & m : methods) {
        out += " " + display(r.average(m)) + " |";
    }
    out += "\n";
    return out;
}

}  // namespace

std::string emit_report(const ExperimentReport & report, ReportFormat format) {
    switch (format) {
    case ReportFormat::csv: return emit_csv(report);
    case ReportFormat::json: return emit_json(report);
    case ReportFormat::markdown: return emit_markdown(report);
    }
    return {};
}

ExperimentReport parse_report_json(std::string_view text) {
    ExperimentReport r;
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.value("format", std::string{}) != "curvens-report-v1") {
            throw ConfigError("not a curvens-report-v1 document");
        }
        r.config_hash = j.at("config_hash").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        for (const auto & c : j.at("cells")) {
            ReportCell cell;
            cell.base_model = c.at("base_model").get<std::string>();
            cell.dataset = c.at("dataset").get<std::string>();
            cell.method = c.at("method").get<std::string>();
            cell.auroc = c.at("auroc").is_null() ? std::nan("") : c.at("auroc").get<double>();
            cell.n_test = c.at("n_test").get<std::size_t>();
            cell.n_train = c.at("n_train").get<std::size_t>();
            cell.seed = c.at("seed").get<std::uint64_t>();
            cell.error = c.value("error", std::string{});
            r.cells.push_back(std::move(cell));
        }
    } catch (const nlohmann::json::exception & e) {
        throw ConfigError(std::string("report: ") + e.what());
    }
    return r;
}

std::string scores_csv(const std::vector<MethodScores> & scores) {
    std::string out = "sample_id,label,method,score\n";
    for (const auto & ms : scores) {
        for (std::size_t i = 0; i < ms.scores.size(); ++i) {
            out += csv_field(ms.sample_ids[i]) + "," + std::string(to_string(ms.labels[i])) + "," +
                   csv_field(ms.method) + "," + format_double(ms.scores[i]) + "\n";
        }
    }
    return out;
}

}  // namespace curvens
