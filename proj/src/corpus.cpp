#include "curvens/corpus.hpp"

#include "curvens/error.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <unordered_set>

namespace curvens {

namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool blank(std::string_view s) {
    for (char c : s) {
        if (!is_space(c)) {
            return false;
        }
    }
    return true;
}

std::string read_file(const std::filesystem::path & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string_view to_string(Label label) {
    return label == Label::human ? "human" : "machine";
}

Label parse_label(std::string_view text) {
    if (text == "human") {
        return Label::human;
    }
    if (text == "machine") {
        return Label::machine;
    }
    throw Error("invalid label: " + std::string(text));
}

TokenizedText tokenize_words(std::string_view text) {
    TokenizedText out;
    out.separators.clear();
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (true) {
        std::size_t start = i;
        while (i < n && is_space(text[i])) {
            ++i;
        }
        out.separators.emplace_back(text.substr(start, i - start));
        if (i == n) {
            break;
        }
        start = i;
        while (i < n && !is_space(text[i])) {
            ++i;
        }
        out.words.emplace_back(text.substr(start, i - start));
    }
    return out;
}

std::string detokenize(const TokenizedText & tokens) {
    if (tokens.separators.size() != tokens.words.size() + 1) {
        throw Error("detokenize: expected " + std::to_string(tokens.words.size() + 1) + " separators, got " +
                    std::to_string(tokens.separators.size()));
    }
    std::string out = tokens.separators[0];
    for (std::size_t i = 0; i < tokens.words.size(); ++i) {
        out += tokens.words[i];
        out += tokens.separators[i + 1];
    }
    return out;
}

std::size_t count_words(std::string_view text) {
    std::size_t count = 0;
    bool in_word = false;
    for (char c : text) {
        const bool space = is_space(c);
        if (!space && !in_word) {
            ++count;
        }
        in_word = !space;
    }
    return count;
}

void Dataset::add(TextSample sample) {
    if (blank(sample.text)) {
        throw Error("empty text for sample: " + sample.id);
    }
    for (const auto & s : samples) {
        if (s.id == sample.id) {
            throw Error("duplicate id: " + sample.id);
        }
    }
    samples.push_back(std::move(sample));
}

Dataset parse_jsonl(std::string_view content, std::string name) {
    Dataset ds;
    ds.name = std::move(name);
    std::unordered_set<std::string> seen;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < content.size()) {
        std::size_t end = content.find('\n', pos);
        if (end == std::string_view::npos) {
            end = content.size();
        }
        const std::string_view line = content.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (blank(line)) {
            continue;
        }
        const std::string where = "line " + std::to_string(line_no);
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error & e) {
            throw ConfigError(where + ": malformed JSON: " + e.what());
        }
        if (!obj.is_object()) {
            throw ConfigError(where + ": expected a JSON object");
        }
        for (const char * key : { "id", "text", "label" }) {
            if (!obj.contains(key) || !obj[key].is_string()) {
                throw ConfigError(where + ": missing string field \"" + key + "\"");
            }
        }
        TextSample sample;
        sample.id = obj["id"].get<std::string>();
        sample.text = obj["text"].get<std::string>();
        try {
            sample.label = parse_label(obj["label"].get<std::string>());
        } catch (const Error & e) {
            throw ConfigError(where + ": " + e.what());
        }
        if (obj.contains("source_model") && obj["source_model"].is_string()) {
            sample.source_model = obj["source_model"].get<std::string>();
        }
        if (obj.contains("dataset") && obj["dataset"].is_string()) {
            sample.dataset = obj["dataset"].get<std::string>();
        }
        if (blank(sample.text)) {
            throw ConfigError(where + ": empty text for sample: " + sample.id);
        }
        if (!seen.insert(sample.id).second) {
            throw ConfigError("duplicate id: " + sample.id);
        }
        ds.samples.push_back(std::move(sample));
    }
    return ds;
}

Dataset load_jsonl(const std::filesystem::path & path) {
    return parse_jsonl(read_file(path), path.stem().string());
}

std::string to_jsonl(const Dataset & dataset) {
    std::string out;
    for (const auto & s : dataset.samples) {
        nlohmann::ordered_json obj;
        obj["id"] = s.id;
        obj["text"] = s.text;
        obj["label"] = to_string(s.label);
        if (s.source_model) {
            obj["source_model"] = *s.source_model;
        }
        if (s.dataset) {
            obj["dataset"] = *s.dataset;
        }
        out += obj.dump();
        out += '\n';
    }
    return out;
}

void save_jsonl(const Dataset & dataset, const std::filesystem::path & path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << to_jsonl(dataset);
}

}  // namespace curvens
