#include "curvens/lm.hpp"

#include "curvens/error.hpp"
#include "curvens/ngram.hpp"
#include "curvens/remote.hpp"

#include <cstdlib>

namespace curvens {

std::size_t MaskedText::filled_word_count() const {
    std::size_t n = text.words.size();
    for (const auto & slot : slots) {
        n += slot.span_length;
        n -= 1;
    }
    return n;
}

std::string mask_placeholder(std::size_t slot_index) {
    return "<extra_id_" + std::to_string(slot_index) + ">";
}

void validate_masked(const MaskedText & masked) {
    if (masked.slots.empty()) {
        throw Error("fill_masks: masked text contains no placeholders");
    }
    if (masked.text.separators.size() != masked.text.words.size() + 1) {
        throw Error("fill_masks: malformed tokenized text");
    }
    for (std::size_t i = 0; i < masked.slots.size(); ++i) {
        const auto & slot = masked.slots[i];
        if (slot.span_length == 0) {
            throw Error("fill_masks: zero-length span");
        }
        if (slot.word_index >= masked.text.words.size() ||
            masked.text.words[slot.word_index] != mask_placeholder(i)) {
            throw Error("fill_masks: slot " + std::to_string(i) + " does not point at its placeholder");
        }
        if (i > 0 && slot.word_index <= masked.slots[i - 1].word_index) {
            throw Error("fill_masks: slots must be ordered by position");
        }
    }
}

std::vector<LogProbResult> LanguageModel::log_prob_batch(std::span<const std::string> texts) const {
    std::vector<LogProbResult> out;
    out.reserve(texts.size());
    for (const auto & t : texts) {
        out.push_back(log_prob(t));
    }
    return out;
}

namespace {

std::string resolve(const std::filesystem::path & base_dir, const std::string & p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base_dir.empty()) {
        path = base_dir / path;
    }
    return path.string();
}

}  // namespace

ModelSpec model_spec_from_json(const nlohmann::json & j, const std::filesystem::path & base_dir) {
    if (!j.is_object()) {
        throw ConfigError("model spec must be an object");
    }
    ModelSpec spec;
    if (!j.contains("name") || !j["name"].is_string() || j["name"].get<std::string>().empty()) {
        throw ConfigError("model spec: missing \"name\"");
    }
    spec.name = j["name"].get<std::string>();
    const std::string kind = j.value("kind", std::string("ngram"));
    if (kind == "ngram") {
        spec.kind = ModelKind::ngram;
    } else if (kind == "remote") {
        spec.kind = ModelKind::remote;
    } else {
        throw ConfigError("model " + spec.name + ": unknown kind \"" + kind + "\"");
    }
    if (j.contains("params")) {
        if (!j["params"].is_object()) {
            throw ConfigError("model " + spec.name + ": params must be an object");
        }
        spec.params = j["params"];
    }
    for (const char * key : { "path", "train" }) {
        if (spec.params.contains(key) && spec.params[key].is_string()) {
            spec.params[key] = resolve(base_dir, spec.params[key].get<std::string>());
        }
    }
    if (j.contains("complexity")) {
        if (!j["complexity"].is_number_unsigned() && !j["complexity"].is_number_integer()) {
            throw ConfigError("model " + spec.name + ": complexity must be a non-negative integer");
        }
        const auto c = j["complexity"].get<std::int64_t>();
        if (c < 0) {
            throw ConfigError("model " + spec.name + ": complexity must be a non-negative integer");
        }
        spec.complexity = static_cast<std::uint64_t>(c);
    }
    return spec;
}

nlohmann::json to_json(const ModelSpec & spec) {
    nlohmann::json j;
    j["name"] = spec.name;
    j["kind"] = spec.kind == ModelKind::ngram ? "ngram" : "remote";
    j["params"] = spec.params;
    if (spec.complexity) {
        j["complexity"] = *spec.complexity;
    }
    return j;
}

ModelSpec parse_model_ref(std::string_view ref) {
    ModelSpec spec;
    constexpr std::string_view prefix = "remote:";
    if (ref.substr(0, prefix.size()) == prefix) {
        std::string rest(ref.substr(prefix.size()));
        std::string endpoint;
        const auto at = rest.find('@');
        if (at != std::string::npos) {
            endpoint = rest.substr(at + 1);
            rest = rest.substr(0, at);
        } else if (const char * env = std::getenv("CURVENS_MODEL_SERVER")) {
            endpoint = env;
        }
        if (rest.empty()) {
            throw ConfigError("remote model reference without a model id: " + std::string(ref));
        }
        if (endpoint.empty()) {
            throw ConfigError("no endpoint for " + std::string(ref) + " (use @<url> or set CURVENS_MODEL_SERVER)");
        }
        spec.kind = ModelKind::remote;
        spec.name = rest;
        spec.params = { { "endpoint", endpoint }, { "model", rest } };
        return spec;
    }
    spec.kind = ModelKind::ngram;
    spec.params = { { "path", std::string(ref) } };
    spec.name = std::filesystem::path(ref).stem().string();
    return spec;
}

ModelPtr make_model(const ModelSpec & spec) {
    const auto & p = spec.params;
    if (spec.kind == ModelKind::remote) {
        RemoteOptions opt;
        opt.endpoint = p.value("endpoint", std::string{});
        if (opt.endpoint.empty()) {
            if (const char * env = std::getenv("CURVENS_MODEL_SERVER")) {
                opt.endpoint = env;
            }
        }
        if (opt.endpoint.empty()) {
            throw ConfigError("model " + spec.name + ": no endpoint (params.endpoint or CURVENS_MODEL_SERVER)");
        }
        opt.model = p.value("model", spec.name);
        opt.name = spec.name;
        opt.timeout_seconds = p.value("timeout", 60.0);
        opt.complexity = spec.complexity.value_or(0);
        return std::make_shared<RemoteModel>(opt);
    }
    if (p.contains("path")) {
        auto model = NgramModel::load(p["path"].get<std::string>());
        if (!spec.name.empty() && spec.name != model.name()) {
            auto j = model.to_json();
            j["name"] = spec.name;
            return std::make_shared<NgramModel>(NgramModel::from_json(j));
        }
        return std::make_shared<NgramModel>(std::move(model));
    }
    if (!p.contains("train")) {
        throw ConfigError("model " + spec.name + ": ngram spec needs params.path or params.train");
    }
    NgramOptions opt;
    opt.name = spec.name;
    opt.order = p.value("order", 2);
    opt.k = p.value("k", 1.0);
    opt.min_count = p.value("min_count", std::size_t{ 1 });
    return std::make_shared<NgramModel>(train_ngram(load_jsonl(p["train"].get<std::string>()), opt));
}

std::uint64_t effective_complexity(const ModelSpec & spec, const LanguageModel & model) {
    return spec.complexity.value_or(model.complexity());
}

}  // namespace curvens
