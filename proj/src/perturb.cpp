#include "curvens/perturb.hpp"

#include "curvens/error.hpp"
#include "curvens/parallel.hpp"
#include "curvens/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace curvens {

void PerturbationConfig::validate() const {
    if (span_length < 1) {
        throw ConfigError("span_length must be >= 1");
    }
    if (!(mask_fraction > 0.0 && mask_fraction < 1.0)) {
        throw ConfigError("mask_fraction must be in (0, 1)");
    }
    if (num_perturbations < 1) {
        throw ConfigError("num_perturbations must be >= 1");
    }
}

nlohmann::json to_json(const PerturbationConfig & cfg) {
    nlohmann::json j;
    j["span_length"] = cfg.span_length;
    j["mask_fraction"] = cfg.mask_fraction;
    j["num_perturbations"] = cfg.num_perturbations;
    j["buffer"] = cfg.buffer;
    j["seed"] = cfg.seed;
    return j;
}

PerturbationConfig perturbation_config_from_json(const nlohmann::json & j) {
    PerturbationConfig cfg;
    if (!j.is_object()) {
        throw ConfigError("perturbation config must be an object");
    }
    try {
        cfg.span_length = j.value("span_length", cfg.span_length);
        cfg.mask_fraction = j.value("mask_fraction", cfg.mask_fraction);
        cfg.num_perturbations = j.value("num_perturbations", cfg.num_perturbations);
        cfg.buffer = j.value("buffer", cfg.buffer);
        cfg.seed = j.value("seed", cfg.seed);
    } catch (const nlohmann::json::exception & e) {
        throw ConfigError(std::string("perturbation config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

std::vector<Span> select_mask_spans(std::size_t words, const PerturbationConfig & cfg, Rng & rng) {
    cfg.validate();
    const std::size_t len = cfg.span_length;
    if (words < len) {
        throw Error("text too short to perturb: " + std::to_string(words) + " words, span length " +
                    std::to_string(len));
    }
    const auto target = static_cast<std::size_t>(std::ceil(cfg.mask_fraction * static_cast<double>(words)));
    const std::size_t starts = words - len + 1;

    // blocked[s]: a span starting at s would overlap or sit within `buffer` of an existing span.
    std::vector<bool> blocked(starts, false);
    std::vector<Span> spans;
    std::size_t masked = 0;
    std::vector<std::size_t> valid;
    while (masked < target) {
        valid.clear();
        for (std::size_t s = 0; s < starts; ++s) {
            if (!blocked[s]) {
                valid.push_back(s);
            }
        }
        if (valid.empty()) {
            break;
        }
        const std::size_t start = valid[rng.below(valid.size())];
        spans.push_back({ start, len });
        masked += len;
        // Starts in (start - len - buffer, start + len + buffer) are now invalid.
        const std::size_t reach = len + cfg.buffer;
        const std::size_t lo = start >= reach ? start - reach + 1 : 0;
        const std::size_t hi = std::min(starts, start + reach);
        for (std::size_t s = lo; s < hi; ++s) {
            blocked[s] = true;
        }
    }
    std::sort(spans.begin(), spans.end(), [](const Span & a, const Span & b) { return a.start < b.start; });
    return spans;
}

MaskedText apply_mask(const TokenizedText & text, const std::vector<Span> & spans) {
    MaskedText out;
    out.text.separators = { text.separators[0] };
    std::size_t span = 0;
    for (std::size_t i = 0; i < text.words.size();) {
        if (span < spans.size() && spans[span].start == i) {
            const auto & sp = spans[span];
            if (sp.start + sp.length > text.words.size()) {
                throw Error("apply_mask: span exceeds text");
            }
            out.slots.push_back({ out.text.words.size(), sp.length });
            out.text.words.push_back(mask_placeholder(span));
            out.text.separators.push_back(text.separators[sp.start + sp.length]);
            i += sp.length;
            ++span;
        } else {
            out.text.words.push_back(text.words[i]);
            out.text.separators.push_back(text.separators[i + 1]);
            ++i;
        }
    }
    if (span != spans.size()) {
        throw Error("apply_mask: spans must be sorted and non-overlapping");
    }
    return out;
}

std::string perturb_once(const TextSample & sample, const LanguageModel & filler, const PerturbationConfig & cfg,
                         std::size_t index) {
    const auto tokens = tokenize_words(sample.text);
    Rng rng(derive_seed(cfg.seed, sample.id, index));
    try {
        const auto spans = select_mask_spans(tokens.words.size(), cfg, rng);
        const auto masked = apply_mask(tokens, spans);
        return detokenize(filler.fill_masks(masked, rng.next()));
    } catch (const TransportError &) {
        throw;
    } catch (const std::exception & e) {
        throw Error("sample " + sample.id + ", perturbation " + std::to_string(index) + ": " + e.what());
    }
}

PerturbationSet perturb_sample(const TextSample & sample, const LanguageModel & filler,
                               const PerturbationConfig & cfg) {
    PerturbationSet set;
    set.original = sample;
    set.config = cfg;
    set.filler_name = filler.name();
    set.perturbed.reserve(cfg.num_perturbations);
    for (std::size_t i = 0; i < cfg.num_perturbations; ++i) {
        set.perturbed.push_back(perturb_once(sample, filler, cfg, i));
    }
    return set;
}

std::vector<PerturbationSet> perturb_dataset(const Dataset & dataset, const LanguageModel & filler,
                                             const PerturbationConfig & cfg, unsigned jobs) {
    cfg.validate();
    std::vector<PerturbationSet> out(dataset.samples.size());
    parallel_for(out.size(), jobs, [&](std::size_t i) { out[i] = perturb_sample(dataset.samples[i], filler, cfg); });
    return out;
}

std::string to_jsonl(const std::vector<PerturbationSet> & sets) {
    std::string out;
    for (const auto & set : sets) {
        nlohmann::ordered_json j;
        j["id"] = set.original.id;
        j["original"] = set.original.text;
        j["label"] = to_string(set.original.label);
        if (set.original.source_model) {
            j["source_model"] = *set.original.source_model;
        }
        if (set.original.dataset) {
            j["dataset"] = *set.original.dataset;
        }
        j["perturbed"] = set.perturbed;
        j["config"] = to_json(set.config);
        j["filler"] = set.filler_name;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<PerturbationSet> parse_perturbations_jsonl(std::string_view content) {
    std::vector<PerturbationSet> sets;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < content.size()) {
        std::size_t end = content.find('\n', pos);
        if (end == std::string_view::npos) {
            end = content.size();
        }
        const auto line = content.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(line);
            PerturbationSet set;
            set.original.id = j.at("id").get<std::string>();
            set.original.text = j.at("original").get<std::string>();
            set.original.label = parse_label(j.value("label", std::string("human")));
            if (j.contains("source_model")) {
                set.original.source_model = j["source_model"].get<std::string>();
            }
            if (j.contains("dataset")) {
                set.original.dataset = j["dataset"].get<std::string>();
            }
            set.perturbed = j.at("perturbed").get<std::vector<std::string>>();
            set.config = perturbation_config_from_json(j.at("config"));
            set.filler_name = j.value("filler", std::string{});
            if (set.perturbed.size() != set.config.num_perturbations) {
                throw ConfigError("expected " + std::to_string(set.config.num_perturbations) + " perturbations");
            }
            sets.push_back(std::move(set));
        } catch (const std::exception & e) {
            throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return sets;
}

void save_perturbations(const std::vector<PerturbationSet> & sets, const std::filesystem::path & path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << to_jsonl(sets);
}

std::vector<PerturbationSet> load_perturbations(const std::filesystem::path & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_perturbations_jsonl(ss.str());
}

}  // namespace curvens
