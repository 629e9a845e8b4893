#pragma once

#include "curvens/corpus.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace curvens {

struct LogProbResult {
    double total_logprob = 0.0;  // natural log
    std::size_t token_count = 0;
};

// A masked span collapsed into a single placeholder word. The placeholder for
// slot i is mask_placeholder(i) and sits at text.words[word_index].
struct MaskSlot {
    std::size_t word_index = 0;
    std::size_t span_length = 0;
};

struct MaskedText {
    TokenizedText text;
    std::vector<MaskSlot> slots;

    /// Word count once every placeholder is expanded to its span length.
    std::size_t filled_word_count() const;
};

/// T5-style sentinel: "<extra_id_0>", "<extra_id_1>", ...
std::string mask_placeholder(std::size_t slot_index);

/// Throws if the masked text has no slots or a slot does not point at its placeholder.
void validate_masked(const MaskedText & masked);

/// Scoring, mask filling and generation backend. Implementations are immutable
/// after construction and safe to call concurrently.
class LanguageModel {
public:
    virtual ~LanguageModel() = default;

    virtual const std::string & name() const = 0;

    /// Parameter-count proxy used to order multi-stage ensembles.
    virtual std::uint64_t complexity() const = 0;

    virtual LogProbResult log_prob(std::string_view text) const = 0;

    virtual std::vector<LogProbResult> log_prob_batch(std::span<const std::string> texts) const;

    /// Replaces every placeholder with exactly span_length words; all other
    /// words are returned unchanged. Deterministic in (masked, seed).
    virtual TokenizedText fill_masks(const MaskedText & masked, std::uint64_t seed) const = 0;

    /// prompt followed by up to max_tokens sampled tokens.
    virtual std::string generate(std::string_view prompt, std::size_t max_tokens, double temperature,
                                 std::uint64_t seed) const = 0;
};

using ModelPtr = std::shared_ptr<const LanguageModel>;

enum class ModelKind { ngram, remote };

struct ModelSpec {
    std::string name;
    ModelKind kind = ModelKind::ngram;
    // ngram: {"path"} for a saved model, or {"train","order","k","min_count"}.
    // remote: {"endpoint","model","timeout"}.
    nlohmann::json params = nlohmann::json::object();
    std::optional<std::uint64_t> complexity;
};

/// Parses a config entry; relative paths are resolved against base_dir.
ModelSpec model_spec_from_json(const nlohmann::json & j, const std::filesystem::path & base_dir = {});
nlohmann::json to_json(const ModelSpec & spec);

/// CLI shorthand: "remote:<model>[@<endpoint>]" or a path to a saved n-gram
/// model. Remote refs without an endpoint use $CURVENS_MODEL_SERVER.
ModelSpec parse_model_ref(std::string_view ref);

ModelPtr make_model(const ModelSpec & spec);

/// spec.complexity when declared, otherwise the backend's own proxy.
std::uint64_t effective_complexity(const ModelSpec & spec, const LanguageModel & model);

}  // namespace curvens
