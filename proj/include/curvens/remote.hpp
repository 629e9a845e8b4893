#pragma once

#include "curvens/lm.hpp"

#include <string>

namespace curvens {

struct RemoteOptions {
    std::string endpoint;  // e.g. "http://127.0.0.1:8080"
    std::string model;     // served model id
    std::string name;      // scorer name; defaults to model
    double timeout_seconds = 60.0;
    std::uint64_t complexity = 0;  // declared parameter count
};

/// Client for the model-server JSON protocol:
///   POST /v1/logprob  {model, texts}                               -> {logprobs, token_counts}
///   POST /v1/fill     {model, masked_text, span_lengths, seed}      -> {filled_text}
///   POST /v1/generate {model, prompt, max_tokens, temperature, seed} -> {text}
/// Each call opens its own connection.
class RemoteModel final : public LanguageModel {
public:
    explicit RemoteModel(RemoteOptions options);

    const std::string & name() const override { return options_.name; }
    std::uint64_t complexity() const override { return options_.complexity; }
    LogProbResult log_prob(std::string_view text) const override;
    std::vector<LogProbResult> log_prob_batch(std::span<const std::string> texts) const override;
    TokenizedText fill_masks(const MaskedText & masked, std::uint64_t seed) const override;
    std::string generate(std::string_view prompt, std::size_t max_tokens, double temperature,
                         std::uint64_t seed) const override;

    const RemoteOptions & options() const { return options_; }

private:
    nlohmann::json post(const std::string & path, const nlohmann::json & body) const;

    RemoteOptions options_;
};

}  // namespace curvens
