#pragma once

#include "curvens/lm.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace curvens {

class Rng;

struct NgramOptions {
    int order = 2;
    double k = 1.0;            // add-k smoothing constant
    std::size_t min_count = 1;  // words seen fewer times map to <unk>
    std::string name = "ngram";
};

/// Word-level n-gram model with add-k smoothing over V = seen words + <unk> + </s>.
/// Contexts are left-padded with <s>; every text ends with </s>.
class NgramModel final : public LanguageModel {
public:
    static constexpr std::string_view unk_token = "<unk>";
    static constexpr std::string_view eot_token = "</s>";
    static constexpr std::string_view bos_token = "<s>";
    static constexpr std::int32_t unk_id = 0;
    static constexpr std::int32_t eot_id = 1;
    static constexpr std::int32_t bos_id = -1;

    const std::string & name() const override { return name_; }
    std::uint64_t complexity() const override;
    LogProbResult log_prob(std::string_view text) const override;
    TokenizedText fill_masks(const MaskedText & masked, std::uint64_t seed) const override;
    std::string generate(std::string_view prompt, std::size_t max_tokens, double temperature,
                         std::uint64_t seed) const override;

    int order() const { return order_; }
    double k() const { return k_; }
    std::size_t min_count() const { return min_count_; }
    const std::vector<std::string> & vocab() const { return vocab_; }

    std::int32_t token_id(std::string_view word) const;

    /// P(token | context); only the last order-1 context ids are used, shorter
    /// contexts are left-padded with bos_id.
    double prob(std::span<const std::int32_t> context, std::int32_t token) const;

    nlohmann::json to_json() const;
    static NgramModel from_json(const nlohmann::json & j);
    void save(const std::filesystem::path & path) const;
    static NgramModel load(const std::filesystem::path & path);

private:
    friend NgramModel train_ngram(const Dataset & corpus, const NgramOptions & options);

    struct ContextCounts {
        std::uint64_t total = 0;
        std::vector<std::pair<std::int32_t, std::uint64_t>> next;  // sorted by id
    };

    NgramModel() = default;

    std::string context_key(std::span<const std::int32_t> context) const;
    const ContextCounts * find_context(const std::string & key) const;
    std::int32_t sample_next(const std::string & key, Rng & rng, double temperature, bool allow_eot) const;
    void rebuild_index();

    std::string name_;
    int order_ = 1;
    double k_ = 1.0;
    std::size_t min_count_ = 1;
    std::vector<std::string> vocab_;
    std::unordered_map<std::string, std::int32_t> index_;
    std::unordered_map<std::string, ContextCounts> counts_;
};

NgramModel train_ngram(const Dataset & corpus, const NgramOptions & options);

}  // namespace curvens
