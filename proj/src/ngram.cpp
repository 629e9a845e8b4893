#include "curvens/ngram.hpp"

#include "curvens/error.hpp"
#include "curvens/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace curvens {

namespace {

bool is_reserved(std::string_view w) {
    return w == NgramModel::unk_token || w == NgramModel::eot_token || w == NgramModel::bos_token;
}

std::string pack(std::span<const std::int32_t> ids) {
    std::string key(ids.size() * sizeof(std::int32_t), '\0');
    if (!ids.empty()) {
        std::memcpy(key.data(), ids.data(), key.size());
    }
    return key;
}

std::vector<std::int32_t> unpack(const std::string & key) {
    std::vector<std::int32_t> ids(key.size() / sizeof(std::int32_t));
    if (!ids.empty()) {
        std::memcpy(ids.data(), key.data(), key.size());
    }
    return ids;
}

}  // namespace

NgramModel train_ngram(const Dataset & corpus, const NgramOptions & options) {
    if (options.order < 1) {
        throw ConfigError("train_ngram: order must be >= 1");
    }
    if (!(options.k > 0.0) || !std::isfinite(options.k)) {
        throw ConfigError("train_ngram: k must be > 0");
    }
    if (corpus.samples.empty()) {
        throw ConfigError("train_ngram: empty corpus");
    }

    std::vector<std::vector<std::string>> docs;
    docs.reserve(corpus.samples.size());
    std::map<std::string, std::size_t> freq;
    for (const auto & s : corpus.samples) {
        docs.push_back(tokenize_words(s.text).words);
        for (const auto & w : docs.back()) {
            if (!is_reserved(w)) {
                ++freq[w];
            }
        }
    }

    NgramModel m;
    m.name_ = options.name;
    m.order_ = options.order;
    m.k_ = options.k;
    m.min_count_ = std::max<std::size_t>(options.min_count, 1);
    m.vocab_ = { std::string(NgramModel::unk_token), std::string(NgramModel::eot_token) };
    for (const auto & [w, c] : freq) {
        if (c >= m.min_count_) {
            m.vocab_.push_back(w);
        }
    }
    m.rebuild_index();

    std::unordered_map<std::string, std::map<std::int32_t, std::uint64_t>> raw;
    const std::size_t ctx_len = static_cast<std::size_t>(m.order_ - 1);
    for (const auto & words : docs) {
        std::vector<std::int32_t> seq(ctx_len, NgramModel::bos_id);
        for (const auto & w : words) {
            seq.push_back(m.token_id(w));
        }
        seq.push_back(NgramModel::eot_id);
        for (std::size_t i = ctx_len; i < seq.size(); ++i) {
            const std::span<const std::int32_t> ctx(seq.data() + i - ctx_len, ctx_len);
            ++raw[pack(ctx)][seq[i]];
        }
    }
    for (auto & [key, next] : raw) {
        NgramModel::ContextCounts cc;
        cc.next.assign(next.begin(), next.end());
        for (const auto & [id, c] : cc.next) {
            cc.total += c;
        }
        m.counts_.emplace(key, std::move(cc));
    }
    return m;
}

void NgramModel::rebuild_index() {
    index_.clear();
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
        index_.emplace(vocab_[i], static_cast<std::int32_t>(i));
    }
}

std::uint64_t NgramModel::complexity() const {
    return static_cast<std::uint64_t>(vocab_.size()) * static_cast<std::uint64_t>(order_);
}

std::int32_t NgramModel::token_id(std::string_view word) const {
    if (is_reserved(word)) {
        return unk_id;
    }
    const auto it = index_.find(std::string(word));
    return it == index_.end() ? unk_id : it->second;
}

std::string NgramModel::context_key(std::span<const std::int32_t> context) const {
    const std::size_t ctx_len = static_cast<std::size_t>(order_ - 1);
    std::vector<std::int32_t> ctx(ctx_len, bos_id);
    const std::size_t take = std::min(ctx_len, context.size());
    std::copy(context.end() - static_cast<std::ptrdiff_t>(take), context.end(),
              ctx.end() - static_cast<std::ptrdiff_t>(take));
    return pack(ctx);
}

const NgramModel::ContextCounts * NgramModel::find_context(const std::string & key) const {
    const auto it = counts_.find(key);
    return it == counts_.end() ? nullptr : &it->second;
}

double NgramModel::prob(std::span<const std::int32_t> context, std::int32_t token) const {
    const double v = static_cast<double>(vocab_.size());
    const auto * cc = find_context(context_key(context));
    if (cc == nullptr) {
        return 1.0 / v;
    }
    std::uint64_t c = 0;
    const auto it = std::lower_bound(cc->next.begin(), cc->next.end(), token,
                                     [](const auto & e, std::int32_t id) { return e.first < id; });
    if (it != cc->next.end() && it->first == token) {
        c = it->second;
    }
    return (static_cast<double>(c) + k_) / (static_cast<double>(cc->total) + k_ * v);
}

LogProbResult NgramModel::log_prob(std::string_view text) const {
    const auto words = tokenize_words(text).words;
    if (words.empty()) {
        throw Error("log_prob: empty text");
    }
    std::vector<std::int32_t> seq;
    seq.reserve(words.size() + 1);
    for (const auto & w : words) {
        seq.push_back(token_id(w));
    }
    seq.push_back(eot_id);
    LogProbResult r;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        r.total_logprob += std::log(prob(std::span<const std::int32_t>(seq.data(), i), seq[i]));
    }
    r.token_count = seq.size();
    return r;
}

std::int32_t NgramModel::sample_next(const std::string & key, Rng & rng, double temperature, bool allow_eot) const {
    const auto allowed = [&](std::int32_t id) { return id != unk_id && (allow_eot || id != eot_id); };
    const std::size_t v = vocab_.size();
    const auto * cc = find_context(key);
    const double total = cc ? static_cast<double>(cc->total) : 0.0;

    if (temperature == 1.0) {
        // (c + k) / (total + kV) is a mixture of the empirical distribution and a
        // uniform one; rejection restricts it to the allowed tokens.
        const double kv = k_ * static_cast<double>(v);
        for (int attempt = 0; attempt < 64; ++attempt) {
            std::int32_t id;
            const double u = rng.uniform() * (total + kv);
            if (u < total) {
                double acc = 0.0;
                id = cc->next.back().first;
                for (const auto & [t, c] : cc->next) {
                    acc += static_cast<double>(c);
                    if (u < acc) {
                        id = t;
                        break;
                    }
                }
            } else {
                id = static_cast<std::int32_t>(rng.below(v));
            }
            if (allowed(id)) {
                return id;
            }
        }
    }

    std::vector<double> logp(v);
    std::size_t j = 0;
    double best = -INFINITY;
    for (std::size_t t = 0; t < v; ++t) {
        double c = 0.0;
        if (cc != nullptr) {
            while (j < cc->next.size() && cc->next[j].first < static_cast<std::int32_t>(t)) {
                ++j;
            }
            if (j < cc->next.size() && cc->next[j].first == static_cast<std::int32_t>(t)) {
                c = static_cast<double>(cc->next[j].second);
            }
        }
        if (allowed(static_cast<std::int32_t>(t))) {
            logp[t] = std::log(c + k_) / temperature;
            best = std::max(best, logp[t]);
        } else {
            logp[t] = -INFINITY;
        }
    }
    if (!std::isfinite(best)) {
        throw Error("sample_next: no token can be sampled");
    }
    double sum = 0.0;
    for (auto & x : logp) {
        x = std::exp(x - best);
        sum += x;
    }
    const double u = rng.uniform() * sum;
    double acc = 0.0;
    std::int32_t last = 0;
    for (std::size_t t = 0; t < v; ++t) {
        if (logp[t] <= 0.0) {
            continue;
        }
        last = static_cast<std::int32_t>(t);
        acc += logp[t];
        if (u < acc) {
            return last;
        }
    }
    return last;
}

TokenizedText NgramModel::fill_masks(const MaskedText & masked, std::uint64_t seed) const {
    validate_masked(masked);
    Rng rng(seed);
    const auto & in = masked.text;
    TokenizedText out;
    out.separators = { in.separators[0] };
    std::vector<std::int32_t> history;
    std::size_t slot = 0;
    for (std::size_t i = 0; i < in.words.size(); ++i) {
        if (slot < masked.slots.size() && masked.slots[slot].word_index == i) {
            const std::size_t span = masked.slots[slot].span_length;
            for (std::size_t s = 0; s < span; ++s) {
                const std::int32_t id = sample_next(context_key(history), rng, 1.0, false);
                history.push_back(id);
                out.words.push_back(vocab_[static_cast<std::size_t>(id)]);
                if (s + 1 < span) {
                    out.separators.emplace_back(" ");
                }
            }
            ++slot;
        } else {
            history.push_back(token_id(in.words[i]));
            out.words.push_back(in.words[i]);
        }
        out.separators.push_back(in.separators[i + 1]);
    }
    return out;
}

std::string NgramModel::generate(std::string_view prompt, std::size_t max_tokens, double temperature,
                                 std::uint64_t seed) const {
    if (max_tokens < 1) {
        throw Error("generate: max_tokens must be >= 1");
    }
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw Error("generate: temperature must be > 0");
    }
    Rng rng(seed);
    std::vector<std::int32_t> history;
    for (const auto & w : tokenize_words(prompt).words) {
        history.push_back(token_id(w));
    }
    std::string out(prompt);
    for (std::size_t n = 0; n < max_tokens; ++n) {
        const std::int32_t id = sample_next(context_key(history), rng, temperature, true);
        if (id == eot_id) {
            break;
        }
        history.push_back(id);
        if (!out.empty()) {
            out += ' ';
        }
        out += vocab_[static_cast<std::size_t>(id)];
    }
    return out;
}

nlohmann::json NgramModel::to_json() const {
    nlohmann::json j;
    j["format"] = "curvens-ngram-v1";
    j["name"] = name_;
    j["order"] = order_;
    j["k"] = k_;
    j["min_count"] = min_count_;
    j["vocab"] = vocab_;
    nlohmann::json counts = nlohmann::json::object();
    for (const auto & [key, cc] : counts_) {
        std::string ctx;
        for (const auto id : unpack(key)) {
            if (!ctx.empty()) {
                ctx += ' ';
            }
            ctx += id == bos_id ? std::string(bos_token) : vocab_[static_cast<std::size_t>(id)];
        }
        nlohmann::json next = nlohmann::json::object();
        for (const auto & [id, c] : cc.next) {
            next[vocab_[static_cast<std::size_t>(id)]] = c;
        }
        counts[ctx] = std::move(next);
    }
    j["counts"] = std::move(counts);
    return j;
}

NgramModel NgramModel::from_json(const nlohmann::json & j) {
    if (!j.is_object() || j.value("format", std::string{}) != "curvens-ngram-v1") {
        throw ConfigError("not a curvens-ngram-v1 model");
    }
    NgramModel m;
    try {
        m.name_ = j.value("name", std::string("ngram"));
        m.order_ = j.at("order").get<int>();
        m.k_ = j.at("k").get<double>();
        m.min_count_ = j.value("min_count", std::size_t{ 1 });
        m.vocab_ = j.at("vocab").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception & e) {
        throw ConfigError(std::string("ngram model: ") + e.what());
    }
    if (m.order_ < 1 || !(m.k_ > 0.0) || m.vocab_.size() < 2 || m.vocab_[unk_id] != unk_token ||
        m.vocab_[eot_id] != eot_token) {
        throw ConfigError("ngram model: invalid header");
    }
    m.rebuild_index();
    for (const auto & [ctx, next] : j.at("counts").items()) {
        std::vector<std::int32_t> ids;
        for (const auto & w : tokenize_words(ctx).words) {
            if (w == bos_token) {
                ids.push_back(bos_id);
                continue;
            }
            const auto it = m.index_.find(w);
            if (it == m.index_.end()) {
                throw ConfigError("ngram model: context word not in vocab: " + w);
            }
            ids.push_back(it->second);
        }
        if (ids.size() != static_cast<std::size_t>(m.order_ - 1)) {
            throw ConfigError("ngram model: context length mismatch: \"" + ctx + "\"");
        }
        ContextCounts cc;
        for (const auto & [w, c] : next.items()) {
            const auto it = m.index_.find(w);
            if (it == m.index_.end()) {
                throw ConfigError("ngram model: token not in vocab: " + w);
            }
            cc.next.emplace_back(it->second, c.get<std::uint64_t>());
            cc.total += c.get<std::uint64_t>();
        }
        std::sort(cc.next.begin(), cc.next.end());
        m.counts_.emplace(pack(ids), std::move(cc));
    }
    return m;
}

void NgramModel::save(const std::filesystem::path & path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << to_json().dump() << '\n';
}

NgramModel NgramModel::load(const std::filesystem::path & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open " + path.string());
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error & e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return from_json(j);
}

}  // namespace curvens
