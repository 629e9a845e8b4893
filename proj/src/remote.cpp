#include "curvens/remote.hpp"

#include "curvens/error.hpp"

#include <httplib.h>

#include <cmath>

namespace curvens {

namespace {

double finite_number(const nlohmann::json & v, const std::string & what) {
    if (!v.is_number()) {
        throw ProtocolError(what + ": expected a number");
    }
    const double x = v.get<double>();
    if (!std::isfinite(x)) {
        throw ProtocolError(what + ": non-finite value");
    }
    return x;
}

}  // namespace

RemoteModel::RemoteModel(RemoteOptions options) : options_(std::move(options)) {
    if (options_.name.empty()) {
        options_.name = options_.model;
    }
}

nlohmann::json RemoteModel::post(const std::string & path, const nlohmann::json & body) const {
    httplib::Client client(options_.endpoint);
    if (!client.is_valid()) {
        throw TransportError(options_.endpoint, options_.model, "invalid endpoint");
    }
    const auto secs = static_cast<time_t>(options_.timeout_seconds);
    const auto usecs = static_cast<time_t>((options_.timeout_seconds - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    auto res = client.Post(path, body.dump(), "application/json");
    if (!res) {
        throw TransportError(options_.endpoint, options_.model, path + ": " + httplib::to_string(res.error()));
    }
    nlohmann::json reply;
    try {
        reply = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception &) {
        throw ProtocolError(options_.endpoint + path + ": HTTP " + std::to_string(res->status) +
                            " with a non-JSON body");
    }
    if (res->status != 200) {
        std::string message = reply.is_object() && reply.contains("error") && reply["error"].is_string() ?
                                  reply["error"].get<std::string>() :
                                  res->body;
        throw ProtocolError(options_.endpoint + path + ": HTTP " + std::to_string(res->status) + ": " + message);
    }
    if (!reply.is_object()) {
        throw ProtocolError(options_.endpoint + path + ": expected a JSON object");
    }
    return reply;
}

LogProbResult RemoteModel::log_prob(std::string_view text) const {
    const std::string t(text);
    return log_prob_batch(std::span<const std::string>(&t, 1)).front();
}

std::vector<LogProbResult> RemoteModel::log_prob_batch(std::span<const std::string> texts) const {
    if (texts.empty()) {
        return {};
    }
    nlohmann::json body;
    body["model"] = options_.model;
    body["texts"] = std::vector<std::string>(texts.begin(), texts.end());
    const auto reply = post("/v1/logprob", body);
    const auto lps = reply.find("logprobs");
    const auto tcs = reply.find("token_counts");
    if (lps == reply.end() || tcs == reply.end() || !lps->is_array() || !tcs->is_array()) {
        throw ProtocolError("/v1/logprob: missing logprobs/token_counts arrays");
    }
    if (lps->size() != texts.size() || tcs->size() != texts.size()) {
        throw ProtocolError("/v1/logprob: expected " + std::to_string(texts.size()) + " results, got " +
                            std::to_string(lps->size()));
    }
    std::vector<LogProbResult> out(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        out[i].total_logprob = finite_number((*lps)[i], "/v1/logprob logprobs[" + std::to_string(i) + "]");
        const auto & tc = (*tcs)[i];
        if (!tc.is_number_integer() || tc.get<std::int64_t>() < 1) {
            throw ProtocolError("/v1/logprob token_counts[" + std::to_string(i) + "]: expected a positive integer");
        }
        out[i].token_count = tc.get<std::size_t>();
    }
    return out;
}

TokenizedText RemoteModel::fill_masks(const MaskedText & masked, std::uint64_t seed) const {
    validate_masked(masked);
    nlohmann::json body;
    body["model"] = options_.model;
    body["masked_text"] = detokenize(masked.text);
    std::vector<std::size_t> spans;
    for (const auto & s : masked.slots) {
        spans.push_back(s.span_length);
    }
    body["span_lengths"] = spans;
    body["seed"] = seed;
    const auto reply = post("/v1/fill", body);
    if (!reply.contains("filled_text") || !reply["filled_text"].is_string()) {
        throw ProtocolError("/v1/fill: missing filled_text");
    }
    const auto filled = tokenize_words(reply["filled_text"].get<std::string>()).words;
    if (filled.size() != masked.filled_word_count()) {
        throw ProtocolError("/v1/fill: expected " + std::to_string(masked.filled_word_count()) + " words, got " +
                            std::to_string(filled.size()));
    }

    // Splice the server's span words into our own tokenization so unmasked
    // words and separators stay byte-identical.
    const auto & in = masked.text;
    TokenizedText out;
    out.separators = { in.separators[0] };
    std::size_t pos = 0;
    std::size_t slot = 0;
    for (std::size_t i = 0; i < in.words.size(); ++i) {
        if (slot < masked.slots.size() && masked.slots[slot].word_index == i) {
            const std::size_t span = masked.slots[slot].span_length;
            for (std::size_t s = 0; s < span; ++s) {
                out.words.push_back(filled[pos++]);
                if (s + 1 < span) {
                    out.separators.emplace_back(" ");
                }
            }
            ++slot;
        } else {
            if (filled[pos] != in.words[i]) {
                throw ProtocolError("/v1/fill: unmasked word " + std::to_string(pos) + " was changed");
            }
            out.words.push_back(filled[pos++]);
        }
        out.separators.push_back(in.separators[i + 1]);
    }
    return out;
}

std::string RemoteModel::generate(std::string_view prompt, std::size_t max_tokens, double temperature,
                                  std::uint64_t seed) const {
    if (max_tokens < 1) {
        throw Error("generate: max_tokens must be >= 1");
    }
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw Error("generate: temperature must be > 0");
    }
    nlohmann::json body;
    body["model"] = options_.model;
    body["prompt"] = std::string(prompt);
    body["max_tokens"] = max_tokens;
    body["temperature"] = temperature;
    body["seed"] = seed;
    const auto reply = post("/v1/generate", body);
    if (!reply.contains("text") || !reply["text"].is_string()) {
        throw ProtocolError("/v1/generate: missing text");
    }
    return reply["text"].get<std::string>();
}

}  // namespace curvens
