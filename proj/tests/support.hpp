#pragma once

#include "curvens/corpus.hpp"
#include "curvens/lm.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

namespace curvens::test {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{ 0 };
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("curvens-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir & operator=(const TempDir &) = delete;

    const std::filesystem::path & path() const { return path_; }
    std::filesystem::path operator/(const std::string & name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path & path, const std::string & content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

inline std::string read_text(const std::filesystem::path & path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline TextSample sample(std::string id, std::string text, Label label = Label::human) {
    TextSample s;
    s.id = std::move(id);
    s.text = std::move(text);
    s.label = label;
    return s;
}

// Scripted language model: log_prob is a caller-supplied function of the text,
// fills repeat a fixed word and generate appends fixed words. Counts calls.
class FakeModel final : public LanguageModel {
public:
    explicit FakeModel(std::string name, std::function<double(std::string_view)> score = {},
                       std::uint64_t complexity = 1)
        : name_(std::move(name)), score_(std::move(score)), complexity_(complexity) {}

    const std::string & name() const override { return name_; }
    std::uint64_t complexity() const override { return complexity_; }

    LogProbResult log_prob(std::string_view text) const override {
        ++calls;
        const double lp = score_ ? score_(text) : -static_cast<double>(text.size());
        return { lp, count_words(text) + 1 };
    }

    TokenizedText fill_masks(const MaskedText & masked, std::uint64_t seed) const override {
        validate_masked(masked);
        TokenizedText out;
        out.separators.clear();
        out.separators.push_back(masked.text.separators[0]);
        std::size_t slot = 0;
        for (std::size_t i = 0; i < masked.text.words.size(); ++i) {
            if (slot < masked.slots.size() && masked.slots[slot].word_index == i) {
                for (std::size_t k = 0; k < masked.slots[slot].span_length; ++k) {
                    out.words.push_back("f" + std::to_string((seed + k) % 7));
                    out.separators.push_back(k + 1 == masked.slots[slot].span_length ? masked.text.separators[i + 1]
                                                                                      : " ");
                }
                ++slot;
            } else {
                out.words.push_back(masked.text.words[i]);
                out.separators.push_back(masked.text.separators[i + 1]);
            }
        }
        return out;
    }

    std::string generate(std::string_view prompt, std::size_t max_tokens, double, std::uint64_t seed) const override {
        if (fail_generate) {
            throw std::runtime_error("generation disabled");
        }
        std::string out(prompt);
        for (std::size_t i = 0; i < max_tokens; ++i) {
            out += " g" + std::to_string((seed + i) % 5);
        }
        return out;
    }

    mutable std::atomic<std::size_t> calls{ 0 };
    bool fail_generate = false;

private:
    std::string name_;
    std::function<double(std::string_view)> score_;
    std::uint64_t complexity_;
};

}  // namespace curvens::test
