#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace curvens {

enum class Label { human, machine };

std::string_view to_string(Label label);
Label parse_label(std::string_view text);

struct TextSample {
    std::string id;
    std::string text;
    Label label = Label::human;
    std::optional<std::string> source_model;
    std::optional<std::string> dataset;
};

// Whitespace view of a string that reconstructs it byte-for-byte:
// separators.size() == words.size() + 1.
struct TokenizedText {
    std::vector<std::string> words;
    std::vector<std::string> separators{ std::string{} };

    bool operator==(const TokenizedText &) const = default;
};

TokenizedText tokenize_words(std::string_view text);
std::string detokenize(const TokenizedText & tokens);

/// Word count under tokenize_words, without materializing the tokens.
std::size_t count_words(std::string_view text);

struct Dataset {
    std::string name;
    std::vector<TextSample> samples;

    /// Appends a sample, rejecting empty texts and duplicate ids.
    void add(TextSample sample);
};

/// One JSON object per line: {"id","text","label"[,"source_model","dataset"]}.
/// Blank lines are skipped; unknown fields are ignored.
Dataset load_jsonl(const std::filesystem::path & path);
Dataset parse_jsonl(std::string_view content, std::string name = {});
void save_jsonl(const Dataset & dataset, const std::filesystem::path & path);
std::string to_jsonl(const Dataset & dataset);

}  // namespace curvens
