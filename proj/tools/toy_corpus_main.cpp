#include "curvens/toy_corpus.hpp"

#include <CLI11.hpp>

#include <exception>
#include <iostream>

int main(int argc, char ** argv) {
    CLI::App app{ "Write a deterministic toy-language corpus as JSONL", "curvens-toy-corpus" };
    curvens::ToyCorpusOptions opts;
    std::string out;
    app.add_option("--documents", opts.documents, "Number of documents")->capture_default_str();
    app.add_option("--min-words", opts.min_words, "Minimum words per document")->capture_default_str();
    app.add_option("--max-words", opts.max_words, "Maximum words per document")->capture_default_str();
    app.add_option("--seed", opts.seed, "Random seed")->capture_default_str();
    app.add_option("--prefix", opts.id_prefix, "Sample id prefix")->capture_default_str();
    app.add_option("--dataset", opts.dataset, "Dataset tag")->capture_default_str();
    app.add_option("--vocab-size", opts.vocab_size, "Words in the toy language")->capture_default_str();
    app.add_option("--successors", opts.successors, "Preferred successors per word")->capture_default_str();
    app.add_option("--surprise-rate", opts.surprise_rate, "Probability of a uniform transition")
        ->capture_default_str();
    app.add_option("--language-seed", opts.language_seed, "Seed of the transition structure")
        ->capture_default_str();
    app.add_option("--out", out, "Output JSONL")->required();
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError & e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    try {
        curvens::save_jsonl(curvens::make_toy_corpus(opts), out);
    } catch (const std::exception & e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
