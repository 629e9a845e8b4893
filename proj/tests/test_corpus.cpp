#include "curvens/corpus.hpp"
#include "curvens/error.hpp"
#include "support.hpp"

#include <doctest.h>

#include <random>

using namespace curvens;

TEST_CASE("tokenize_words keeps exact separators") {
    const auto t = tokenize_words("a  b");
    CHECK(t.words == std::vector<std::string>{ "a", "b" });
    CHECK(t.separators == std::vector<std::string>{ "", "  ", "" });

    const auto empty = tokenize_words("");
    CHECK(empty.words.empty());
    CHECK(empty.separators == std::vector<std::string>{ "" });

    const auto padded = tokenize_words(" x ");
    CHECK(padded.words == std::vector<std::string>{ "x" });
    CHECK(padded.separators == std::vector<std::string>{ " ", " " });
}

TEST_CASE("detokenize inverts the examples") {
    CHECK(detokenize({ { "a", "b" }, { "", "  ", "" } }) == "a  b");
    CHECK(detokenize({ {}, { "" } }) == "");
    CHECK(detokenize({ { "x" }, { " ", " " } }) == " x ");
}

TEST_CASE("detokenize rejects a separator count mismatch") {
    CHECK_THROWS_AS(detokenize({ { "a", "b" }, { "", "" } }), Error);
}

TEST_CASE("tokenize/detokenize round trip on random unicode strings") {
    // Pieces include every ASCII whitespace byte and multi-byte UTF-8.
    const std::vector<std::string> pieces = { " ",  "\t", "\n", "\r\n", "\v", "\f", "a",   "Z",   "9",
                                              ".",  "é",  "ß",  "漢",   "字", "🙂", "\xc2\xa0", "-", "'" };
    std::mt19937_64 gen(42);
    for (int trial = 0; trial < 2000; ++trial) {
        std::string s;
        const auto len = gen() % 40;
        for (std::uint64_t i = 0; i < len; ++i) {
            s += pieces[gen() % pieces.size()];
        }
        const auto t = tokenize_words(s);
        REQUIRE(t.separators.size() == t.words.size() + 1);
        REQUIRE(detokenize(t) == s);
        REQUIRE(count_words(s) == t.words.size());
        for (const auto & w : t.words) {
            REQUIRE(!w.empty());
        }
    }
}

TEST_CASE("parse_jsonl maps fields and ignores unknown ones") {
    const auto ds = parse_jsonl(R"({"id":"a","text":"hello world","label":"human","extra":1})");
    REQUIRE(ds.samples.size() == 1);
    CHECK(ds.samples[0].id == "a");
    CHECK(ds.samples[0].text == "hello world");
    CHECK(ds.samples[0].label == Label::human);
    CHECK_FALSE(ds.samples[0].source_model.has_value());
}

TEST_CASE("empty file gives an empty dataset") {
    test::TempDir dir;
    test::write_text(dir / "empty.jsonl", "");
    const auto ds = load_jsonl(dir / "empty.jsonl");
    CHECK(ds.samples.empty());
    CHECK(ds.name == "empty");
}

TEST_CASE("jsonl errors name the problem") {
    const std::string dup = "{\"id\":\"a\",\"text\":\"x\",\"label\":\"human\"}\n"
                            "{\"id\":\"a\",\"text\":\"y\",\"label\":\"machine\"}\n";
    CHECK_THROWS_WITH(parse_jsonl(dup), doctest::Contains("duplicate id: a"));

    const std::string malformed = "{\"id\":\"a\",\"text\":\"x\",\"label\":\"human\"}\n{not json\n";
    CHECK_THROWS_WITH(parse_jsonl(malformed), doctest::Contains("line 2"));

    CHECK_THROWS(parse_jsonl(R"({"id":"a","text":"x","label":"robot"})"));
    CHECK_THROWS(parse_jsonl(R"({"id":"a","label":"human"})"));
    CHECK_THROWS(parse_jsonl(R"({"id":"a","text":"   ","label":"human"})"));
}

TEST_CASE("jsonl round trip preserves order and optional fields") {
    Dataset ds;
    ds.name = "d";
    for (int i = 0; i < 20; ++i) {
        auto s = test::sample("id" + std::to_string(19 - i), "text \"" + std::to_string(i) + "\"\n ok",
                              i % 3 == 0 ? Label::machine : Label::human);
        if (i % 2 == 0) {
            s.source_model = "gpt2";
            s.dataset = "xsum";
        }
        ds.add(std::move(s));
    }
    test::TempDir dir;
    save_jsonl(ds, dir / "d.jsonl");
    const auto back = load_jsonl(dir / "d.jsonl");
    REQUIRE(back.samples.size() == ds.samples.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        CHECK(back.samples[i].id == ds.samples[i].id);
        CHECK(back.samples[i].text == ds.samples[i].text);
        CHECK(back.samples[i].label == ds.samples[i].label);
        CHECK(back.samples[i].source_model == ds.samples[i].source_model);
        CHECK(back.samples[i].dataset == ds.samples[i].dataset);
    }
}

TEST_CASE("blank lines are skipped") {
    const auto ds = parse_jsonl("\n{\"id\":\"a\",\"text\":\"x\",\"label\":\"human\"}\n\n");
    CHECK(ds.samples.size() == 1);
}
