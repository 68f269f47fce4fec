#include <doctest.h>

#include <random>
#include <string>
#include <vector>

#include "textaug/corpus.hpp"

using namespace textaug;

namespace {

CaptionRecord make_record(const std::string& text_id, const std::string& image_id,
                          const std::string& text, Split split = Split::train) {
    CaptionRecord record;
    record.text_id = text_id;
    record.image_id = image_id;
    record.identity_id = "7";
    record.image_path = image_id;
    record.split = split;
    record.text = text;
    return record;
}

std::vector<CaptionRecord> random_corpus(std::size_t n, std::uint32_t seed) {
    static const std::vector<std::string> kWords = {
        "man",   "woman", "red",    "blue",  "shirt", "jacket", "bag",   "shoes",
        "young", "tall",  "walking", "holding", "black", "white", "jeans", "hat"};
    std::mt19937 rng(seed);
    std::uniform_int_distribution<std::size_t> word(0, kWords.size() - 1);
    std::uniform_int_distribution<int> length(4, 12);
    std::uniform_int_distribution<int> split(0, 9);

    std::vector<CaptionRecord> records;
    for (std::size_t i = 0; i < n; ++i) {
        std::string text = "caption " + std::to_string(i);
        const int words = length(rng);
        for (int w = 0; w < words; ++w)
            text += " " + kWords[word(rng)];
        const std::string image = "img/" + std::to_string(i) + ".png";
        const Split s = split(rng) < 8 ? Split::train : (split(rng) < 5 ? Split::val : Split::test);
        records.push_back(make_record(image + "#0", image, text, s));
    }
    return records;
}

} // namespace

TEST_CASE("caption normalization trims and collapses whitespace") {
    CHECK(normalize_caption("  a  man\twith \n a bag  ") == "a man with a bag");
    CHECK(normalize_caption("plain") == "plain");
    CHECK(normalize_caption(" \t\n ") == "");
    CHECK(normalize_caption("Case And. Punct, kept!") == "Case And. Punct, kept!");
}

TEST_CASE("token_count counts whitespace-delimited tokens") {
    CHECK(token_count("") == 0);
    CHECK(token_count("one") == 1);
    CHECK(token_count("a man in a red shirt") == 6);
}

TEST_CASE("cuhk-style records fan out one row per caption") {
    const std::string raw = R"([
      {"file_path": "set1/0001.png", "id": 12, "split": "train",
       "captions": ["A man in a red shirt.", "The man wears red."]}
    ])";
    const auto records = parse_annotations(raw, AnnotationFormat::cuhk_pedes_json);
    REQUIRE(records.size() == 2);
    CHECK(records[0].text_id == "set1/0001.png#0");
    CHECK(records[1].text_id == "set1/0001.png#1");
    CHECK(records[0].image_id == records[1].image_id);
    CHECK(records[0].identity_id == "12");
    CHECK(records[0].split == Split::train);
    CHECK(records[0].text == "A man in a red shirt.");
    CHECK(records[1].text == "The man wears red.");
}

TEST_CASE("empty inputs parse to empty corpora") {
    CHECK(parse_annotations("[]", AnnotationFormat::cuhk_pedes_json).empty());
    CHECK(parse_annotations("", AnnotationFormat::canonical_jsonl).empty());
}

TEST_CASE("fan-out conserves the source caption count") {
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> captions_per(1, 4);
    nlohmann::json doc = nlohmann::json::array();
    std::size_t total_captions = 0;
    for (int i = 0; i < 40; ++i) {
        const int k = captions_per(rng);
        nlohmann::json captions = nlohmann::json::array();
        for (int c = 0; c < k; ++c)
            captions.push_back("caption " + std::to_string(i) + " variant " + std::to_string(c));
        total_captions += static_cast<std::size_t>(k);
        doc.push_back({{"file_path", "img/" + std::to_string(i) + ".png"},
                       {"id", i},
                       {"split", "train"},
                       {"captions", captions}});
    }
    const auto records = parse_annotations(doc.dump(), AnnotationFormat::cuhk_pedes_json);
    CHECK(records.size() == total_captions);
}

TEST_CASE("malformed syntax reports a byte offset") {
    try {
        parse_annotations("[{\"file_path\": }]", AnnotationFormat::cuhk_pedes_json);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.byte_offset() > 0);
    }
}

TEST_CASE("missing fields name the record index") {
    const std::string raw = R"([
      {"file_path": "a.png", "id": 1, "split": "train", "captions": ["x"]},
      {"file_path": "b.png", "split": "train", "captions": ["y"]}
    ])";
    try {
        parse_annotations(raw, AnnotationFormat::cuhk_pedes_json);
        FAIL("expected FieldError");
    } catch (const FieldError& e) {
        CHECK(e.record_index() == 1);
        CHECK(e.field() == "id");
    }
}

TEST_CASE("unknown split labels are validation errors") {
    const std::string raw =
        R"([{"file_path": "a.png", "id": 1, "split": "dev", "captions": ["x"]}])";
    CHECK_THROWS_AS(parse_annotations(raw, AnnotationFormat::cuhk_pedes_json), ValidationError);
}

TEST_CASE("validate_corpus flags duplicates, empties, and split counts") {
    SUBCASE("clean corpus") {
        const auto report = validate_corpus(random_corpus(10, 3));
        CHECK(report.record_count == 10);
        CHECK(report.duplicate_text_ids.empty());
        CHECK(report.empty_captions.empty());
        CHECK(report.clean());
    }
    SUBCASE("five-record fixture with one duplicated text_id") {
        std::vector<CaptionRecord> records;
        for (int i = 0; i < 4; ++i)
            records.push_back(make_record("t" + std::to_string(i), "img" + std::to_string(i),
                                          "caption number " + std::to_string(i)));
        records.push_back(make_record("t2", "img9", "a fifth caption"));
        const auto report = validate_corpus(records);
        CHECK(report.record_count == 5);
        REQUIRE(report.duplicate_text_ids.size() == 1);
        CHECK(report.duplicate_text_ids[0] == "t2");
        CHECK_FALSE(report.clean());
    }
    SUBCASE("one empty caption") {
        auto records = random_corpus(4, 5);
        records.push_back(make_record("e0", "imge", "   "));
        const auto report = validate_corpus(records);
        REQUIRE(report.empty_captions.size() == 1);
        CHECK(report.empty_captions[0] == "e0");
    }
    SUBCASE("split counts 8 train / 1 val / 1 test") {
        std::vector<CaptionRecord> records;
        for (int i = 0; i < 8; ++i)
            records.push_back(make_record("tr" + std::to_string(i), "i" + std::to_string(i),
                                          "text " + std::to_string(i), Split::train));
        records.push_back(make_record("v0", "iv", "val text", Split::val));
        records.push_back(make_record("s0", "is", "test text", Split::test));
        const auto report = validate_corpus(records);
        CHECK(report.split_counts.at(Split::train) == 8);
        CHECK(report.split_counts.at(Split::val) == 1);
        CHECK(report.split_counts.at(Split::test) == 1);
        CHECK(report.record_count == 10);
    }
}

TEST_CASE("captions beyond the 77-token limit are flagged, not rejected") {
    std::string long_text = "word";
    for (int i = 1; i < 78; ++i)
        long_text += " word" + std::to_string(i);
    REQUIRE(token_count(long_text) == 78);
    auto records = random_corpus(2, 11);
    records.push_back(make_record("long0", "imgl", long_text));
    const auto report = validate_corpus(records);
    REQUIRE(report.overlong_captions.size() == 1);
    CHECK(report.overlong_captions[0] == "long0");
    CHECK(report.clean()); // flag only
    CHECK_NOTHROW(write_manifest(records));
}

TEST_CASE("manifest round-trips byte-exactly") {
    SUBCASE("empty list writes an empty file") { CHECK(write_manifest({}).empty()); }
    SUBCASE("single record") {
        const std::vector<CaptionRecord> records{make_record("a#0", "a.png", "A tall man.")};
        const std::string bytes = write_manifest(records);
        CHECK(bytes.back() == '\n');
        CHECK(bytes.rfind("{\"text_id\":", 0) == 0); // fixed key order
        const auto parsed = parse_annotations(bytes, AnnotationFormat::canonical_jsonl);
        REQUIRE(parsed.size() == 1);
        CHECK(parsed[0] == records[0]);
        CHECK(write_manifest(parsed) == bytes);
    }
    SUBCASE("1000-record corpus round-trips field by field") {
        const auto corpus = random_corpus(1000, 17);
        const auto parsed = parse_annotations(write_manifest(corpus),
                                              AnnotationFormat::canonical_jsonl);
        REQUIRE(parsed.size() == corpus.size());
        for (std::size_t i = 0; i < corpus.size(); ++i)
            CHECK(parsed[i] == corpus[i]);
    }
}

TEST_CASE("parsing is deterministic and order-preserving") {
    const auto corpus = random_corpus(50, 23);
    const std::string bytes = write_manifest(corpus);
    const auto first = parse_annotations(bytes, AnnotationFormat::canonical_jsonl);
    const auto second = parse_annotations(bytes, AnnotationFormat::canonical_jsonl);
    CHECK(first == second);
    for (std::size_t i = 0; i < corpus.size(); ++i)
        CHECK(first[i].text_id == corpus[i].text_id);
}

TEST_CASE("write_manifest refuses invalid records with an index") {
    auto records = random_corpus(3, 29);
    records.push_back(make_record("bad", "imgb", "  "));
    try {
        write_manifest(records);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("record 3") != std::string::npos);
    }

    auto dup = random_corpus(2, 31);
    dup.push_back(dup[0]);
    CHECK_THROWS_AS(write_manifest(dup), ValidationError);
}

TEST_CASE("canonical jsonl rejects rows with missing fields") {
    const std::string line =
        R"({"text_id":"a","image_id":"b","identity_id":"c","split":"train","text":"t"})";
    CHECK_THROWS_AS(parse_annotations(line + "\n", AnnotationFormat::canonical_jsonl), FieldError);
}
