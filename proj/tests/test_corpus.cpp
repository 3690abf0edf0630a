#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "samner/corpus.hpp"
#include "samner/errors.hpp"

using namespace samner;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const std::string path = std::string("corpus_test_") + name;
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("load_conll builds mentions with character spans") {
  const auto path = write_temp("basic.conll",
                               "Bob\tB-person\n"
                               "Dylan\tI-person\n"
                               "sang\tO\n");
  const auto sentences = corpus::load_conll(path);
  REQUIRE(sentences.size() == 1);
  CHECK(sentences[0].text == "Bob Dylan sang");
  REQUIRE(sentences[0].gold.size() == 1);
  CHECK(sentences[0].gold[0].surface == "Bob Dylan");
  CHECK(sentences[0].gold[0].span == corpus::CharSpan{0, 9});
  CHECK(sentences[0].gold[0].label == "person");
  CHECK(sentences[0].schema_types == std::set<std::string>{"person"});
  std::remove(path.c_str());
}

TEST_CASE("load_conll: all-O sentence has no gold") {
  const auto path = write_temp("allo.conll", "just\tO\nwords\tO\n");
  const auto sentences = corpus::load_conll(path);
  REQUIRE(sentences.size() == 1);
  CHECK(sentences[0].gold.empty());
  std::remove(path.c_str());
}

TEST_CASE("load_conll repairs orphan I- tags with a warning") {
  const auto path = write_temp("orphan.conll", "UN\tI-org\nsays\tO\n");
  Log log = Log::capture();
  const auto sentences = corpus::load_conll(path, log);
  REQUIRE(sentences[0].gold.size() == 1);
  CHECK(sentences[0].gold[0].surface == "UN");
  CHECK(sentences[0].gold[0].label == "org");
  CHECK(log.has_warning_containing("orphan I-org"));
  std::remove(path.c_str());
}

TEST_CASE("load_conll: label switch inside a run starts a new mention") {
  const auto path = write_temp("switch.conll", "Bob\tB-person\nDylan\tI-org\n");
  Log log = Log::capture();
  const auto sentences = corpus::load_conll(path, log);
  REQUIRE(sentences[0].gold.size() == 2);
  CHECK(sentences[0].gold[0].surface == "Bob");
  CHECK(sentences[0].gold[1].surface == "Dylan");
  CHECK(log.has_warning_containing("orphan I-org"));
  std::remove(path.c_str());
}

TEST_CASE("load_conll reports malformed lines with their number") {
  const auto path = write_temp("bad.conll", "ok\tO\nbroken\n");
  try {
    corpus::load_conll(path);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("load_conll honors a types manifest") {
  const auto path = write_temp("manifest.conll", "# types: person, org\nBob\tB-person\n");
  const auto sentences = corpus::load_conll(path);
  CHECK(sentences[0].schema_types == std::set<std::string>{"person", "org"});
  std::remove(path.c_str());
}

TEST_CASE("BIO round-trip: write then reload preserves mentions") {
  std::mt19937 rng(7);
  const std::vector<std::string> vocab = {"alpha", "beta", "gamma", "delta", "x", "longword"};
  const std::vector<std::string> labels = {"person", "org", "place"};

  std::vector<corpus::Sentence> sentences;
  for (int n = 0; n < 50; ++n) {
    corpus::Sentence s;
    s.id = "r-" + std::to_string(n);
    const int token_count = 1 + static_cast<int>(rng() % 8);
    std::vector<std::string> tokens;
    for (int i = 0; i < token_count; ++i) tokens.push_back(vocab[rng() % vocab.size()]);

    std::vector<corpus::CharSpan> token_spans;
    for (const auto& t : tokens) {
      if (!s.text.empty()) s.text += ' ';
      token_spans.push_back({s.text.size(), s.text.size() + t.size()});
      s.text += t;
    }
    // non-overlapping mention spans over token ranges
    int i = 0;
    while (i < token_count) {
      if (rng() % 3 == 0) {
        const int len = 1 + static_cast<int>(rng() % 2);
        const int end = std::min(token_count, i + len);
        const corpus::CharSpan span{token_spans[i].first, token_spans[end - 1].second};
        s.gold.push_back({s.text.substr(span.first, span.second - span.first), span,
                          labels[rng() % labels.size()]});
        i = end;
      } else {
        ++i;
      }
    }
    sentences.push_back(std::move(s));
  }

  const std::string path = "corpus_test_roundtrip.conll";
  corpus::write_conll(sentences, path);
  const auto reloaded = corpus::load_conll(path);
  REQUIRE(reloaded.size() == sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    CHECK(reloaded[i].text == sentences[i].text);
    REQUIRE(reloaded[i].gold.size() == sentences[i].gold.size());
    for (std::size_t j = 0; j < sentences[i].gold.size(); ++j) {
      CHECK(reloaded[i].gold[j].surface == sentences[i].gold[j].surface);
      CHECK(reloaded[i].gold[j].span == sentences[i].gold[j].span);
      CHECK(reloaded[i].gold[j].label == sentences[i].gold[j].label);
    }
  }
  std::remove(path.c_str());
}

TEST_CASE("load_jsonl validates spans against the text") {
  const auto good = write_temp(
      "good.jsonl",
      R"({"id": "a", "text": "Rome falls", "entities": [{"surface": "Rome", "start": 0, "end": 4, "label": "loc"}]})"
      "\n"
      R"({"id": "b", "text": "no spans here", "entities": [{"surface": "spans"}]})"
      "\n");
  const auto sentences = corpus::load_jsonl(good);
  REQUIRE(sentences.size() == 2);
  CHECK(sentences[0].gold[0].span == corpus::CharSpan{0, 4});
  CHECK(!sentences[1].gold[0].span.has_value());
  std::remove(good.c_str());

  const auto bad = write_temp(
      "bad.jsonl",
      R"({"id": "rec7", "text": "Rome falls", "entities": [{"surface": "Rome", "start": 1, "end": 5}]})"
      "\n");
  try {
    corpus::load_jsonl(bad);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("rec7") != std::string::npos);
  }
  std::remove(bad.c_str());
}

TEST_CASE("load_jsonl keeps the longer of two overlapping gold mentions") {
  const auto path = write_temp(
      "overlap.jsonl",
      R"({"id": "o", "text": "New York City", "entities": [{"surface": "New York City", "start": 0, "end": 13, "label": "loc"}, {"surface": "York", "start": 4, "end": 8, "label": "loc"}]})"
      "\n");
  Log log = Log::capture();
  const auto sentences = corpus::load_jsonl(path, log);
  REQUIRE(sentences[0].gold.size() == 1);
  CHECK(sentences[0].gold[0].surface == "New York City");
  CHECK(log.has_warning_containing("York"));
  std::remove(path.c_str());
}

TEST_CASE("tag_entities wraps surfaces in occurrence order") {
  const auto tagged = corpus::tag_entities("Bob Dylan sang in Rome", {"Bob Dylan", "Rome"});
  CHECK(tagged.text_with_tags == "<ENT>Bob Dylan</ENT> sang in <ENT>Rome</ENT>");
  REQUIRE(tagged.tagged.size() == 2);
  CHECK(tagged.tagged[0].surface == "Bob Dylan");
  CHECK(tagged.tagged[0].span == corpus::CharSpan{0, 9});
}

TEST_CASE("tag_entities tags only the first occurrence") {
  const auto tagged = corpus::tag_entities("a a a", {"a"});
  CHECK(tagged.text_with_tags == "<ENT>a</ENT> a a");
}

TEST_CASE("tag_entities suppresses overlapping shorter surfaces") {
  Log log = Log::capture();
  const auto tagged = corpus::tag_entities("New York City", {"New York City", "York"}, log);
  CHECK(tagged.text_with_tags == "<ENT>New York City</ENT>");
  CHECK(tagged.tagged.size() == 1);
  CHECK(log.has_warning_containing("York"));
}

TEST_CASE("tag_entities falls back to a later free occurrence") {
  const auto tagged = corpus::tag_entities("New York City and York", {"New York City", "York"});
  CHECK(tagged.text_with_tags == "<ENT>New York City</ENT> and <ENT>York</ENT>");
}

TEST_CASE("tag_entities rejects absent surfaces") {
  CHECK_THROWS_AS(corpus::tag_entities("hello world", {"mars"}), ValidationError);
}

TEST_CASE("strip_tags inverts tagging and rejects unbalanced input") {
  CHECK(corpus::strip_tags("<ENT>Rome</ENT> falls") == "Rome falls");
  CHECK(corpus::strip_tags("no tags") == "no tags");
  CHECK_THROWS_AS(corpus::strip_tags("<ENT>x"), ValidationError);
  CHECK_THROWS_AS(corpus::strip_tags("x</ENT>"), ValidationError);
}

TEST_CASE("tag round-trip property with random sentences") {
  std::mt19937 rng(11);
  const std::vector<std::string> vocab = {"ab", "cd", "a", "b", "xyz", "ab cd", "q"};

  for (int n = 0; n < 500; ++n) {
    const int token_count = 1 + static_cast<int>(rng() % 7);
    std::string text;
    std::vector<corpus::CharSpan> token_spans;
    for (int i = 0; i < token_count; ++i) {
      const auto& token = vocab[rng() % vocab.size()];
      if (!text.empty()) text += ' ';
      token_spans.push_back({text.size(), text.size() + token.size()});
      text += token;
    }
    std::vector<std::string> entities;
    const int picks = static_cast<int>(rng() % 4);
    for (int p = 0; p < picks; ++p) {
      const int start = static_cast<int>(rng() % token_spans.size());
      const int end = std::min<int>(static_cast<int>(token_spans.size()), start + 1 + rng() % 2);
      entities.push_back(
          text.substr(token_spans[start].first, token_spans[end - 1].second - token_spans[start].first));
    }

    Log log = Log::capture();
    const auto tagged = corpus::tag_entities(text, entities, log);
    CHECK(corpus::strip_tags(tagged.text_with_tags) == text);

    // never nested: depth alternates between 0 and 1
    int depth = 0;
    std::size_t pos = 0;
    while (pos < tagged.text_with_tags.size()) {
      if (tagged.text_with_tags.compare(pos, 5, "<ENT>") == 0) {
        ++depth;
        CHECK(depth == 1);
        pos += 5;
      } else if (tagged.text_with_tags.compare(pos, 6, "</ENT>") == 0) {
        --depth;
        CHECK(depth == 0);
        pos += 6;
      } else {
        ++pos;
      }
    }
    CHECK(depth == 0);
  }
}

TEST_CASE("tag_entities emits one tag per distinct non-suppressed surface") {
  Log log = Log::capture();
  const auto tagged = corpus::tag_entities("x y x y", {"x", "y", "x"}, log);
  CHECK(tagged.text_with_tags == "<ENT>x</ENT> <ENT>y</ENT> x y");
  CHECK(tagged.tagged.size() == 2);
}

TEST_CASE("convert_dialogue_to_instruction converts asks into records") {
  const auto in = write_temp(
      "dialogue.jsonl",
      R"({"conversations": [{"from": "human", "value": "Text: Bob sang."}, {"from": "gpt", "value": "I've read this text."}, {"from": "human", "value": "What describes person in the text?"}, {"from": "gpt", "value": "[\"Bob\"]"}]})"
      "\n"
      R"({"conversations": [{"from": "human", "value": "Text: Nothing here."}, {"from": "gpt", "value": "Okay."}, {"from": "human", "value": "What describes org in the text?"}, {"from": "gpt", "value": "[]"}]})"
      "\n"
      "not json\n");
  const std::string out = "corpus_test_instr.jsonl";
  Log log = Log::capture();
  const auto count = corpus::convert_dialogue_to_instruction(in, out, log);
  CHECK(count == 2);
  CHECK(log.has_warning_containing("skipped record"));

  std::ifstream result(out);
  std::string line;
  REQUIRE(std::getline(result, line));
  {
    const auto record = nlohmann::ordered_json::parse(line);
    CHECK(record.at("input") == "Bob sang.");
    CHECK(record.at("schema") == std::vector<std::string>{"person"});
    const auto output = nlohmann::ordered_json::parse(record.at("output").get<std::string>());
    CHECK(output.at("person") == std::vector<std::string>{"Bob"});
  }
  REQUIRE(std::getline(result, line));
  {
    const auto record = nlohmann::ordered_json::parse(line);
    const auto output = nlohmann::ordered_json::parse(record.at("output").get<std::string>());
    CHECK(output.at("org").empty());
  }

  std::remove(in.c_str());
  std::remove(out.c_str());
}

TEST_CASE("convert_dialogue_to_instruction on an empty file writes nothing") {
  const auto in = write_temp("empty_dialogue.jsonl", "");
  const std::string out = "corpus_test_empty_instr.jsonl";
  CHECK(corpus::convert_dialogue_to_instruction(in, out) == 0);
  std::remove(in.c_str());
  std::remove(out.c_str());
}
