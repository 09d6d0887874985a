#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "oiekit/core.hpp"

using namespace oiekit;

TEST_CASE("tokenize splits on whitespace and detaches punctuation") {
  CHECK(tokenize("He was knighted.") == std::vector<Token>{"he", "was", "knighted", "."});
  CHECK(tokenize("").empty());
  CHECK(tokenize("   \t \n ").empty());
  CHECK(tokenize("Queen 's Birthday") == std::vector<Token>{"queen", "'s", "birthday"});
  CHECK(tokenize("(the man; trembled)") ==
        std::vector<Token>{"(", "the", "man", ";", "trembled", ")"});
  CHECK(tokenize("what?!") == std::vector<Token>{"what", "?", "!"});
  CHECK(tokenize("a:b,c") == std::vector<Token>{"a", ":", "b", ",", "c"});
  CHECK(tokenize("don't") == std::vector<Token>{"don", "'t"});
}

TEST_CASE("tokenize is idempotent") {
  const std::vector<std::string> samples{
      "He was appointed Commander of the Order of the British Empire.",
      "Queen 's Birthday Honours, in 1948!", "don't stop; it's (fine)?", "a'b'c \"quoted\""};
  for (const auto& s : samples) {
    const auto once = tokenize(s);
    const auto twice = tokenize(join_tokens(once));
    CHECK(once == twice);
  }
}

TEST_CASE("tokens contain no whitespace and are non-empty") {
  for (const auto& t : tokenize("  odd   spacing\tand\nlines  ! ")) {
    CHECK(!t.empty());
    CHECK(t.find(' ') == std::string::npos);
  }
}

TEST_CASE("linearize emits both markers") {
  Extraction e;
  e.arg1 = {"i"};
  e.rel = {"ate"};
  e.arg2 = {"an", "apple"};
  CHECK(linearize(e) == std::vector<Token>{"i", "<rel>", "ate", "<obj>", "an", "apple"});

  Extraction no_arg2;
  no_arg2.arg1 = {"the", "man"};
  no_arg2.rel = {"constantly", "trembled"};
  CHECK(linearize(no_arg2) ==
        std::vector<Token>{"the", "man", "<rel>", "constantly", "trembled", "<obj>"});
}

TEST_CASE("linearize rejects reserved symbols and empty required slots") {
  Extraction e;
  e.arg1 = {"i"};
  e.rel = {"<rel>"};
  e.arg2 = {};
  CHECK_THROWS_AS(linearize(e), MalformedExtraction);
  Extraction empty_rel;
  empty_rel.arg1 = {"i"};
  CHECK_THROWS_AS(linearize(empty_rel), MalformedExtraction);
}

TEST_CASE("parse_linearized splits on first markers") {
  const Extraction e =
      parse_linearized({"i", "<rel>", "ate", "<obj>", "an", "orange"});
  CHECK(e.arg1 == std::vector<Token>{"i"});
  CHECK(e.rel == std::vector<Token>{"ate"});
  CHECK(e.arg2 == std::vector<Token>{"an", "orange"});
  CHECK(e.confidence == 1.0);
  CHECK(e.source == "model");

  CHECK_THROWS_AS(parse_linearized({"<rel>", "ate", "<obj>"}), MalformedExtraction);
  CHECK_THROWS_AS(parse_linearized({"i", "ate", "an", "orange"}), MalformedExtraction);
  CHECK_THROWS_AS(parse_linearized({"i", "<rel>", "ate"}), MalformedExtraction);
}

TEST_CASE("parse_linearized drops duplicate markers, first occurrence wins") {
  const Extraction e = parse_linearized({"a", "<rel>", "b", "<obj>", "c", "<obj>", "d"});
  CHECK(e.arg1 == std::vector<Token>{"a"});
  CHECK(e.rel == std::vector<Token>{"b"});
  CHECK(e.arg2 == std::vector<Token>{"c", "d"});

  const Extraction dup_rel = parse_linearized({"a", "<rel>", "b", "<rel>", "c", "<obj>", "d"});
  CHECK(dup_rel.rel == std::vector<Token>{"b", "c"});
}

TEST_CASE("linearize / parse_linearized round trip on random extractions") {
  std::mt19937_64 rng(7);
  const std::vector<Token> words{"a", "b", "cat", "dog", "ran", "42", "'s", "."};
  std::uniform_int_distribution<std::size_t> word(0, words.size() - 1);
  std::uniform_int_distribution<int> len(1, 4);
  std::uniform_int_distribution<int> arg2_len(0, 4);
  for (int trial = 0; trial < 500; ++trial) {
    Extraction e;
    for (int i = len(rng); i > 0; --i) e.arg1.push_back(words[word(rng)]);
    for (int i = len(rng); i > 0; --i) e.rel.push_back(words[word(rng)]);
    for (int i = arg2_len(rng); i > 0; --i) e.arg2.push_back(words[word(rng)]);
    CHECK(parse_linearized(linearize(e)) == e);
  }
}

TEST_CASE("build_memory_input layout") {
  Sentence s;
  s.id = "x";
  s.tokens = tokenize("i ate an apple and an orange .");
  CHECK(build_memory_input({s, {}}) ==
        std::vector<Token>{"[CLS]", "i", "ate", "an", "apple", "and", "an", "orange", "."});

  Extraction prior;
  prior.arg1 = {"i"};
  prior.rel = {"ate"};
  prior.arg2 = {"an", "apple"};
  const auto with_memory = build_memory_input({s, {prior}});
  CHECK(with_memory == std::vector<Token>{"[CLS]", "i", "ate", "an", "apple", "and", "an",
                                          "orange", ".", "[SEP]", "i", "<rel>", "ate", "<obj>",
                                          "an", "apple"});
}

TEST_CASE("build_memory_input separator count and length law") {
  Sentence s;
  s.id = "x";
  s.tokens = tokenize("one two three");
  Extraction e;
  e.arg1 = {"one"};
  e.rel = {"two"};
  e.arg2 = {"three"};
  std::vector<Extraction> priors;
  for (int k = 0; k <= 5; ++k) {
    const auto out = build_memory_input({s, priors});
    const auto seps = std::count(out.begin(), out.end(), symbols::kSep);
    CHECK(seps == k);
    std::size_t expect = 1 + s.tokens.size();
    for (const auto& p : priors) expect += 1 + linearize(p).size();
    CHECK(out.size() == expect);
    priors.push_back(e);
  }
}

TEST_CASE("extraction equality ignores confidence and source") {
  Extraction a, b;
  a.arg1 = b.arg1 = {"x"};
  a.rel = b.rel = {"y"};
  a.confidence = 0.2;
  b.confidence = 0.9;
  a.source = "openie4";
  b.source = "clausie";
  CHECK(a == b);
  CHECK(extraction_key(a) == extraction_key(b));
  b.arg2 = {"z"};
  CHECK(!(a == b));
  CHECK(extraction_key(a) != extraction_key(b));
}
