#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "chatclf/corpus.hpp"
#include "chatclf/error.hpp"
#include "chatclf/rng.hpp"
#include "chatclf/synthetic.hpp"
#include "helpers.hpp"

using namespace chatclf;

namespace {

Corpus parse_jsonl(const std::string& text) {
  std::istringstream in(text);
  return parse_corpus(in, CorpusFormat::jsonl);
}

Corpus corpus_of(const std::vector<std::string>& texts) {
  Corpus c;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    Message m;
    m.id = "m" + std::to_string(i);
    m.room_id = "r";
    m.user_id = "u" + std::to_string(i % 3);
    m.timestamp_ms = static_cast<std::int64_t>(i);
    m.text = texts[i];
    c.messages.push_back(m);
  }
  return c;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("three well-formed JSONL rows load as three messages") {
  const auto c = parse_jsonl(
      R"({"id":"m1","room_id":"r1","user_id":"u1","timestamp":1000,"text":"oi"}
{"id":"m2","room_id":"r1","user_id":"u2","timestamp":"2021-03-04T10:00:00Z","text":"tudo bem"}
{"id":"m3","room_id":"r0","user_id":"u1","timestamp":5,"text":"x","is_moderator":true}
)");
  REQUIRE(c.messages.size() == 3);
  // normalized by (room_id, timestamp)
  CHECK(c.messages[0].id == "m3");
  CHECK(c.messages[0].is_moderator);
  CHECK(c.messages[1].id == "m1");
  CHECK_FALSE(c.messages[1].is_moderator);
  CHECK(c.messages[2].timestamp_ms == 1614852000000);
}

TEST_CASE("duplicate message id is rejected by name") {
  const auto msg = error_of([] {
    parse_jsonl(R"({"id":"m1","room_id":"r","user_id":"u","timestamp":1,"text":"a"}
{"id":"m1","room_id":"r","user_id":"u","timestamp":2,"text":"b"}
)");
  });
  CHECK(msg.find("m1") != std::string::npos);
  CHECK(msg.find("duplicate") != std::string::npos);
}

TEST_CASE("malformed records report their line") {
  const auto bad_json = error_of([] {
    parse_jsonl("{\"id\":\"m1\",\"room_id\":\"r\",\"user_id\":\"u\",\"timestamp\":1,\"text\":\"a\"}\n{oops\n");
  });
  CHECK(bad_json.find("line 2") != std::string::npos);
  const auto missing = error_of([] { parse_jsonl(R"({"id":"m1","room_id":"r","timestamp":1,"text":"a"})"); });
  CHECK(missing.find("user_id") != std::string::npos);
  const auto ts = error_of([] {
    parse_jsonl(R"({"id":"m1","room_id":"r","user_id":"u","timestamp":"yesterday","text":"a"})");
  });
  CHECK(ts.find("timestamp") != std::string::npos);
  CHECK(ts.find("line 1") != std::string::npos);
}

TEST_CASE("CSV corpus with quoted multiline text") {
  std::istringstream in(
      "id,room_id,user_id,timestamp,text,is_moderator\n"
      "a,r1,u1,10,\"hello, world\",false\n"
      "b,r1,u2,20,\"two\nlines\",true\n");
  const auto c = parse_corpus(in, CorpusFormat::csv);
  REQUIRE(c.messages.size() == 2);
  CHECK(c.messages[0].text == "hello, world");
  CHECK(c.messages[1].text == "two\nlines");
  CHECK(c.messages[1].is_moderator);
}

TEST_CASE("empty text is kept and flagged degenerate") {
  const auto c = parse_jsonl(R"({"id":"m1","room_id":"r","user_id":"u","timestamp":1,"text":""})");
  REQUIRE(c.messages.size() == 1);
  CHECK(c.messages[0].degenerate);
  CHECK_FALSE(c.warnings.empty());
}

TEST_CASE("serialization round-trips bit-identically") {
  auto data = generate([] {
    SyntheticSpec s;
    s.n_samples = 120;
    s.dim = 4;
    s.n_informative = 2;
    s.moderator_fraction = 0.2;
    s.rooms = 5;
    s.users = 30;
    return s;
  }());
  std::ostringstream first;
  write_corpus_jsonl(data.corpus, first);
  const auto reread = parse_jsonl(first.str());
  CHECK(reread.messages == data.corpus.messages);
  std::ostringstream second;
  write_corpus_jsonl(reread, second);
  CHECK(first.str() == second.str());

  testing::TempDir dir("corpus");
  write_corpus_jsonl(data.corpus, dir / "c.jsonl");
  const auto loaded = load_corpus(dir / "c.jsonl", corpus_format_from_path(dir / "c.jsonl"));
  std::ostringstream third;
  write_corpus_jsonl(loaded, third);
  CHECK(third.str() == testing::slurp(dir / "c.jsonl"));
}

TEST_CASE("annotations: counts, labels and duplicates") {
  SUBCASE("3 annotators x 2 messages all 0") {
    std::istringstream in("message_id,annotator_id,label\nm1,a,0\nm1,b,0\nm1,c,0\nm2,a,0\nm2,b,0\nm2,c,0\n");
    const auto set = parse_annotations_csv(in);
    CHECK(set.annotations.size() == 6);
    CHECK(set.warnings.empty());
  }
  SUBCASE("label 2 is non-binary") {
    std::istringstream in("message_id,annotator_id,label\nm1,a,2\n");
    const auto msg = error_of([&] { parse_annotations_csv(in); });
    CHECK(msg.find("non-binary") != std::string::npos);
  }
  SUBCASE("empty file gives an empty list and a warning") {
    std::istringstream in("message_id,annotator_id,label\n");
    const auto set = parse_annotations_csv(in);
    CHECK(set.annotations.empty());
    CHECK(set.warnings.size() == 1);
  }
  SUBCASE("duplicate pair rejected") {
    std::istringstream in("message_id,annotator_id,label\nm1,a,1\nm1,a,0\n");
    CHECK_THROWS_AS(parse_annotations_csv(in), ValidationError);
  }
  SUBCASE("unknown message ids are kept with a warning") {
    testing::TempDir dir("ann");
    std::ofstream(dir / "a.csv") << "message_id,annotator_id,label\nm1,a,1\nzz,a,0\n";
    const auto corpus = parse_jsonl(R"({"id":"m1","room_id":"r","user_id":"u","timestamp":1,"text":"a"})");
    const auto set = load_annotations(dir / "a.csv", &corpus);
    CHECK(set.annotations.size() == 2);
    REQUIRE(set.warnings.size() == 1);
    CHECK(set.warnings[0].find("zz") != std::string::npos);
  }
}

TEST_CASE("annotation CSV round trip") {
  std::vector<Annotation> anns = {{"m1", "a", 1}, {"m1", "b", 0}, {"m,2", "a", 1}};
  std::ostringstream out;
  write_annotations_csv(anns, out);
  std::istringstream in(out.str());
  CHECK(parse_annotations_csv(in).annotations == anns);
}

TEST_CASE("token and character counts") {
  CHECK(count_tokens("a b") == 2);
  CHECK(count_tokens("  a\tb \n c  ") == 3);
  CHECK(count_tokens("") == 0);
  CHECK(count_chars("hi") == 2);
  CHECK(count_chars("a\xC3\xA7\xC3\xA3o") == 4);  // "ação"
}

TEST_CASE("stats on hand-counted fixtures") {
  const auto s = corpus_stats(corpus_of({"a b", "c d e f g h"}));
  CHECK(s.mean_tokens == 4.0);
  CHECK(s.median_tokens == 4.0);
  CHECK(s.message_count_with_moderator == 2);
  CHECK(corpus_stats(corpus_of({"hi"})).median_chars == 2.0);
  CHECK_THROWS_AS(corpus_stats(Corpus{}), ValidationError);
}

TEST_CASE("moderator messages counted in both variants") {
  auto c = corpus_of({"one", "two words", "three little words"});
  c.messages[2].is_moderator = true;
  c.messages[2].user_id = "mod";
  const auto all = corpus_stats(c, MessageFilter::all);
  const auto without = corpus_stats(c, MessageFilter::exclude_moderator);
  CHECK(all.message_count_with_moderator == 3);
  CHECK(all.message_count_without_moderator == 2);
  CHECK(all.mean_tokens == doctest::Approx(2.0));
  CHECK(without.mean_tokens == doctest::Approx(1.5));
  CHECK(all.user_count == 2);
}

TEST_CASE("stats are invariant to message order") {
  Rng rng(99);
  std::vector<std::string> texts;
  for (int i = 0; i < 57; ++i) {
    std::string t;
    const auto words = 1 + rng.below(9);
    for (std::uint64_t w = 0; w < words; ++w) t += std::string(1 + rng.below(7), 'x') + " ";
    texts.push_back(t);
  }
  const auto base = corpus_stats(corpus_of(texts));
  CHECK(base.mean_tokens >= 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    rng.shuffle(texts);
    const auto s = corpus_stats(corpus_of(texts));
    CHECK(s.mean_tokens == base.mean_tokens);
    CHECK(s.mean_chars == base.mean_chars);
    CHECK(s.median_tokens == base.median_tokens);
    CHECK(s.median_chars == base.median_chars);
  }
}

TEST_CASE("corpus-shaped fixture: 25 rooms, 309 users, median 5 tokens") {
  SyntheticSpec spec;
  spec.n_samples = 2000;
  spec.dim = 8;
  spec.n_informative = 4;
  const auto data = generate(spec);
  const auto s = corpus_stats(data.corpus);
  CHECK(s.room_count == 25);
  CHECK(s.user_count == 309);
  CHECK(s.median_tokens == 5.0);
}
