#include <doctest.h>

#include <set>

#include "phonrec/corpus.hpp"
#include "phonrec/error.hpp"
#include "support.hpp"

using namespace phonrec;

namespace {

CorpusManifest numbered(std::size_t n) {
  CorpusManifest m;
  for (std::size_t i = 0; i < n; ++i) {
    Utterance u;
    u.id = "u" + std::to_string(i);
    u.text = "als";
    m.utterances.push_back(u);
  }
  return m;
}

}  // namespace

TEST_CASE("parse_manifest keeps file order") {
  const auto m = parse_manifest("# header\na\tals sie\nb\tvon\nc\tdem\n");
  REQUIRE(m.size() == 3);
  CHECK(m.utterances[0].id == "a");
  CHECK(m.utterances[2].text == "dem");
  CHECK(m.utterances[1].split == Split::Unassigned);
}

TEST_CASE("manifest errors") {
  try {
    parse_manifest("a\tx\na\ty\n");
    FAIL("expected DuplicateId");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DuplicateId);
  }
  try {
    parse_manifest("a\tx\nb\n");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ParseError);
    REQUIRE(e.position());
    CHECK(*e.position() == 2);
  }
  CHECK_THROWS_AS(parse_manifest("a\t\n"), Error);
}

TEST_CASE("manifest format round trip") {
  auto m = parse_manifest("a\tals\ta l s\ttrain\nb\tsie\ts i:\ttest\tfeat/b.txt\n");
  CHECK(m.utterances[1].feature_path == "feat/b.txt");
  CHECK(m.utterances[0].split == Split::Train);
  const auto text = format_manifest(m, {"seed=1"});
  CHECK(text.rfind("# seed=1\n", 0) == 0);
  m.seed = 9;
  CHECK(parse_manifest(format_manifest(m)).seed == 9u);
  const auto again = parse_manifest(text);
  CHECK(format_manifest(again, {"seed=1"}) == text);
}

TEST_CASE("filter_by_length keeps exactly 200") {
  CorpusManifest m;
  for (std::size_t len : {10u, 200u, 201u}) {
    Utterance u;
    u.id = std::to_string(len);
    u.text = std::string(len, 'a');
    m.utterances.push_back(u);
  }
  const auto f = filter_by_length(m);
  REQUIRE(f.size() == 2);
  CHECK(f.removed_by_filter == 1);
  CHECK(filter_by_length(f).size() == 2);
  CHECK(filter_by_length(CorpusManifest{}).size() == 0);

  // code points, not bytes
  Utterance u;
  u.id = "x";
  for (int i = 0; i < 200; ++i) u.text += "ö";
  CorpusManifest single;
  single.utterances.push_back(u);
  CHECK(filter_by_length(single).size() == 1);
}

TEST_CASE("augment attaches phonemes and names failures") {
  auto m = parse_manifest("a\tals\nb\tsie\n");
  const auto out = augment(m, test::german(), test::classes());
  CHECK(out.utterances[0].phonemes.flat() == test::toks("a l s"));
  CHECK(out.utterances[0].text == "als");
  CHECK(augment(CorpusManifest{}, test::german(), test::classes()).size() == 0);

  auto bad = parse_manifest("a\tals\nutt7\tseite 3\n");
  try {
    augment(bad, test::german(), test::classes());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnmappableGrapheme);
    CHECK(std::string(e.what()).find("utt7") != std::string::npos);
  }
}

TEST_CASE("split partitions with the requested sizes") {
  const auto m = numbered(7425);
  const auto s = split(m, SplitSizes{}, 42);
  CHECK(s.count(Split::Train) == 6425);
  CHECK(s.count(Split::Valid) == 500);
  CHECK(s.count(Split::Test) == 500);
  CHECK(s.count(Split::Unassigned) == 0);
  CHECK(s.seed == 42u);
  for (std::size_t i = 0; i < m.size(); ++i) CHECK(s.utterances[i].id == m.utterances[i].id);

  const auto again = split(m, SplitSizes{}, 42);
  const auto other = split(m, SplitSizes{}, 43);
  bool same = true;
  bool differs = false;
  for (std::size_t i = 0; i < m.size(); ++i) {
    same = same && s.utterances[i].split == again.utterances[i].split;
    differs = differs || s.utterances[i].split != other.utterances[i].split;
  }
  CHECK(same);
  CHECK(differs);
}

TEST_CASE("split edge cases") {
  const auto one = split(numbered(1), SplitSizes{1, 0, 0}, 0);
  CHECK(one.utterances[0].split == Split::Train);
  try {
    split(numbered(5), SplitSizes{1, 1, 1}, 0);
    FAIL("expected SizeMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SizeMismatch);
  }
  CHECK(SplitSizes::parse("6425,500,500").total() == 7425);
  CHECK_THROWS_AS(SplitSizes::parse("1,2"), Error);
}
