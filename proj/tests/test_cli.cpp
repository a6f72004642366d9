#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "phonrec/corpus.hpp"
#include "phonrec/vocab.hpp"
#include "support.hpp"

using namespace phonrec;
namespace fs = std::filesystem;

namespace {

struct Sandbox {
  fs::path dir;
  std::ostringstream out, err;

  explicit Sandbox(const std::string& name) : dir(fs::temp_directory_path() / ("phonrec_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Sandbox() { fs::remove_all(dir); }

  std::string path(const std::string& leaf) const { return (dir / leaf).string(); }

  int run(std::vector<std::string> args) {
    out.str("");
    err.str("");
    return cli::run(args, out, err);
  }
};

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> v;
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

// lines other than blank and '#' provenance lines
std::vector<std::string> body(const fs::path& p) {
  std::vector<std::string> v;
  for (const auto& l : lines(p)) {
    if (!l.empty() && l.front() != '#') v.push_back(l);
  }
  return v;
}

std::size_t body_lines(const fs::path& p) { return body(p).size(); }

// rich corpus as a manifest, all rows in train
void write_rich(const fs::path& p) {
  CorpusManifest m;
  std::size_t i = 0;
  for (const auto& s : test::rich_corpus()) {
    Utterance u;
    u.id = "r" + std::to_string(i++);
    u.text = "row " + std::to_string(i);
    u.phonemes = s;
    u.split = Split::Train;
    m.utterances.push_back(u);
  }
  write_manifest(p, m);
}

// toy corpus, vocabulary and a two-epoch model with one checkpoint
void small_run(Sandbox& sb) {
  write_manifest(sb.path("m.tsv"), test::toy_manifest(12, 3, 4));
  REQUIRE(sb.run({"vocab", "--manifest", sb.path("m.tsv"), "--all", "--out", sb.path("vocab")}) == 0);
  REQUIRE(sb.run({"train", "--manifest", sb.path("m.tsv"), "--vocab", sb.path("vocab/base.vocab"), "--out",
                  sb.path("run"), "--epochs", "2", "--ckpt-interval", "2", "--d-model", "16", "--d-ff", "32",
                  "--encoder-layers", "1", "--max-target-len", "20"}) == 0);
}

}  // namespace

TEST_CASE("cli: usage errors exit 2, help exits 0") {
  Sandbox sb("usage");
  CHECK(sb.run({}) == 2);
  CHECK(sb.run({"bogus"}) == 2);
  CHECK(sb.run({"vocab", "--manifest", sb.path("missing.tsv"), "--out", sb.path("v")}) == 2);
  CHECK(sb.run({"--help"}) == 0);
}

TEST_CASE("cli: augment names the utterance with an unmappable character") {
  Sandbox sb("augment");
  {
    std::ofstream in(sb.path("in.tsv"));
    in << "a1\tals sie\nbad7\tals ж\na3\tvon dem\n";
  }
  CHECK(sb.run({"augment", "--in", sb.path("in.tsv"), "--split", "1,1,1", "--out", sb.path("out.tsv")}) == 2);
  CHECK(sb.err.str().find("bad7") != std::string::npos);
  CHECK_FALSE(fs::exists(sb.path("out.tsv")));
}

TEST_CASE("cli: augment split sizes must match the kept rows") {
  Sandbox sb("augment_sizes");
  {
    std::ofstream in(sb.path("in.tsv"));
    in << "a1\tals sie\na2\tvon dem\n";
  }
  CHECK(sb.run({"augment", "--in", sb.path("in.tsv"), "--split", "1,1,1", "--out", sb.path("out.tsv")}) == 2);
  CHECK(sb.run({"augment", "--in", sb.path("in.tsv"), "--split", "1,1,0", "--out", sb.path("out.tsv")}) == 0);
  const auto m = ingest(sb.path("out.tsv"));
  CHECK(m.count(Split::Train) == 1);
  CHECK(m.count(Split::Valid) == 1);
  CHECK(m.seed.has_value());
}

TEST_CASE("cli: vocab writes one unit per line after the header") {
  Sandbox sb("vocab");
  write_rich(sb.path("m.tsv"));
  REQUIRE(sb.run({"vocab", "--manifest", sb.path("m.tsv"), "--variant", "base", "--out", sb.path("base.vocab")}) == 0);
  REQUIRE(sb.run({"vocab", "--manifest", sb.path("m.tsv"), "--variant", "vowel30", "--out", sb.path("v30.vocab")}) ==
          0);
  const auto base = lines(sb.path("base.vocab"));
  CHECK(base.size() == 54);
  CHECK(base.front().rfind("#variant=base", 0) == 0);
  CHECK(body_lines(sb.path("v30.vocab")) == 83);
  CHECK(Vocabulary::load(sb.path("v30.vocab")).merged_count() == 30);
  CHECK(sb.run({"vocab", "--manifest", sb.path("m.tsv"), "--variant", "total15", "--out", sb.path("x.vocab")}) == 2);
}

TEST_CASE("cli: --all writes ten variants") {
  Sandbox sb("vocab_all");
  write_rich(sb.path("m.tsv"));
  REQUIRE(sb.run({"vocab", "--manifest", sb.path("m.tsv"), "--all", "--out", sb.path("v")}) == 0);
  for (const auto& v : Variant::all()) CHECK(fs::exists(sb.dir / "v" / (v.label() + ".vocab")));
}

TEST_CASE("cli: train writes one trace row per epoch") {
  Sandbox sb("train");
  write_manifest(sb.path("m.tsv"), test::toy_manifest(40, 2));
  REQUIRE(sb.run({"vocab", "--manifest", sb.path("m.tsv"), "--variant", "base", "--out", sb.path("b.vocab")}) == 0);
  REQUIRE_MESSAGE(sb.run({"train", "--manifest", sb.path("m.tsv"), "--vocab", sb.path("b.vocab"), "--out",
                          sb.path("run"), "--epochs", "20", "--ckpt-interval", "10", "--d-model", "8", "--d-ff", "16",
                          "--encoder-layers", "1"}) == 0,
                  sb.err.str());
  CHECK(body_lines(sb.dir / "run" / "trace.csv") == 21);  // header + 20 epochs
  CHECK(fs::exists(sb.dir / "run" / "base_e010.ckpt"));
  CHECK(fs::exists(sb.dir / "run" / "base_e020.ckpt"));
  CHECK(fs::exists(sb.dir / "run" / "config.json"));

  // interval must divide the epoch count
  CHECK(sb.run({"train", "--manifest", sb.path("m.tsv"), "--vocab", sb.path("b.vocab"), "--out", sb.path("run2"),
                "--epochs", "20", "--ckpt-interval", "3"}) == 2);
}

TEST_CASE("cli: evaluate a single checkpoint gives a 1x1 grid") {
  Sandbox sb("evaluate");
  small_run(sb);
  REQUIRE(sb.run({"evaluate", "--ckpt", sb.path("run/*.ckpt"), "--manifest", sb.path("m.tsv"), "--vocab-dir",
                  sb.path("vocab"), "--out", sb.path("eval")}) == 0);
  const auto grid = body(sb.dir / "eval" / "table1.csv");
  REQUIRE(grid.size() == 2);
  CHECK(grid[0] == "epoch,base");
  CHECK(grid[1].rfind("2,", 0) == 0);
  CHECK(fs::exists(sb.dir / "eval" / "bleu_base_e002.json"));
}

TEST_CASE("cli: evaluating with the wrong vocabulary exits 2") {
  Sandbox sb("mismatch");
  small_run(sb);
  CHECK(sb.run({"evaluate", "--ckpt", sb.path("run/base_e002.ckpt"), "--manifest", sb.path("m.tsv"), "--vocab",
                sb.path("vocab/total10.vocab"), "--out", sb.path("eval")}) == 2);
  CHECK(sb.err.str().find("VocabMismatch") != std::string::npos);
}

TEST_CASE("cli: errors writes reports and the article table") {
  Sandbox sb("errors");
  small_run(sb);
  REQUIRE(sb.run({"errors", "--ckpt", sb.path("run/base_e002.ckpt"), "--manifest", sb.path("m.tsv"), "--vocab-dir",
                  sb.path("vocab"), "--name", "tiny", "--out", sb.path("err")}) == 0);
  for (const char* f : {"errors.json", "articles.json", "table2.tsv"}) CHECK(fs::exists(sb.dir / "err" / f));
  const auto t3 = body(sb.dir / "err" / "table3.csv");
  REQUIRE(t3.size() == 2);
  CHECK(t3[0] == "model,der,des,dem,den,die,das,Avg.");
  CHECK(t3[1].rfind("tiny,", 0) == 0);
  CHECK(body(sb.dir / "err" / "table2.tsv").size() == 5);  // header + four test rows
}
