#include "cli.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "phonrec/analysis.hpp"
#include "phonrec/bleu.hpp"
#include "phonrec/corpus.hpp"
#include "phonrec/error.hpp"
#include "phonrec/g2p.hpp"
#include "phonrec/ipa.hpp"
#include "phonrec/model.hpp"
#include "phonrec/vocab.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace phonrec::cli {

namespace {

struct RunConfig {
  std::string subcommand;
  std::uint64_t seed = 1;
  std::string variant;

  // Manifest / paths
  std::string manifest;
  std::string out;
  std::string rules = PHONREC_DATA_DIR "/german.rules";
  std::string classes = PHONREC_DATA_DIR "/ipa_classes.tsv";
  std::string vocab;
  std::string vocab_dir;
  std::vector<std::string> checkpoints;

  // augment
  std::size_t max_chars = 200;
  std::string split = "6425,500,500";

  // vocab
  bool all = false;

  // train
  ModelConfig model;
  bool features = false;

  // errors
  std::string eval_split = "test";
  std::string model_name;
};

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw Error(ErrorKind::Io, std::string("missing --") + what);
  if (!fs::is_regular_file(path)) throw Error(ErrorKind::Io, std::string(what) + " not found: " + path);
}

std::string fmt(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::fixed, 2);
  return std::string(buf, ptr);
}

// Provenance lines shared by every text output.
std::vector<std::string> provenance(const RunConfig& rc) {
  std::vector<std::string> lines;
  lines.push_back("phonrec " + rc.subcommand + " seed=" + std::to_string(rc.seed) +
                  (rc.variant.empty() ? "" : " variant=" + rc.variant));
  if (!rc.manifest.empty()) lines.push_back("manifest=" + rc.manifest);
  return lines;
}

std::string comment_block(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += "# " + l + "\n";
  return out;
}

ordered_json provenance_json(const RunConfig& rc, std::optional<ModelConfig> config = {}) {
  ordered_json j;
  j["command"] = rc.subcommand;
  j["seed"] = rc.seed;
  j["variant"] = rc.variant;
  j["manifest"] = rc.manifest;
  if (config) j["config"] = ordered_json::parse(to_json(*config));
  return j;
}

std::vector<PhonemeSequence> train_phonemes(const CorpusManifest& m) {
  std::vector<PhonemeSequence> out;
  for (const auto* u : m.select(Split::Train)) {
    if (u->phonemes.empty()) {
      throw Error(ErrorKind::ParseError, "utterance '" + u->id + "' has no phonemes; run augment first");
    }
    out.push_back(u->phonemes);
  }
  if (out.empty()) throw Error(ErrorKind::EmptyCorpus, "manifest has no train split");
  return out;
}

std::vector<std::string> expand_globs(const std::vector<std::string>& patterns) {
  std::vector<std::string> out;
  for (const auto& p : patterns) {
    const fs::path path(p);
    const std::string name = path.filename().string();
    if (name.find_first_of("*?[") == std::string::npos) {
      if (!fs::is_regular_file(path)) throw Error(ErrorKind::Io, "checkpoint not found: " + p);
      out.push_back(p);
      continue;
    }
    const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    std::vector<std::string> hits;
    if (fs::is_directory(dir)) {
      for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && fnmatch(name.c_str(), e.path().filename().c_str(), 0) == 0) {
          hits.push_back((dir / e.path().filename()).string());
        }
      }
    }
    if (hits.empty()) throw Error(ErrorKind::Io, "no checkpoint matches " + p);
    std::sort(hits.begin(), hits.end());
    out.insert(out.end(), hits.begin(), hits.end());
  }
  return out;
}

Vocabulary vocab_for(const RunConfig& rc, const Checkpoint& ck) {
  if (!rc.vocab.empty()) return Vocabulary::load(rc.vocab);
  if (rc.vocab_dir.empty()) throw Error(ErrorKind::Io, "missing --vocab or --vocab-dir");
  const fs::path path = fs::path(rc.vocab_dir) / (ck.variant + ".vocab");
  if (!fs::is_regular_file(path)) {
    throw Error(ErrorKind::Io, "no vocabulary for variant '" + ck.variant + "' at " + path.string());
  }
  return Vocabulary::load(path);
}

// Vocabulary file with provenance fields appended to the header line.
std::string vocab_text(const Vocabulary& v, const RunConfig& rc, const CorpusManifest& m,
                       bool short_list) {
  std::string text = v.to_text();
  std::string extra = " counted=train seed=" + std::to_string(m.seed.value_or(rc.seed));
  if (short_list) extra += " short_list=1";
  text.insert(text.find('\n'), extra);
  return text;
}

int cmd_augment(const RunConfig& rc, std::ostream& out) {
  require_file(rc.manifest, "manifest");
  require_file(rc.rules, "rules");
  require_file(rc.classes, "classes");
  if (rc.out.empty()) throw Error(ErrorKind::Io, "missing --out");
  const auto sizes = SplitSizes::parse(rc.split);
  const auto rules = RuleTable::load(rc.rules);
  const auto classes = ClassTable::load(rc.classes);

  const auto ingested = ingest(rc.manifest);
  const auto kept = filter_by_length(ingested, rc.max_chars);
  const auto augmented = augment(kept, rules, classes);
  const auto result = split(augmented, sizes, rc.seed);

  auto header = provenance(rc);
  header.push_back("max_chars=" + std::to_string(rc.max_chars) + " split=" + rc.split +
                   " removed=" + std::to_string(kept.removed_by_filter));
  write_manifest(rc.out, result, header);
  out << "read " << ingested.size() << " kept " << kept.size() << " removed "
      << kept.removed_by_filter << "\n"
      << "train " << result.count(Split::Train) << " valid " << result.count(Split::Valid)
      << " test " << result.count(Split::Test) << "\n";
  return 0;
}

int cmd_vocab(RunConfig rc, std::ostream& out, std::ostream& err) {
  require_file(rc.manifest, "manifest");
  if (rc.out.empty()) throw Error(ErrorKind::Io, "missing --out");
  if (!rc.all && rc.variant.empty()) throw Error(ErrorKind::UnknownVariant, "missing --variant or --all");
  const auto classes = ClassTable::load(rc.classes);
  const auto m = ingest(rc.manifest);
  const auto corpus = train_phonemes(m);
  const auto inv = induce_inventory(corpus, classes);
  out << "inventory " << inv.size() << " phonemes from " << corpus.size() << " train utterances\n";

  std::vector<Variant> variants;
  if (rc.all) {
    const auto all = Variant::all();
    variants.assign(all.begin(), all.end());
  } else {
    variants.push_back(Variant::parse(rc.variant));
  }
  for (const auto& v : variants) {
    bool short_list = false;
    const auto vocab = build_variant(corpus, inv, v, &short_list);
    if (short_list) err << "warning: " << v.label() << " has fewer than " << v.n << " candidate bigrams\n";
    rc.variant = v.label();
    const fs::path path = rc.all ? fs::path(rc.out) / (v.label() + ".vocab") : fs::path(rc.out);
    write_file(path, vocab_text(vocab, rc, m, short_list));
    out << v.label() << " " << vocab.size() << " units -> " << path.string() << "\n";
  }
  return 0;
}

std::string checkpoint_name(const std::string& variant, int epoch) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03d", epoch);
  return variant + "_e" + buf + ".ckpt";
}

int cmd_train(RunConfig rc, std::ostream& out, std::ostream& err) {
  require_file(rc.manifest, "manifest");
  require_file(rc.vocab, "vocab");
  if (rc.out.empty()) throw Error(ErrorKind::Io, "missing --out");
  const auto m = ingest(rc.manifest);
  const auto vocab = Vocabulary::load(rc.vocab);
  rc.variant = vocab.variant();
  rc.model.seed = rc.seed;
  rc.model.source = rc.features ? SourceKind::Features : SourceKind::Tokens;
  const auto data = prepare_training_data(m, vocab, rc.model.source);

  const fs::path dir(rc.out);
  fs::create_directories(dir);
  TrainOptions opt;
  opt.keep_checkpoints = false;
  ModelConfig used = rc.model;
  opt.on_checkpoint = [&](const Checkpoint& c) {
    used = c.config;
    c.save(dir / checkpoint_name(c.variant, c.epoch));
    out << "checkpoint " << (dir / checkpoint_name(c.variant, c.epoch)).string() << "\n";
  };
  opt.on_epoch = [&](const EpochLoss& e) {
    out << "epoch " << e.epoch << " train_loss " << e.train_loss << " valid_loss " << e.valid_loss
        << std::endl;
  };
  if (data.valid.empty()) err << "warning: no validation split; valid_loss is nan\n";
  const auto result = train(data, rc.model, opt);
  write_file(dir / "trace.csv", comment_block(provenance(rc)) + result.trace.to_csv());
  auto cfg = provenance_json(rc, used);
  write_file(dir / "config.json", cfg.dump(2) + "\n");
  return 0;
}

std::string table1_csv(const std::map<int, std::map<std::string, double>>& grid,
                       const std::vector<std::string>& columns, const RunConfig& rc) {
  std::string csv = comment_block(provenance(rc)) + "epoch";
  for (const auto& c : columns) csv += "," + c;
  csv += "\n";
  for (const auto& [epoch, row] : grid) {
    csv += std::to_string(epoch);
    for (const auto& c : columns) {
      csv += ",";
      const auto it = row.find(c);
      if (it != row.end()) csv += fmt(it->second);
    }
    csv += "\n";
  }
  return csv;
}

int cmd_evaluate(RunConfig rc, std::ostream& out) {
  require_file(rc.manifest, "manifest");
  if (rc.out.empty()) throw Error(ErrorKind::Io, "missing --out");
  const auto paths = expand_globs(rc.checkpoints);
  const auto m = ingest(rc.manifest);
  const fs::path dir(rc.out);
  fs::create_directories(dir);

  std::map<int, std::map<std::string, double>> grid;
  std::set<std::string> seen;
  for (const auto& p : paths) {
    const auto ck = Checkpoint::load(p);
    const auto vocab = vocab_for(rc, ck);
    auto report = evaluate_checkpoint(ck, m, vocab);
    RunConfig one = rc;
    one.variant = ck.variant;
    one.seed = ck.config.seed;
    auto j = ordered_json::parse(report.to_json());
    j["checkpoint"] = p;
    j["provenance"] = provenance_json(one, ck.config);
    auto name = checkpoint_name(ck.variant, ck.epoch);
    name.replace(name.size() - 5, 5, ".json");
    write_file(dir / ("bleu_" + name), j.dump(2) + "\n");
    grid[ck.epoch][ck.variant] = report.bleu;
    seen.insert(ck.variant);
    out << p << " " << ck.variant << " epoch " << ck.epoch << " bleu " << fmt(report.bleu) << "\n";
  }
  // canonical variant order, as in the results table
  std::vector<std::string> columns;
  for (const auto& v : Variant::all()) {
    if (seen.count(v.label())) columns.push_back(v.label());
  }
  write_file(dir / "table1.csv", table1_csv(grid, columns, rc));
  return 0;
}

int cmd_errors(RunConfig rc, std::ostream& out) {
  require_file(rc.manifest, "manifest");
  if (rc.checkpoints.size() != 1) throw Error(ErrorKind::Io, "errors takes exactly one --ckpt");
  require_file(rc.checkpoints[0], "ckpt");
  if (rc.out.empty()) throw Error(ErrorKind::Io, "missing --out");
  const auto rules = RuleTable::load(rc.rules);
  const auto classes = ClassTable::load(rc.classes);
  const auto m = ingest(rc.manifest);
  const auto ck = Checkpoint::load(rc.checkpoints[0]);
  const auto vocab = vocab_for(rc, ck);
  rc.variant = ck.variant;
  rc.seed = ck.config.seed;
  const std::string label = rc.model_name.empty() ? ck.variant : rc.model_name;

  const auto predictions = predict(ck, m, vocab, parse_split(rc.eval_split));
  std::vector<Sentence> refs, hyps;
  std::vector<PhonemeSequence> ref_seqs;
  std::vector<std::string> ids;
  for (const auto& p : predictions) {
    refs.push_back(p.utterance->phonemes.flat());
    ref_seqs.push_back(p.utterance->phonemes);
    hyps.push_back(p.decoded.phonemes.flat());
    ids.push_back(p.utterance->id);
  }
  const auto errors = analyze_errors(refs, hyps, classes, ids);
  const auto articles = article_accuracy(ref_seqs, hyps, rules, classes);

  const fs::path dir(rc.out);
  auto ej = ordered_json::parse(errors.to_json());
  ej["provenance"] = provenance_json(rc, ck.config);
  write_file(dir / "errors.json", ej.dump(2) + "\n");
  auto aj = ordered_json::parse(articles.to_json());
  aj["provenance"] = provenance_json(rc, ck.config);
  write_file(dir / "articles.json", aj.dump(2) + "\n");

  std::string t3 = comment_block(provenance(rc)) + "model";
  for (const auto& a : articles.articles) t3 += "," + a.article;
  t3 += ",Avg.\n" + label;
  for (const auto& a : articles.articles) t3 += "," + (a.accuracy ? fmt(*a.accuracy) : std::string());
  char avg[32];
  std::snprintf(avg, sizeof avg, "%.3f", articles.average);
  t3 += std::string(",") + avg + "\n";
  write_file(dir / "table3.csv", t3);

  std::string t2 = comment_block(provenance(rc)) + "id\ttext\tanswer\tprediction\n";
  for (const auto& p : predictions) {
    t2 += p.utterance->id + "\t" + p.utterance->text + "\t" + p.utterance->phonemes.to_ipa() + "\t" +
          render_marked(p.utterance->phonemes, p.decoded.phonemes.flat()) +
          (p.decoded.truncated ? " [truncated]" : "") + "\n";
  }
  write_file(dir / "table2.tsv", t2);

  out << predictions.size() << " sentences: " << errors.repetition_count() << " repetitions, "
      << errors.dropout_count() << " dropouts, " << errors.substitution_count() << " substitutions ("
      << errors.same_class_substitution_count() << " same-class); article avg " << avg << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Phoneme recognition with bigram vocabularies"};
  app.require_subcommand(1);
  RunConfig rc;

  auto* augment_cmd = app.add_subcommand("augment", "filter, transliterate and split a manifest");
  augment_cmd->add_option("--in,--manifest", rc.manifest, "input manifest TSV")->required();
  augment_cmd->add_option("--rules", rc.rules, "G2P rule table");
  augment_cmd->add_option("--classes", rc.classes, "phoneme class table");
  augment_cmd->add_option("--max-chars", rc.max_chars, "length filter in code points");
  augment_cmd->add_option("--split", rc.split, "train,valid,test sizes");
  augment_cmd->add_option("--seed", rc.seed, "split seed");
  augment_cmd->add_option("--out", rc.out, "output manifest")->required();

  auto* vocab_cmd = app.add_subcommand("vocab", "build vocabulary variants from the train split");
  vocab_cmd->add_option("--manifest", rc.manifest)->required();
  vocab_cmd->add_option("--variant", rc.variant, "base, vowel10..30, const10..30, total10..30");
  vocab_cmd->add_flag("--all", rc.all, "write all ten variants into --out as a directory");
  vocab_cmd->add_option("--classes", rc.classes);
  vocab_cmd->add_option("--seed", rc.seed);
  vocab_cmd->add_option("--out", rc.out)->required();

  auto* train_cmd = app.add_subcommand("train", "train a model, writing checkpoints and a loss trace");
  train_cmd->add_option("--manifest", rc.manifest)->required();
  train_cmd->add_option("--vocab", rc.vocab)->required();
  train_cmd->add_option("--out", rc.out, "output directory")->required();
  train_cmd->add_option("--seed", rc.seed);
  train_cmd->add_option("--epochs", rc.model.epochs);
  train_cmd->add_option("--ckpt-interval", rc.model.checkpoint_interval);
  train_cmd->add_option("--batch-size", rc.model.batch_size);
  train_cmd->add_option("--lr", rc.model.learning_rate);
  train_cmd->add_option("--dropout", rc.model.dropout);
  train_cmd->add_option("--grad-clip", rc.model.grad_clip);
  train_cmd->add_option("--d-model", rc.model.d_model);
  train_cmd->add_option("--heads", rc.model.heads);
  train_cmd->add_option("--d-ff", rc.model.d_ff);
  train_cmd->add_option("--encoder-layers", rc.model.encoder_layers);
  train_cmd->add_option("--decoder-layers", rc.model.decoder_layers);
  train_cmd->add_option("--max-target-len", rc.model.max_target_len);
  train_cmd->add_flag("--features", rc.features, "read encoder input from feature_path");

  auto* eval_cmd = app.add_subcommand("evaluate", "BLEU of checkpoints on the test split");
  eval_cmd->add_option("--ckpt", rc.checkpoints, "checkpoint files or globs")->required();
  eval_cmd->add_option("--manifest", rc.manifest)->required();
  eval_cmd->add_option("--vocab-dir", rc.vocab_dir, "directory of <variant>.vocab files");
  eval_cmd->add_option("--vocab", rc.vocab, "single vocabulary file");
  eval_cmd->add_option("--out", rc.out, "output directory")->required();

  auto* errors_cmd = app.add_subcommand("errors", "error analysis and article accuracy");
  errors_cmd->add_option("--ckpt", rc.checkpoints)->required();
  errors_cmd->add_option("--manifest", rc.manifest)->required();
  errors_cmd->add_option("--vocab-dir", rc.vocab_dir);
  errors_cmd->add_option("--vocab", rc.vocab);
  errors_cmd->add_option("--rules", rc.rules);
  errors_cmd->add_option("--classes", rc.classes);
  errors_cmd->add_option("--split", rc.eval_split, "split to decode (default test)");
  errors_cmd->add_option("--name", rc.model_name, "row label in table3.csv");
  errors_cmd->add_option("--out", rc.out, "output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*augment_cmd) {
      rc.subcommand = "augment";
      return cmd_augment(rc, out);
    }
    if (*vocab_cmd) {
      rc.subcommand = "vocab";
      return cmd_vocab(rc, out, err);
    }
    if (*train_cmd) {
      rc.subcommand = "train";
      return cmd_train(rc, out, err);
    }
    if (*eval_cmd) {
      rc.subcommand = "evaluate";
      return cmd_evaluate(rc, out);
    }
    rc.subcommand = "errors";
    return cmd_errors(rc, out);
  } catch (const Error& e) {
    err << "error: " << e.what();
    if (e.position()) err << " (at " << *e.position() << ")";
    err << "\n";
    return is_numeric(e.kind()) ? 3 : 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace phonrec::cli
