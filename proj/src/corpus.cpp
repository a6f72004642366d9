#include "phonrec/corpus.hpp"

#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "phonrec/error.hpp"
#include "phonrec/random.hpp"
#include "phonrec/utf8.hpp"

namespace phonrec {

const char* to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
    case Split::Unassigned: return "";
  }
  return "";
}

Split parse_split(std::string_view text) {
  if (text.empty()) return Split::Unassigned;
  if (text == "train") return Split::Train;
  if (text == "valid") return Split::Valid;
  if (text == "test") return Split::Test;
  throw Error(ErrorKind::ParseError, "unknown split '" + std::string(text) + "'");
}

SplitSizes SplitSizes::parse(std::string_view text) {
  const auto fields = utf8::split_fields(text, ',');
  if (fields.size() != 3) {
    throw Error(ErrorKind::ParseError, "split sizes must be train,valid,test");
  }
  std::size_t values[3];
  for (int i = 0; i < 3; ++i) {
    const auto f = utf8::trim(fields[i]);
    const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), values[i]);
    if (ec != std::errc() || ptr != f.data() + f.size()) {
      throw Error(ErrorKind::ParseError, "bad split size '" + f + "'");
    }
  }
  return {values[0], values[1], values[2]};
}

std::size_t CorpusManifest::count(Split s) const {
  std::size_t n = 0;
  for (const auto& u : utterances) n += u.split == s;
  return n;
}

std::vector<const Utterance*> CorpusManifest::select(Split s) const {
  std::vector<const Utterance*> out;
  for (const auto& u : utterances) {
    if (u.split == s) out.push_back(&u);
  }
  return out;
}

CorpusManifest parse_manifest(std::string_view text) {
  CorpusManifest m;
  std::unordered_set<std::string> ids;
  std::size_t line_no = 0;
  for (const auto& raw_line : utf8::split_fields(text, '\n')) {
    ++line_no;
    std::string line = raw_line;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("#split_seed=", 0) == 0) {
      std::uint64_t seed = 0;
      const auto [ptr, ec] = std::from_chars(line.data() + 12, line.data() + line.size(), seed);
      if (ec == std::errc() && ptr == line.data() + line.size()) m.seed = seed;
      continue;
    }
    if (line.empty() || line.front() == '#') continue;
    const auto fields = utf8::split_fields(line, '\t');
    if (fields.size() < 2 || fields.size() > 5) {
      throw Error(ErrorKind::ParseError,
                  "line " + std::to_string(line_no) + ": expected 2 to 5 tab-separated columns",
                  line_no);
    }
    Utterance u;
    u.id = fields[0];
    u.text = fields[1];
    if (u.id.empty()) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": empty id",
                  line_no);
    }
    if (u.text.empty()) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": empty text",
                  line_no);
    }
    if (fields.size() > 2) u.phonemes = PhonemeSequence::from_tokens(fields[2]);
    try {
      if (fields.size() > 3) u.split = parse_split(fields[3]);
    } catch (const Error& e) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": " + e.message(),
                  line_no);
    }
    if (fields.size() > 4) u.feature_path = fields[4];
    if (!ids.insert(u.id).second) {
      throw Error(ErrorKind::DuplicateId,
                  "line " + std::to_string(line_no) + ": duplicate id '" + u.id + "'", line_no);
    }
    m.utterances.push_back(std::move(u));
  }
  return m;
}

CorpusManifest ingest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str());
}

std::string format_manifest(const CorpusManifest& m,
                            const std::vector<std::string>& header_comments) {
  std::string out;
  for (const auto& c : header_comments) out += "# " + c + "\n";
  if (m.seed) out += "#split_seed=" + std::to_string(*m.seed) + "\n";
  for (const auto& u : m.utterances) {
    out += u.id;
    out += '\t';
    out += u.text;
    out += '\t';
    out += u.phonemes.to_tokens();
    out += '\t';
    out += to_string(u.split);
    if (!u.feature_path.empty()) {
      out += '\t';
      out += u.feature_path;
    }
    out += '\n';
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const CorpusManifest& m,
                    const std::vector<std::string>& header_comments) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << format_manifest(m, header_comments);
}

CorpusManifest filter_by_length(const CorpusManifest& m, std::size_t max_chars) {
  CorpusManifest out;
  out.seed = m.seed;
  out.removed_by_filter = m.removed_by_filter;
  for (const auto& u : m.utterances) {
    if (utf8::length(u.text) <= max_chars) {
      out.utterances.push_back(u);
    } else {
      ++out.removed_by_filter;
    }
  }
  return out;
}

CorpusManifest augment(const CorpusManifest& m, const RuleTable& rules,
                       const ClassTable& classes) {
  CorpusManifest out = m;
  for (auto& u : out.utterances) {
    try {
      u.phonemes = transliterate(u.text, rules, classes);
    } catch (const Error& e) {
      throw Error(e.kind(), "utterance '" + u.id + "': " + e.message(), e.position());
    }
  }
  return out;
}

CorpusManifest split(const CorpusManifest& m, const SplitSizes& sizes, std::uint64_t seed) {
  if (sizes.total() != m.size()) {
    throw Error(ErrorKind::SizeMismatch,
                "split sizes sum to " + std::to_string(sizes.total()) + " but manifest has " +
                    std::to_string(m.size()) + " utterances");
  }
  std::vector<std::size_t> order(m.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  CorpusManifest out = m;
  out.seed = seed;
  for (std::size_t k = 0; k < order.size(); ++k) {
    Split s = Split::Test;
    if (k < sizes.train) {
      s = Split::Train;
    } else if (k < sizes.train + sizes.valid) {
      s = Split::Valid;
    }
    out.utterances[order[k]].split = s;
  }
  return out;
}

}  // namespace phonrec
