#include "phonrec/vocab.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "phonrec/error.hpp"
#include "phonrec/utf8.hpp"

namespace phonrec {

BigramTable& BigramTable::operator+=(const BigramTable& other) {
  if (other.scope != scope) {
    throw Error(ErrorKind::ShapeMismatch, "cannot merge bigram tables of different scope");
  }
  for (const auto& [pair, n] : other.counts) counts[pair] += n;
  return *this;
}

BigramTable count_bigrams(std::span<const PhonemeSequence> corpus, BigramScope scope,
                          const PhonemeInventory& inventory) {
  BigramTable table;
  table.scope = scope;
  auto keep = [&](const std::string& a, const std::string& b) {
    if (scope == BigramScope::All) return true;
    const auto want =
        scope == BigramScope::VowelVowel ? PhonemeClass::Vowel : PhonemeClass::Consonant;
    const auto ca = inventory.class_of(a);
    const auto cb = inventory.class_of(b);
    if (!ca || !cb) {
      throw Error(ErrorKind::UnknownPhoneme,
                  "bigram member not in inventory: " + (ca ? b : a));
    }
    return *ca == want && *cb == want;
  };
  for (const auto& seq : corpus) {
    for (const auto& word : seq.words) {
      for (std::size_t i = 0; i + 1 < word.size(); ++i) {
        if (keep(word[i], word[i + 1])) ++table.counts[{word[i], word[i + 1]}];
      }
    }
  }
  return table;
}

TopBigrams top_n(const BigramTable& table, std::size_t n) {
  std::vector<std::pair<Bigram, std::uint64_t>> entries(table.counts.begin(), table.counts.end());
  // std::map iteration is already in pair order, so a stable sort on count
  // keeps the lexicographic tie-break.
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  TopBigrams out;
  out.short_list = entries.size() < n;
  const std::size_t k = std::min(n, entries.size());
  for (std::size_t i = 0; i < k; ++i) out.bigrams.push_back(entries[i].first);
  return out;
}

std::string Variant::label() const {
  if (n == 0) return "base";
  switch (scope) {
    case BigramScope::VowelVowel: return "vowel" + std::to_string(n);
    case BigramScope::ConsonantConsonant: return "const" + std::to_string(n);
    case BigramScope::All: return "total" + std::to_string(n);
  }
  return "base";
}

Variant Variant::parse(std::string_view label) {
  if (label == "base") return {BigramScope::All, 0};
  for (const auto& v : all()) {
    if (v.label() == label) return v;
  }
  throw Error(ErrorKind::UnknownVariant,
              "unknown variant '" + std::string(label) +
                  "' (expected base or {vowel,const,total}{10,20,30})");
}

std::array<Variant, 10> Variant::all() {
  return {Variant{BigramScope::All, 0},
          Variant{BigramScope::VowelVowel, 10},
          Variant{BigramScope::VowelVowel, 20},
          Variant{BigramScope::VowelVowel, 30},
          Variant{BigramScope::ConsonantConsonant, 10},
          Variant{BigramScope::ConsonantConsonant, 20},
          Variant{BigramScope::ConsonantConsonant, 30},
          Variant{BigramScope::All, 10},
          Variant{BigramScope::All, 20},
          Variant{BigramScope::All, 30}};
}

void Vocabulary::add_unit(std::string display) { units_.push_back(std::move(display)); }

const std::string& Vocabulary::unit(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= units_.size()) {
    throw Error(ErrorKind::IndexOutOfRange, "unit index " + std::to_string(index));
  }
  return units_[static_cast<std::size_t>(index)];
}

bool Vocabulary::is_merged(int index) const { return merges_.count(index) != 0; }

const Bigram& Vocabulary::parts(int index) const {
  const auto it = merges_.find(index);
  if (it == merges_.end()) {
    throw Error(ErrorKind::IndexOutOfRange, "unit " + std::to_string(index) + " is not merged");
  }
  return it->second;
}

int Vocabulary::atom_index(std::string_view symbol) const {
  const auto it = atom_index_.find(std::string(symbol));
  return it == atom_index_.end() ? -1 : it->second;
}

int Vocabulary::merge_index(const std::string& first, const std::string& second) const {
  const auto it = merge_index_.find({first, second});
  return it == merge_index_.end() ? -1 : it->second;
}

std::uint64_t Vocabulary::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  mix(variant_);
  for (int i = 0; i < static_cast<int>(units_.size()); ++i) {
    if (is_merged(i)) {
      mix(parts(i).first + "+" + parts(i).second);
    } else {
      mix(units_[static_cast<std::size_t>(i)]);
    }
  }
  return h;
}

Vocabulary build_vocab(const PhonemeInventory& inv, std::span<const Bigram> bigrams,
                       std::string variant) {
  Vocabulary v;
  v.variant_ = std::move(variant);
  for (auto name : Vocabulary::kSpecialNames) v.add_unit(std::string(name));
  for (const auto& p : inv.phonemes()) {
    v.atom_index_.emplace(p.symbol, static_cast<int>(v.units_.size()));
    v.add_unit(p.symbol);
  }
  v.atoms_ = inv.size();
  for (const auto& [a, b] : bigrams) {
    if (!inv.contains(a) || !inv.contains(b)) {
      throw Error(ErrorKind::UnknownPhoneme,
                  "bigram (" + a + ", " + b + ") has a member outside the inventory");
    }
    const int idx = static_cast<int>(v.units_.size());
    if (!v.merge_index_.emplace(Bigram{a, b}, idx).second) {
      throw Error(ErrorKind::ParseError, "duplicate bigram (" + a + ", " + b + ")");
    }
    v.merges_.emplace(idx, Bigram{a, b});
    v.add_unit(a + b);
  }
  return v;
}

Vocabulary build_variant(std::span<const PhonemeSequence> corpus, const PhonemeInventory& inv,
                         const Variant& variant, bool* short_list) {
  std::vector<Bigram> bigrams;
  bool is_short = false;
  if (variant.n > 0) {
    auto top = top_n(count_bigrams(corpus, variant.scope, inv), variant.n);
    bigrams = std::move(top.bigrams);
    is_short = top.short_list;
  }
  if (short_list) *short_list = is_short;
  return build_vocab(inv, bigrams, variant.label());
}

std::string Vocabulary::to_text() const {
  std::string out = "#variant=" + variant_ + " n=" + std::to_string(merges_.size()) +
                    " inventory=" + std::to_string(atoms_) + "\n";
  for (int i = 0; i < static_cast<int>(units_.size()); ++i) {
    if (is_merged(i)) {
      out += parts(i).first + "+" + parts(i).second;
    } else {
      out += units_[static_cast<std::size_t>(i)];
    }
    out += '\n';
  }
  return out;
}

namespace {

std::size_t header_int(const std::string& header, const std::string& key) {
  const auto pos = header.find(" " + key + "=");
  if (pos == std::string::npos) {
    throw Error(ErrorKind::ParseError, "vocabulary header lacks " + key, 1);
  }
  const char* begin = header.data() + pos + key.size() + 2;
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(begin, header.data() + header.size(), value);
  if (ec != std::errc()) throw Error(ErrorKind::ParseError, "bad " + key + " in header", 1);
  return value;
}

}  // namespace

Vocabulary Vocabulary::parse(std::string_view text) {
  auto lines = utf8::split_fields(text, '\n');
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty() || lines[0].rfind("#variant=", 0) != 0) {
    throw Error(ErrorKind::ParseError, "vocabulary file must start with #variant=", 1);
  }
  const std::string& header = lines[0];
  const auto space = header.find(' ');
  const std::string variant = header.substr(9, space == std::string::npos ? std::string::npos
                                                                           : space - 9);
  const std::size_t n = header_int(header, "n");
  const std::size_t inventory = header_int(header, "inventory");
  if (lines.size() - 1 != kNumSpecials + inventory + n) {
    throw Error(ErrorKind::ParseError,
                "vocabulary body has " + std::to_string(lines.size() - 1) + " units, header implies " +
                    std::to_string(kNumSpecials + inventory + n));
  }
  for (std::size_t i = 0; i < kNumSpecials; ++i) {
    if (lines[1 + i] != kSpecialNames[i]) {
      throw Error(ErrorKind::ParseError, "expected special unit " + std::string(kSpecialNames[i]),
                  2 + i);
    }
  }
  std::vector<Phoneme> phonemes;
  for (std::size_t i = 0; i < inventory; ++i) {
    // Classes are not stored in the file; they are not needed after building.
    phonemes.push_back({lines[1 + kNumSpecials + i], PhonemeClass::Consonant});
  }
  std::vector<Bigram> bigrams;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t line = 1 + kNumSpecials + inventory + i;
    const auto& unit = lines[line];
    const auto plus = unit.find('+');
    if (plus == std::string::npos || plus == 0 || plus + 1 == unit.size()) {
      throw Error(ErrorKind::ParseError, "merged unit must be first+second", line + 1);
    }
    bigrams.emplace_back(unit.substr(0, plus), unit.substr(plus + 1));
  }
  return build_vocab(PhonemeInventory(std::move(phonemes)), bigrams, variant);
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << to_text();
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::vector<int> tokenize(const PhonemeSequence& seq, const Vocabulary& v) {
  std::vector<int> ids;
  ids.reserve(seq.size());
  std::size_t flat_pos = 0;
  for (const auto& word : seq.words) {
    std::size_t i = 0;
    while (i < word.size()) {
      const int atom = v.atom_index(word[i]);
      if (atom < 0) {
        throw Error(ErrorKind::UnknownPhoneme,
                    "phoneme '" + word[i] + "' at position " + std::to_string(flat_pos + i) +
                        " not in vocabulary " + v.variant(),
                    flat_pos + i);
      }
      if (i + 1 < word.size()) {
        const int merged = v.merge_index(word[i], word[i + 1]);
        if (merged >= 0) {
          ids.push_back(merged);
          i += 2;
          continue;
        }
      }
      ids.push_back(atom);
      ++i;
    }
    flat_pos += word.size();
  }
  return ids;
}

PhonemeSequence detokenize(std::span<const int> ids, const Vocabulary& v) {
  std::vector<std::string> atoms;
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= v.size()) {
      throw Error(ErrorKind::IndexOutOfRange, "unit index " + std::to_string(id) +
                                                  " outside vocabulary of " +
                                                  std::to_string(v.size()));
    }
    if (v.is_special(id)) continue;
    if (v.is_merged(id)) {
      const auto& [a, b] = v.parts(id);
      atoms.push_back(a);
      atoms.push_back(b);
    } else {
      atoms.push_back(v.unit(id));
    }
  }
  return PhonemeSequence::from_flat(std::move(atoms));
}

}  // namespace phonrec
