#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "phonrec/g2p.hpp"
#include "phonrec/ipa.hpp"

namespace phonrec {

enum class Split { Unassigned, Train, Valid, Test };

const char* to_string(Split split);
Split parse_split(std::string_view text);

struct Utterance {
  std::string id;
  std::string text;
  PhonemeSequence phonemes;
  Split split = Split::Unassigned;
  std::string feature_path;  // opaque, empty when absent
};

struct SplitSizes {
  std::size_t train = 6425;
  std::size_t valid = 500;
  std::size_t test = 500;

  std::size_t total() const { return train + valid + test; }
  static SplitSizes parse(std::string_view text);  // "6425,500,500"
};

struct CorpusManifest {
  std::vector<Utterance> utterances;
  std::optional<std::uint64_t> seed;
  std::size_t removed_by_filter = 0;

  std::size_t size() const { return utterances.size(); }
  std::size_t count(Split split) const;
  std::vector<const Utterance*> select(Split split) const;
};

/// Manifest TSV: `id\ttext\tphonemes\tsplit[\tfeature_path]`, `#` lines are
/// comments. Phonemes use PhonemeSequence::to_tokens form.
CorpusManifest parse_manifest(std::string_view text);
CorpusManifest ingest(const std::filesystem::path& path);

std::string format_manifest(const CorpusManifest& m,
                            const std::vector<std::string>& header_comments = {});
void write_manifest(const std::filesystem::path& path, const CorpusManifest& m,
                    const std::vector<std::string>& header_comments = {});

// Keeps utterances whose text is at most `max_chars` code points long.
CorpusManifest filter_by_length(const CorpusManifest& m, std::size_t max_chars = 200);

CorpusManifest augment(const CorpusManifest& m, const RuleTable& rules,
                       const ClassTable& classes);

/// Seeded Fisher-Yates over the manifest, then contiguous train/valid/test
/// cut. Utterance order in the returned manifest is unchanged.
CorpusManifest split(const CorpusManifest& m, const SplitSizes& sizes, std::uint64_t seed);

}  // namespace phonrec
