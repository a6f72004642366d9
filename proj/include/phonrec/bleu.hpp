#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace phonrec {

using Sentence = std::vector<std::string>;

struct NgramPrecision {
  std::size_t clipped_matches = 0;
  std::size_t total = 0;
};

/// Corpus-level modified n-gram precision: hypothesis n-gram counts clipped
/// by the reference counts of the same sentence, summed over the corpus.
NgramPrecision modified_precision(std::span<const Sentence> hyps, std::span<const Sentence> refs,
                                  std::size_t n);

struct BleuReport {
  double bleu = 0.0;      // 0..100
  double bleu_raw = 0.0;  // 0..1
  std::array<double, 4> precisions{};
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;
  double brevity_penalty = 1.0;
  std::string variant;
  std::optional<int> epoch;

  std::string to_json() const;
};

/// Uniform 0.25 weights over 1..4-gram precisions, brevity penalty
/// exp(1 - r/c) when c <= r, no smoothing (any zero precision gives 0).
/// Throws Error(EmptyCorpus) or Error(LengthMismatch).
BleuReport corpus_bleu(std::span<const Sentence> hyps, std::span<const Sentence> refs);

}  // namespace phonrec
