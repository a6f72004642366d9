#include "phonrec/bleu.hpp"

#include <cmath>
#include <map>

#include <json.hpp>

#include "phonrec/error.hpp"

namespace phonrec {

namespace {

using NgramCounts = std::map<std::span<const std::string>, std::size_t,
                             bool (*)(std::span<const std::string>, std::span<const std::string>)>;

bool span_less(std::span<const std::string> a, std::span<const std::string> b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

NgramCounts count_ngrams(const Sentence& s, std::size_t n) {
  NgramCounts counts(span_less);
  if (s.size() < n) return counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i) {
    ++counts[std::span<const std::string>(s).subspan(i, n)];
  }
  return counts;
}

}  // namespace

NgramPrecision modified_precision(std::span<const Sentence> hyps, std::span<const Sentence> refs,
                                  std::size_t n) {
  if (hyps.size() != refs.size()) {
    throw Error(ErrorKind::LengthMismatch, "hypothesis and reference corpora differ in size");
  }
  NgramPrecision p;
  for (std::size_t k = 0; k < hyps.size(); ++k) {
    const auto hyp_counts = count_ngrams(hyps[k], n);
    const auto ref_counts = count_ngrams(refs[k], n);
    for (const auto& [gram, count] : hyp_counts) {
      const auto it = ref_counts.find(gram);
      p.clipped_matches += it == ref_counts.end() ? 0 : std::min(count, it->second);
      p.total += count;
    }
  }
  return p;
}

BleuReport corpus_bleu(std::span<const Sentence> hyps, std::span<const Sentence> refs) {
  if (hyps.empty()) throw Error(ErrorKind::EmptyCorpus, "corpus_bleu needs at least one sentence");
  if (hyps.size() != refs.size()) {
    throw Error(ErrorKind::LengthMismatch, "hypothesis and reference corpora differ in size");
  }
  BleuReport r;
  for (std::size_t k = 0; k < hyps.size(); ++k) {
    r.hyp_length += hyps[k].size();
    r.ref_length += refs[k].size();
  }
  bool any_zero = false;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto p = modified_precision(hyps, refs, n);
    r.matches[n - 1] = p.clipped_matches;
    r.totals[n - 1] = p.total;
    r.precisions[n - 1] =
        p.total == 0 ? 0.0 : static_cast<double>(p.clipped_matches) / static_cast<double>(p.total);
    if (p.clipped_matches == 0) {
      any_zero = true;
    } else {
      log_sum += 0.25 * std::log(r.precisions[n - 1]);
    }
  }
  if (r.hyp_length == 0) {
    r.brevity_penalty = 0.0;
  } else if (r.hyp_length > r.ref_length) {
    r.brevity_penalty = 1.0;
  } else {
    r.brevity_penalty =
        std::exp(1.0 - static_cast<double>(r.ref_length) / static_cast<double>(r.hyp_length));
  }
  r.bleu_raw = any_zero ? 0.0 : r.brevity_penalty * std::exp(log_sum);
  r.bleu = 100.0 * r.bleu_raw;
  return r;
}

std::string BleuReport::to_json() const {
  nlohmann::ordered_json j;
  j["bleu"] = bleu;
  j["bleu_raw"] = bleu_raw;
  for (std::size_t n = 0; n < 4; ++n) j["p" + std::to_string(n + 1)] = precisions[n];
  j["matches"] = matches;
  j["totals"] = totals;
  j["c"] = hyp_length;
  j["r"] = ref_length;
  j["bp"] = brevity_penalty;
  j["variant"] = variant;
  j["epoch"] = epoch ? nlohmann::ordered_json(*epoch) : nlohmann::ordered_json(nullptr);
  return j.dump(2);
}

}  // namespace phonrec
