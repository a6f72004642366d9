#pragma once

// Independent reference implementations used only by the tests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace oracle {

using Tokens = std::vector<std::string>;

struct Bleu {
  double score = 0.0;  // 0..100
  double bp = 0.0;
  double p[4] = {0, 0, 0, 0};
};

// Enumerates every n-gram into a multiset and clips by hand.
inline Bleu bleu(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs) {
  double num[4] = {0, 0, 0, 0};
  double den[4] = {0, 0, 0, 0};
  double c = 0;
  double r = 0;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    c += static_cast<double>(hyps[s].size());
    r += static_cast<double>(refs[s].size());
    for (std::size_t n = 1; n <= 4; ++n) {
      std::map<Tokens, int> h;
      std::map<Tokens, int> g;
      for (std::size_t i = 0; i + n <= hyps[s].size(); ++i) {
        ++h[Tokens(hyps[s].begin() + i, hyps[s].begin() + i + n)];
      }
      for (std::size_t i = 0; i + n <= refs[s].size(); ++i) {
        ++g[Tokens(refs[s].begin() + i, refs[s].begin() + i + n)];
      }
      for (const auto& [gram, count] : h) {
        den[n - 1] += count;
        const auto it = g.find(gram);
        if (it != g.end()) num[n - 1] += std::min(count, it->second);
      }
    }
  }
  Bleu out;
  out.bp = c == 0 ? 0.0 : (c > r ? 1.0 : std::exp(1.0 - r / c));
  double log_sum = 0;
  for (int n = 0; n < 4; ++n) {
    out.p[n] = den[n] > 0 ? num[n] / den[n] : 0.0;
    if (out.p[n] <= 0) return out;
    log_sum += 0.25 * std::log(out.p[n]);
  }
  out.score = 100.0 * out.bp * std::exp(log_sum);
  return out;
}

// Textbook Levenshtein recursion with memoization.
template <typename Seq>
std::size_t levenshtein(const Seq& a, const Seq& b) {
  std::vector<std::vector<long>> memo(a.size() + 1, std::vector<long>(b.size() + 1, -1));
  auto rec = [&](auto&& self, std::size_t i, std::size_t j) -> long {
    if (i == 0) return static_cast<long>(j);
    if (j == 0) return static_cast<long>(i);
    long& m = memo[i][j];
    if (m >= 0) return m;
    m = std::min({self(self, i - 1, j) + 1, self(self, i, j - 1) + 1,
                  self(self, i - 1, j - 1) + (a[i - 1] == b[j - 1] ? 0 : 1)});
    return m;
  };
  return static_cast<std::size_t>(rec(rec, a.size(), b.size()));
}

// True when seq[i, i + p * k) is k back-to-back copies of seq[i, i + p).
template <typename Seq>
bool is_tandem(const Seq& seq, std::size_t i, std::size_t p, std::size_t k) {
  if (i + p * k > seq.size()) return false;
  for (std::size_t j = i + p; j < i + p * k; ++j) {
    if (seq[j] != seq[j - p]) return false;
  }
  return true;
}

}  // namespace oracle
