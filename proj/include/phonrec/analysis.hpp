#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "phonrec/bleu.hpp"
#include "phonrec/g2p.hpp"
#include "phonrec/ipa.hpp"

namespace phonrec {

enum class EditOp { Match, Substitute, Delete, Insert };

const char* to_string(EditOp op);

struct EditStep {
  EditOp op;
  std::ptrdiff_t ref_pos;  // -1 for Insert
  std::ptrdiff_t hyp_pos;  // -1 for Delete

  bool operator==(const EditStep&) const = default;
};

/// Minimal unit-cost edit script turning ref into hyp.
struct Alignment {
  std::vector<EditStep> script;
  std::size_t distance = 0;
};

/// Levenshtein distance with a single rolling row.
template <typename T>
std::size_t edit_distance(std::span<const T> ref, std::span<const T> hyp) {
  thread_local std::vector<std::size_t> row;
  row.resize(hyp.size() + 1);
  for (std::size_t j = 0; j <= hyp.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      const std::size_t up = row[j];
      const std::size_t sub = diag + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      row[j] = std::min({sub, up + 1, row[j - 1] + 1});
      diag = up;
    }
  }
  return row[hyp.size()];
}

/// Full DP table over suffixes, then a forward walk. When several minimal
/// scripts exist the walk prefers Match, then Substitute, then Delete, then
/// Insert at each step, so edits land as late as possible: "als si:" vs
/// "als i:" drops the s of "si:", not the one of "als".
template <typename T>
Alignment align(std::span<const T> ref, std::span<const T> hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, m) = n - i;
  for (std::size_t j = 0; j <= m; ++j) at(n, j) = m - j;
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = m; j-- > 0;) {
      at(i, j) = std::min({at(i + 1, j + 1) + (ref[i] == hyp[j] ? 0 : 1), at(i + 1, j) + 1,
                           at(i, j + 1) + 1});
    }
  }

  Alignment a;
  a.distance = at(0, 0);
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < n || j < m) {
    const auto ii = static_cast<std::ptrdiff_t>(i);
    const auto jj = static_cast<std::ptrdiff_t>(j);
    if (i < n && j < m && ref[i] == hyp[j] && at(i, j) == at(i + 1, j + 1)) {
      a.script.push_back({EditOp::Match, ii, jj});
      ++i, ++j;
    } else if (i < n && j < m && at(i, j) == at(i + 1, j + 1) + 1) {
      a.script.push_back({EditOp::Substitute, ii, jj});
      ++i, ++j;
    } else if (i < n && at(i, j) == at(i + 1, j) + 1) {
      a.script.push_back({EditOp::Delete, ii, -1});
      ++i;
    } else {
      a.script.push_back({EditOp::Insert, -1, jj});
      ++j;
    }
  }
  return a;
}

inline Alignment align(const Sentence& ref, const Sentence& hyp) {
  return align(std::span<const std::string>(ref), std::span<const std::string>(hyp));
}

/// Applies the script to ref, taking inserted and substituted tokens from
/// hyp. Returns nullopt if the script is inconsistent with ref.
template <typename T>
std::optional<std::vector<T>> replay(const Alignment& a, std::span<const T> ref,
                                     std::span<const T> hyp) {
  std::vector<T> out;
  std::ptrdiff_t next_ref = 0;
  std::size_t cost = 0;
  for (const auto& s : a.script) {
    if (s.op != EditOp::Insert) {
      if (s.ref_pos != next_ref || s.ref_pos >= static_cast<std::ptrdiff_t>(ref.size())) {
        return std::nullopt;
      }
      ++next_ref;
    }
    switch (s.op) {
      case EditOp::Match:
        if (!(ref[s.ref_pos] == hyp[s.hyp_pos])) return std::nullopt;
        out.push_back(ref[s.ref_pos]);
        break;
      case EditOp::Substitute:
        if (ref[s.ref_pos] == hyp[s.hyp_pos]) return std::nullopt;
        out.push_back(hyp[s.hyp_pos]);
        ++cost;
        break;
      case EditOp::Insert:
        out.push_back(hyp[s.hyp_pos]);
        ++cost;
        break;
      case EditOp::Delete:
        ++cost;
        break;
    }
  }
  if (next_ref != static_cast<std::ptrdiff_t>(ref.size()) || cost != a.distance) {
    return std::nullopt;
  }
  return out;
}

struct Repetition {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  std::size_t period = 0;
  std::size_t copies = 0;

  bool operator==(const Repetition&) const = default;
};

namespace detail {

template <typename T>
bool is_primitive(std::span<const T> unit) {
  for (std::size_t p = 1; p < unit.size(); ++p) {
    if (unit.size() % p != 0) continue;
    bool periodic = true;
    for (std::size_t k = p; k < unit.size() && periodic; ++k) periodic = unit[k] == unit[k - p];
    if (periodic) return false;
  }
  return true;
}

}  // namespace detail

/// Tandem repeats: a primitive unit of at least `min_period` tokens repeated
/// at least `min_copies` times back to back. Scans left to right; at each
/// start the repeat covering the most tokens wins (ties to the shorter
/// period) and the scan resumes after it, so entries never overlap.
template <typename T>
std::vector<Repetition> detect_repetitions(std::span<const T> seq, std::size_t min_period = 3,
                                           std::size_t min_copies = 2) {
  std::vector<Repetition> out;
  if (min_copies < 2) min_copies = 2;
  if (min_period < 1) min_period = 1;
  const std::size_t n = seq.size();
  std::size_t i = 0;
  while (i < n) {
    Repetition best;
    for (std::size_t p = min_period; i + p * min_copies <= n; ++p) {
      std::size_t copies = 1;
      while (i + (copies + 1) * p <= n &&
             std::equal(seq.begin() + i, seq.begin() + i + p, seq.begin() + i + copies * p)) {
        ++copies;
      }
      if (copies < min_copies || copies * p <= best.copies * best.period) continue;
      if (!detail::is_primitive(seq.subspan(i, p))) continue;
      best = {i, i + copies * p, p, copies};
    }
    if (best.copies > 0) {
      out.push_back(best);
      i = best.end;
    } else {
      ++i;
    }
  }
  return out;
}

struct Dropout {
  std::size_t ref_pos = 0;
  std::string token;
  Sentence left_context;   // up to two reference tokens before
  Sentence right_context;  // up to two reference tokens after
};

std::vector<Dropout> detect_dropouts(const Alignment& a, const Sentence& ref);

struct Substitution {
  std::size_t ref_pos = 0;
  std::size_t hyp_pos = 0;
  std::string ref_token;
  std::string hyp_token;
  bool same_class = false;
};

std::vector<Substitution> detect_substitutions(const Alignment& a, const Sentence& ref,
                                               const Sentence& hyp, const ClassTable& classes);

struct SentenceErrors {
  std::size_t sentence = 0;
  std::string id;
  std::size_t distance = 0;
  std::vector<Repetition> repetitions;
  std::vector<Dropout> dropouts;
  std::vector<Substitution> substitutions;
};

struct ErrorReport {
  std::vector<SentenceErrors> sentences;

  std::size_t repetition_count() const;
  std::size_t dropout_count() const;
  std::size_t substitution_count() const;
  std::size_t same_class_substitution_count() const;
  std::string to_json() const;
};

struct RepetitionOptions {
  std::size_t min_period = 3;
  std::size_t min_copies = 2;
};

ErrorReport analyze_errors(std::span<const Sentence> refs, std::span<const Sentence> hyps,
                           const ClassTable& classes, std::span<const std::string> ids = {},
                           RepetitionOptions options = {});

// Checks every entry against a fresh alignment of its sentence pair.
bool report_consistent(const ErrorReport& report, std::span<const Sentence> refs,
                       std::span<const Sentence> hyps);

struct ArticleForm {
  std::string article;  // orthographic form, e.g. "dem"
  Sentence phonemes;
};

std::vector<ArticleForm> german_article_forms(const RuleTable& rules, const ClassTable& classes);

struct ArticleStat {
  std::string article;
  Sentence form;
  std::size_t hits = 0;
  std::size_t occurrences = 0;
  std::optional<double> accuracy;  // unset when the article never occurs
};

struct ArticleReport {
  std::vector<ArticleStat> articles;
  double average = 0.0;           // unweighted over articles that occur
  double weighted_average = 0.0;  // total hits / total occurrences
  std::vector<std::string> absent;

  std::string to_json() const;
};

/// For each reference word equal to an article form, projects its token
/// span through the alignment and counts a hit when the hypothesis span
/// equals the form exactly. Hypotheses are flat token lists.
ArticleReport article_accuracy(std::span<const PhonemeSequence> refs,
                               std::span<const Sentence> hyps,
                               std::span<const ArticleForm> forms);

ArticleReport article_accuracy(std::span<const PhonemeSequence> refs,
                               std::span<const Sentence> hyps, const RuleTable& rules,
                               const ClassTable& classes);

/// Hypothesis tokens aligned to reference span [begin, end), including
/// insertions strictly inside the span.
Sentence aligned_span(const Alignment& a, const Sentence& hyp, std::size_t begin,
                      std::size_t end);

/// Renders a hypothesis with reference-matching runs in `**bold**` and word
/// boundaries projected from the reference through the alignment.
std::string render_marked(const PhonemeSequence& ref, const Sentence& hyp);

}  // namespace phonrec
