#include "phonrec/analysis.hpp"

#include <json.hpp>

#include "phonrec/error.hpp"

namespace phonrec {

const char* to_string(EditOp op) {
  switch (op) {
    case EditOp::Match: return "match";
    case EditOp::Substitute: return "substitute";
    case EditOp::Delete: return "delete";
    case EditOp::Insert: return "insert";
  }
  return "";
}

std::vector<Dropout> detect_dropouts(const Alignment& a, const Sentence& ref) {
  std::vector<Dropout> out;
  for (const auto& s : a.script) {
    if (s.op != EditOp::Delete) continue;
    const auto pos = static_cast<std::size_t>(s.ref_pos);
    Dropout d;
    d.ref_pos = pos;
    d.token = ref[pos];
    d.left_context.assign(ref.begin() + static_cast<std::ptrdiff_t>(pos >= 2 ? pos - 2 : 0),
                          ref.begin() + static_cast<std::ptrdiff_t>(pos));
    d.right_context.assign(ref.begin() + static_cast<std::ptrdiff_t>(pos + 1),
                           ref.begin() + static_cast<std::ptrdiff_t>(std::min(pos + 3, ref.size())));
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<Substitution> detect_substitutions(const Alignment& a, const Sentence& ref,
                                               const Sentence& hyp, const ClassTable& classes) {
  auto class_of = [&](const std::string& tok) -> std::optional<PhonemeClass> {
    try {
      return classes.lookup(base_of(tok));
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  std::vector<Substitution> out;
  for (const auto& s : a.script) {
    if (s.op != EditOp::Substitute) continue;
    Substitution sub;
    sub.ref_pos = static_cast<std::size_t>(s.ref_pos);
    sub.hyp_pos = static_cast<std::size_t>(s.hyp_pos);
    sub.ref_token = ref[sub.ref_pos];
    sub.hyp_token = hyp[sub.hyp_pos];
    const auto rc = class_of(sub.ref_token);
    const auto hc = class_of(sub.hyp_token);
    sub.same_class = rc && hc && *rc == *hc;
    out.push_back(std::move(sub));
  }
  return out;
}

std::size_t ErrorReport::repetition_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.repetitions.size();
  return n;
}

std::size_t ErrorReport::dropout_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.dropouts.size();
  return n;
}

std::size_t ErrorReport::substitution_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.substitutions.size();
  return n;
}

std::size_t ErrorReport::same_class_substitution_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) {
    for (const auto& sub : s.substitutions) n += sub.same_class;
  }
  return n;
}

std::string ErrorReport::to_json() const {
  using nlohmann::ordered_json;
  ordered_json j;
  j["summary"] = {{"sentences", sentences.size()},
                  {"repetitions", repetition_count()},
                  {"dropouts", dropout_count()},
                  {"substitutions", substitution_count()},
                  {"same_class_substitutions", same_class_substitution_count()}};
  ordered_json list = ordered_json::array();
  for (const auto& s : sentences) {
    ordered_json e;
    e["sentence"] = s.sentence;
    e["id"] = s.id;
    e["distance"] = s.distance;
    e["repetitions"] = ordered_json::array();
    for (const auto& r : s.repetitions) {
      e["repetitions"].push_back(
          {{"start", r.start}, {"end", r.end}, {"period", r.period}, {"copies", r.copies}});
    }
    e["dropouts"] = ordered_json::array();
    for (const auto& d : s.dropouts) {
      e["dropouts"].push_back({{"ref_pos", d.ref_pos},
                               {"token", d.token},
                               {"left", d.left_context},
                               {"right", d.right_context}});
    }
    e["substitutions"] = ordered_json::array();
    for (const auto& sub : s.substitutions) {
      e["substitutions"].push_back({{"ref_pos", sub.ref_pos},
                                    {"hyp_pos", sub.hyp_pos},
                                    {"ref", sub.ref_token},
                                    {"hyp", sub.hyp_token},
                                    {"same_class", sub.same_class}});
    }
    list.push_back(std::move(e));
  }
  j["sentences"] = std::move(list);
  return j.dump(2);
}

ErrorReport analyze_errors(std::span<const Sentence> refs, std::span<const Sentence> hyps,
                           const ClassTable& classes, std::span<const std::string> ids,
                           RepetitionOptions options) {
  if (refs.size() != hyps.size()) {
    throw Error(ErrorKind::LengthMismatch, "reference and hypothesis corpora differ in size");
  }
  ErrorReport report;
  for (std::size_t k = 0; k < refs.size(); ++k) {
    const auto a = align(refs[k], hyps[k]);
    SentenceErrors s;
    s.sentence = k;
    if (k < ids.size()) s.id = ids[k];
    s.distance = a.distance;
    s.repetitions = detect_repetitions(std::span<const std::string>(hyps[k]), options.min_period,
                                       options.min_copies);
    s.dropouts = detect_dropouts(a, refs[k]);
    s.substitutions = detect_substitutions(a, refs[k], hyps[k], classes);
    report.sentences.push_back(std::move(s));
  }
  return report;
}

bool report_consistent(const ErrorReport& report, std::span<const Sentence> refs,
                       std::span<const Sentence> hyps) {
  for (const auto& s : report.sentences) {
    if (s.sentence >= refs.size()) return false;
    const auto& ref = refs[s.sentence];
    const auto& hyp = hyps[s.sentence];
    const auto a = align(ref, hyp);
    if (a.distance != s.distance) return false;
    if (!replay(a, std::span<const std::string>(ref), std::span<const std::string>(hyp))) {
      return false;
    }
    for (const auto& d : s.dropouts) {
      const bool found = std::any_of(a.script.begin(), a.script.end(), [&](const EditStep& e) {
        return e.op == EditOp::Delete && e.ref_pos == static_cast<std::ptrdiff_t>(d.ref_pos);
      });
      if (!found || ref[d.ref_pos] != d.token) return false;
    }
    for (const auto& sub : s.substitutions) {
      const EditStep want{EditOp::Substitute, static_cast<std::ptrdiff_t>(sub.ref_pos),
                          static_cast<std::ptrdiff_t>(sub.hyp_pos)};
      if (std::find(a.script.begin(), a.script.end(), want) == a.script.end()) return false;
      if (ref[sub.ref_pos] != sub.ref_token || hyp[sub.hyp_pos] != sub.hyp_token) return false;
    }
    for (const auto& r : s.repetitions) {
      if (r.end > hyp.size() || r.end - r.start != r.period * r.copies) return false;
      for (std::size_t k = r.start + r.period; k < r.end; ++k) {
        if (hyp[k] != hyp[k - r.period]) return false;
      }
    }
  }
  return true;
}

std::vector<ArticleForm> german_article_forms(const RuleTable& rules, const ClassTable& classes) {
  std::vector<ArticleForm> forms;
  for (const char* word : {"der", "des", "dem", "den", "die", "das"}) {
    forms.push_back({word, transliterate(word, rules, classes).flat()});
  }
  return forms;
}

Sentence aligned_span(const Alignment& a, const Sentence& hyp, std::size_t begin,
                      std::size_t end) {
  std::optional<std::size_t> first;
  std::optional<std::size_t> last;
  for (std::size_t k = 0; k < a.script.size(); ++k) {
    const auto& s = a.script[k];
    if (s.op == EditOp::Insert) continue;
    const auto r = static_cast<std::size_t>(s.ref_pos);
    if (r >= begin && r < end) {
      if (!first) first = k;
      last = k;
    }
  }
  Sentence out;
  if (!first) return out;
  for (std::size_t k = *first; k <= *last; ++k) {
    const auto& s = a.script[k];
    if (s.op != EditOp::Delete) out.push_back(hyp[static_cast<std::size_t>(s.hyp_pos)]);
  }
  return out;
}

ArticleReport article_accuracy(std::span<const PhonemeSequence> refs,
                               std::span<const Sentence> hyps,
                               std::span<const ArticleForm> forms) {
  if (refs.size() != hyps.size()) {
    throw Error(ErrorKind::LengthMismatch, "reference and hypothesis corpora differ in size");
  }
  ArticleReport report;
  for (const auto& f : forms) report.articles.push_back({f.article, f.phonemes, 0, 0, {}});

  for (std::size_t k = 0; k < refs.size(); ++k) {
    const Sentence ref = refs[k].flat();
    std::optional<Alignment> a;
    std::size_t offset = 0;
    for (const auto& word : refs[k].words) {
      for (auto& stat : report.articles) {
        if (word != stat.form) continue;
        if (!a) a = align(ref, hyps[k]);
        ++stat.occurrences;
        stat.hits += aligned_span(*a, hyps[k], offset, offset + word.size()) == stat.form;
      }
      offset += word.size();
    }
  }

  std::size_t included = 0;
  std::size_t hits = 0;
  std::size_t occurrences = 0;
  double sum = 0.0;
  for (auto& stat : report.articles) {
    if (stat.occurrences == 0) {
      report.absent.push_back(stat.article);
      continue;
    }
    stat.accuracy = static_cast<double>(stat.hits) / static_cast<double>(stat.occurrences);
    sum += *stat.accuracy;
    ++included;
    hits += stat.hits;
    occurrences += stat.occurrences;
  }
  report.average = included ? sum / static_cast<double>(included) : 0.0;
  report.weighted_average =
      occurrences ? static_cast<double>(hits) / static_cast<double>(occurrences) : 0.0;
  return report;
}

ArticleReport article_accuracy(std::span<const PhonemeSequence> refs,
                               std::span<const Sentence> hyps, const RuleTable& rules,
                               const ClassTable& classes) {
  const auto forms = german_article_forms(rules, classes);
  return article_accuracy(refs, hyps, forms);
}

std::string ArticleReport::to_json() const {
  using nlohmann::ordered_json;
  ordered_json j;
  ordered_json list = ordered_json::array();
  for (const auto& s : articles) {
    list.push_back({{"article", s.article},
                    {"form", s.form},
                    {"hits", s.hits},
                    {"occurrences", s.occurrences},
                    {"accuracy", s.accuracy ? ordered_json(*s.accuracy) : ordered_json(nullptr)}});
  }
  j["articles"] = std::move(list);
  j["average"] = average;
  j["weighted_average"] = weighted_average;
  j["absent"] = absent;
  return j.dump(2);
}

std::string render_marked(const PhonemeSequence& ref, const Sentence& hyp) {
  const Sentence flat = ref.flat();
  const auto a = align(flat, hyp);

  std::vector<bool> word_start(flat.size(), false);
  std::size_t offset = 0;
  for (const auto& w : ref.words) {
    if (offset < flat.size()) word_start[offset] = true;
    offset += w.size();
  }

  std::vector<bool> matched(hyp.size(), false);
  std::vector<bool> space_before(hyp.size(), false);
  // a word start swallowed by a deletion moves to the next emitted token
  bool pending = false;
  for (const auto& s : a.script) {
    if (s.op != EditOp::Insert) pending = pending || word_start[static_cast<std::size_t>(s.ref_pos)];
    if (s.op == EditOp::Delete) continue;
    const auto j = static_cast<std::size_t>(s.hyp_pos);
    matched[j] = s.op == EditOp::Match;
    space_before[j] = j > 0 && pending;
    pending = false;
  }

  std::string out;
  bool bold = false;
  for (std::size_t j = 0; j < hyp.size(); ++j) {
    if (bold && !matched[j]) {
      out += "**";
      bold = false;
    }
    if (space_before[j]) out += ' ';
    if (!bold && matched[j]) {
      out += "**";
      bold = true;
    }
    out += hyp[j];
  }
  if (bold) out += "**";
  return out;
}

}  // namespace phonrec
