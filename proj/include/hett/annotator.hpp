#pragma once

// Landmark-reference lint for instruction annotations. Four finding classes,
// checked in precedence order: Deletion, Missing, Major, Minor.

#include <algorithm>
#include <array>
#include <cctype>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hett/geom.hpp"
#include "hett/rng.hpp"
#include "hett/world.hpp"

namespace hett::annot {

struct AnnotationRecord {
  std::string id;
  std::string instruction_text;
  std::vector<std::string> annotated_landmarks;
  std::string map_id;
  std::optional<geom::Point2> target;
  std::string split;  // optional, used for the per-split breakdown
  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

enum class FindingClass { Missing, Minor, Major, Deletion };
inline constexpr std::array<FindingClass, 4> kFindingClasses = {FindingClass::Missing, FindingClass::Minor,
                                                                FindingClass::Major, FindingClass::Deletion};

inline const char* class_name(FindingClass c) {
  switch (c) {
    case FindingClass::Missing: return "Missing";
    case FindingClass::Minor: return "Minor";
    case FindingClass::Major: return "Major";
    case FindingClass::Deletion: return "Deletion";
  }
  return "?";
}

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::size_t levenshtein(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// ceil(len / 5) edits allowed against a dictionary name.
inline std::size_t fuzzy_threshold(const std::string& name) { return (name.size() + 4) / 5; }

struct Mention {
  std::size_t begin = 0;  // byte offsets into the text
  std::size_t end = 0;
  std::string span;  // text as written
  std::string name;  // dictionary name
  std::size_t distance = 0;
  friend bool operator==(const Mention&, const Mention&) = default;
};

namespace detail {
struct Word {
  std::size_t begin, end;
};

inline std::vector<Word> words(const std::string& text) {
  std::vector<Word> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !std::isalnum(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= text.size()) break;
    std::size_t j = i;
    while (j < text.size() && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '\'')) ++j;
    out.push_back({i, j});
    i = j;
  }
  return out;
}

inline std::size_t word_count(const std::string& s) { return words(s).size(); }

inline std::string normalized_span(const std::string& text, const std::vector<Word>& w, std::size_t first, std::size_t n) {
  std::string s;
  for (std::size_t k = first; k < first + n; ++k) s += (s.empty() ? "" : " ") + lower(text.substr(w[k].begin, w[k].end - w[k].begin));
  return s;
}
}  // namespace detail

// Case-insensitive scan over word spans. A span of a name's word count
// matches when within the fuzzy threshold; overlaps keep the longest span,
// then the smaller distance, then the earlier position.
inline std::vector<Mention> extract_landmark_mentions(const std::string& text, const std::vector<std::string>& dictionary) {
  const auto w = detail::words(text);
  struct Candidate {
    std::size_t first, count;
    Mention m;
  };
  std::vector<Candidate> cands;
  for (const auto& name : dictionary) {
    const std::string key = lower(name);
    const std::size_t n = detail::word_count(key);
    if (n == 0 || n > w.size()) continue;
    const std::size_t limit = fuzzy_threshold(key);
    for (std::size_t i = 0; i + n <= w.size(); ++i) {
      const std::string span = detail::normalized_span(text, w, i, n);
      const std::size_t d = levenshtein(span, key);
      if (d > limit) continue;
      Mention m{w[i].begin, w[i + n - 1].end, text.substr(w[i].begin, w[i + n - 1].end - w[i].begin), name, d};
      cands.push_back({i, n, std::move(m)});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    const std::size_t la = a.m.end - a.m.begin, lb = b.m.end - b.m.begin;
    if (la != lb) return la > lb;
    if (a.m.distance != b.m.distance) return a.m.distance < b.m.distance;
    if (a.first != b.first) return a.first < b.first;
    return a.m.name < b.m.name;
  });
  std::vector<bool> taken(w.size(), false);
  std::vector<Candidate> kept;
  for (const auto& c : cands) {
    bool free = true;
    for (std::size_t k = c.first; k < c.first + c.count; ++k) free = free && !taken[k];
    if (!free) continue;
    for (std::size_t k = c.first; k < c.first + c.count; ++k) taken[k] = true;
    kept.push_back(c);
  }
  std::sort(kept.begin(), kept.end(), [](const Candidate& a, const Candidate& b) { return a.first < b.first; });
  std::vector<Mention> out;
  for (auto& c : kept) out.push_back(std::move(c.m));
  return out;
}

struct Evidence {
  std::string span;
  std::string name;
  std::size_t distance = 0;
};

struct LintFinding {
  std::string record_id;
  FindingClass cls = FindingClass::Minor;
  std::vector<Evidence> evidence;
  std::optional<std::vector<std::string>> suggested_fix;
};

// An annotation entry refers to a mention when it is within the fuzzy
// threshold of the mention's dictionary name or of its span as written.
inline bool refers_to(const std::string& entry, const Mention& m) {
  const std::string e = lower(entry);
  const std::size_t limit = fuzzy_threshold(lower(m.name));
  return levenshtein(e, lower(m.name)) <= limit || levenshtein(e, lower(m.span)) <= limit;
}

// Landmark list implied by the text: each mentioned landmark once, spelled as
// in the instruction, in order of first appearance.
inline std::vector<std::string> mention_list(const std::vector<Mention>& mentions) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& m : mentions) {
    if (seen.insert(lower(m.name)).second) out.push_back(m.span);
  }
  return out;
}

// Deletion: no mention at all. Missing: a mentioned landmark has no entry.
// Major: an entry refers to nothing in the text. Minor: every correspondence
// holds but some entry is spelled differently from its span.
inline std::optional<LintFinding> classify(const AnnotationRecord& r, const std::vector<Mention>& mentions) {
  LintFinding f;
  f.record_id = r.id;
  if (mentions.empty()) {
    f.cls = FindingClass::Deletion;
    return f;
  }
  const auto fix = mention_list(mentions);

  std::vector<Evidence> missing;
  for (const auto& m : mentions) {
    const bool annotated = std::any_of(r.annotated_landmarks.begin(), r.annotated_landmarks.end(),
                                       [&](const std::string& e) { return refers_to(e, m); });
    if (!annotated) missing.push_back({m.span, m.name, m.distance});
  }
  if (!missing.empty()) {
    f.cls = FindingClass::Missing;
    f.evidence = std::move(missing);
    f.suggested_fix = fix;
    return f;
  }

  std::vector<Evidence> phantom, typos;
  for (const auto& e : r.annotated_landmarks) {
    const Mention* best = nullptr;
    std::size_t best_d = 0;
    for (const auto& m : mentions) {
      if (!refers_to(e, m)) continue;
      const std::size_t d = levenshtein(lower(e), lower(m.span));
      if (!best || d < best_d) {
        best = &m;
        best_d = d;
      }
    }
    if (!best) {
      phantom.push_back({e, e, 0});
    } else if (best_d > 0) {
      typos.push_back({best->span, e, best_d});
    }
  }
  if (!phantom.empty()) {
    f.cls = FindingClass::Major;
    f.evidence = std::move(phantom);
    f.suggested_fix = fix;
    return f;
  }
  if (!typos.empty()) {
    f.cls = FindingClass::Minor;
    f.evidence = std::move(typos);
    f.suggested_fix = fix;
    return f;
  }
  return std::nullopt;
}

inline std::optional<LintFinding> lint_record(const AnnotationRecord& r, const std::vector<std::string>& dictionary) {
  return classify(r, extract_landmark_mentions(r.instruction_text, dictionary));
}

struct LintReport {
  std::map<FindingClass, std::size_t> counts;
  std::map<std::string, std::map<FindingClass, std::size_t>> per_split;
  std::vector<LintFinding> findings;

  std::size_t count(FindingClass c) const {
    auto it = counts.find(c);
    return it == counts.end() ? 0 : it->second;
  }

  // Rows are classes, columns are splits (sorted by name, "all" last).
  std::string table() const {
    std::vector<std::string> splits;
    for (const auto& [s, _] : per_split) splits.push_back(s.empty() ? "-" : s);
    splits.push_back("all");
    std::ostringstream o;
    o << std::left << std::setw(10) << "Types";
    for (const auto& s : splits) o << std::right << std::setw(12) << s;
    o << '\n';
    for (FindingClass c : kFindingClasses) {
      o << std::left << std::setw(10) << class_name(c);
      for (const auto& [s, m] : per_split) {
        auto it = m.find(c);
        o << std::right << std::setw(12) << (it == m.end() ? 0 : it->second);
      }
      o << std::right << std::setw(12) << count(c) << '\n';
    }
    return o.str();
  }
};

inline LintReport lint(const std::vector<AnnotationRecord>& records, const std::vector<std::string>& dictionary) {
  LintReport rep;
  for (FindingClass c : kFindingClasses) rep.counts[c] = 0;
  for (const auto& r : records) {
    auto& split = rep.per_split[r.split];
    for (FindingClass c : kFindingClasses) split.emplace(c, 0);
    if (auto f = lint_record(r, dictionary)) {
      ++rep.counts[f->cls];
      ++split[f->cls];
      rep.findings.push_back(std::move(*f));
    }
  }
  return rep;
}

// Applies each finding's suggested landmark list and drops Deletion records.
// Instruction text is never changed. The report describes the input.
inline std::pair<std::vector<AnnotationRecord>, LintReport> refine(const std::vector<AnnotationRecord>& records,
                                                                   const std::vector<std::string>& dictionary) {
  LintReport rep = lint(records, dictionary);
  std::map<std::string, const LintFinding*> by_id;
  for (const auto& f : rep.findings) by_id[f.record_id] = &f;
  std::vector<AnnotationRecord> out;
  for (const auto& r : records) {
    auto it = by_id.find(r.id);
    if (it == by_id.end()) {
      out.push_back(r);
      continue;
    }
    if (it->second->cls == FindingClass::Deletion) continue;
    AnnotationRecord fixed = r;
    fixed.annotated_landmarks = *it->second->suggested_fix;
    out.push_back(std::move(fixed));
  }
  return {std::move(out), std::move(rep)};
}

// ---------------------------------------------------------------------------
// Synthetic corpora with known errors

struct InjectedRecord {
  AnnotationRecord record;
  std::optional<FindingClass> injected;  // nullopt for clean records
};

inline AnnotationRecord clean_record(const world::World& w, const world::Episode& ep, const std::string& split = "") {
  AnnotationRecord r;
  r.id = ep.id;
  r.instruction_text = ep.instruction_text();
  r.map_id = w.id;
  r.target = ep.goal;
  r.split = split;
  for (const auto& id : ep.referenced_landmarks) {
    if (const auto* lm = w.find_landmark(id)) r.annotated_landmarks.push_back(lm->display_name());
  }
  return r;
}

namespace detail {
// One substituted letter inside a random word of `s`.
inline std::string typo(const std::string& s, Rng& rng) {
  std::vector<std::size_t> letters;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (std::isalpha(static_cast<unsigned char>(s[i]))) letters.push_back(i);
  if (letters.empty()) return s;
  std::string out = s;
  const std::size_t at = letters[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(letters.size()) - 1))];
  char c = out[at];
  while (c == out[at]) c = static_cast<char>('a' + rng.integer(0, 25));
  out[at] = c;
  return out;
}

inline bool mentions_any(const std::string& text, const std::vector<std::string>& dictionary) {
  return !extract_landmark_mentions(text, dictionary).empty();
}
}  // namespace detail

// Returns nullopt when the record cannot carry this error class cleanly.
inline std::optional<AnnotationRecord> inject(const AnnotationRecord& clean, FindingClass cls,
                                              const std::vector<std::string>& dictionary, Rng& rng) {
  AnnotationRecord r = clean;
  const auto mentions = extract_landmark_mentions(clean.instruction_text, dictionary);
  if (mentions.empty() || r.annotated_landmarks.empty()) return std::nullopt;
  switch (cls) {
    case FindingClass::Missing: {
      const auto drop = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(r.annotated_landmarks.size()) - 1));
      r.annotated_landmarks.erase(r.annotated_landmarks.begin() + static_cast<std::ptrdiff_t>(drop));
      return r;
    }
    case FindingClass::Minor: {
      const auto k = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(r.annotated_landmarks.size()) - 1));
      if (rng.bernoulli(0.5)) {
        r.annotated_landmarks[k] = detail::typo(r.annotated_landmarks[k], rng);
      } else {
        const Mention& m = mentions[std::min(k, mentions.size() - 1)];
        r.instruction_text = clean.instruction_text.substr(0, m.begin) + detail::typo(m.span, rng) +
                             clean.instruction_text.substr(m.end);
      }
      return r;
    }
    case FindingClass::Major: {
      std::vector<std::string> phantoms;
      for (const auto& name : dictionary) {
        const bool close = std::any_of(mentions.begin(), mentions.end(), [&](const Mention& m) { return refers_to(name, m); });
        if (!close) phantoms.push_back(name);
      }
      if (phantoms.empty()) return std::nullopt;
      r.annotated_landmarks.push_back(phantoms[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(phantoms.size()) - 1))]);
      return r;
    }
    case FindingClass::Deletion: {
      std::string text;
      std::size_t at = 0;
      for (const auto& m : mentions) {
        text += clean.instruction_text.substr(at, m.begin - at) + "area";
        at = m.end;
      }
      text += clean.instruction_text.substr(at);
      if (detail::mentions_any(text, dictionary)) return std::nullopt;
      r.instruction_text = text;
      return r;
    }
  }
  return std::nullopt;
}

// `per_class` injected records of each class, plus every remaining clean record.
inline std::vector<InjectedRecord> injection_corpus(const std::vector<AnnotationRecord>& clean, int per_class,
                                                    const std::vector<std::string>& dictionary, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, 0x11E7);
  std::vector<InjectedRecord> out;
  std::size_t next = 0;
  for (FindingClass c : kFindingClasses) {
    int made = 0;
    while (made < per_class && next < clean.size()) {
      if (auto r = inject(clean[next++], c, dictionary, rng)) {
        out.push_back({*r, c});
        ++made;
      }
    }
    if (made < per_class) throw usage_error("injection_corpus: not enough clean records");
  }
  for (; next < clean.size(); ++next) out.push_back({clean[next], std::nullopt});
  return out;
}

}  // namespace hett::annot
