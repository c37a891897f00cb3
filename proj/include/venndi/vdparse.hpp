#pragma once

// Parses the five-step Venn-diagram response format and extracts document
// citations from free-form answers.

#include <algorithm>
#include <array>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "venndi/corpus.hpp"
#include "venndi/detail/text.hpp"
#include "venndi/error.hpp"

namespace venndi::vdparse {

// A versioned list of case-insensitive trigger phrases. Versioning matters:
// changing the list changes downstream relevance flags, so the version string
// travels with the data it produced.
struct PatternList {
  std::string name;
  std::string version;
  std::vector<std::string> patterns;

  bool matches(std::string_view text) const {
    for (const auto& p : patterns) {
      if (detail::contains_ci(text, p)) return true;
    }
    return false;
  }

  std::string serialize() const {
    std::string out = "# venndi-patterns " + name + " " + version + "\n";
    for (const auto& p : patterns) {
      out += p;
      out += '\n';
    }
    return out;
  }

  static PatternList parse(std::string_view text) {
    PatternList list;
    bool saw_header = false;
    for (const auto& raw : detail::split_lines(text)) {
      std::string_view line = detail::trim(raw);
      if (line.empty()) continue;
      if (line.starts_with("#")) {
        std::istringstream head{std::string(line.substr(1))};
        std::string marker;
        head >> marker >> list.name >> list.version;
        if (marker != "venndi-patterns") {
          throw ParseError("pattern list header must be \"# venndi-patterns <name> <version>\"");
        }
        saw_header = true;
        continue;
      }
      list.patterns.emplace_back(line);
    }
    if (!saw_header) throw ParseError("pattern list is missing its version header");
    if (list.patterns.empty()) throw ParseError("pattern list has no patterns");
    return list;
  }

  static PatternList load_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open pattern file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
  }
};

// Phrases that mark a document as declared irrelevant in the distinct-areas
// step. Matched case-insensitively against the per-document description.
inline const PatternList& irrelevance_patterns() {
  static const PatternList list{
      "irrelevance",
      "v1",
      {
          "do not contain relevant information",
          "does not contain relevant information",
          "do not contain any relevant information",
          "does not contain any relevant information",
          "no relevant information",
          "not relevant",
          "not directly relevant",
          "irrelevant",
          "does not address the query",
          "do not address the query",
      }};
  return list;
}

struct CitationGroup {
  std::vector<std::string> labels;  // sorted by document number, unique
  std::size_t span_begin = 0;       // byte offsets into the answer text
  std::size_t span_end = 0;

  bool operator==(const CitationGroup&) const = default;
};

struct OverlapGroup {
  std::vector<std::string> members;  // sorted by document number, unique
  std::string description;

  bool operator==(const OverlapGroup&) const = default;
};

struct UniqueInfo {
  std::string label;
  std::string description;
  bool relevant = true;

  bool operator==(const UniqueInfo&) const = default;
};

struct VDAnalysis {
  std::vector<std::string> universe;  // the sample's label set
  std::vector<std::string> sources;   // step 1, order of first mention
  std::vector<OverlapGroup> overlap_groups;                          // step 2
  std::vector<UniqueInfo> unique_info;                               // step 3
  std::vector<std::string> overlap_explanations;                     // step 4
  std::vector<std::pair<std::string, std::string>> unique_explanations;  // step 5
  std::string final_answer;
  std::vector<CitationGroup> citations;
  std::vector<std::string> warnings;
  std::array<bool, 5> steps_found{};
};

struct Violation {
  std::string code;
  std::string message;

  bool operator==(const Violation&) const = default;
};

namespace detail_vd {

struct LabelRun {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::vector<int> numbers;
};

inline bool is_alnum(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

inline bool ci_starts(std::string_view text, std::size_t pos, std::string_view word) {
  if (pos + word.size() > text.size()) return false;
  for (std::size_t i = 0; i < word.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(text[pos + i])) != word[i]) return false;
  }
  return true;
}

// Matches "document"/"documents" at pos with word boundaries on both sides.
// Returns the position just past the word, or nullopt.
inline std::optional<std::size_t> match_document_word(std::string_view text,
                                                      std::size_t pos) {
  if (pos > 0 && is_alnum(text[pos - 1])) return std::nullopt;
  if (!ci_starts(text, pos, "document")) return std::nullopt;
  std::size_t end = pos + 8;
  if (end < text.size() && (text[end] == 's' || text[end] == 'S')) ++end;
  if (end < text.size() && is_alnum(text[end])) return std::nullopt;
  return end;
}

inline std::optional<std::pair<int, std::size_t>> match_number(std::string_view text,
                                                               std::size_t pos) {
  std::size_t end = pos;
  while (end < text.size() && std::isdigit(static_cast<unsigned char>(text[end]))) ++end;
  if (end == pos || end - pos > 6) return std::nullopt;
  int value = 0;
  for (std::size_t i = pos; i < end; ++i) value = value * 10 + (text[i] - '0');
  return std::make_pair(value, end);
}

inline std::size_t skip_spaces(std::string_view text, std::size_t pos) {
  while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  return pos;
}

// Scans for citation-style label runs: "Document 2", "Documents 1, 2, and 3",
// "Document 2 and Document 3", "Documents 5 & 6". Bare numbers only count
// when a run is already open, so "let sit for 12 minutes" never matches.
inline std::vector<LabelRun> scan_label_runs(std::string_view text) {
  std::vector<LabelRun> runs;
  std::size_t i = 0;
  while (i < text.size()) {
    auto word_end = match_document_word(text, i);
    if (!word_end) {
      ++i;
      continue;
    }
    std::size_t j = skip_spaces(text, *word_end);
    auto first = match_number(text, j);
    if (!first) {
      i = *word_end;
      continue;
    }
    LabelRun run;
    run.begin = i;
    run.numbers.push_back(first->first);
    run.end = first->second;

    std::size_t pos = first->second;
    while (true) {
      std::size_t q = skip_spaces(text, pos);
      bool sep = false;
      if (q < text.size() && (text[q] == ',' || text[q] == '&')) {
        ++q;
        q = skip_spaces(text, q);
        sep = true;
        if (ci_starts(text, q, "and") &&
            (q + 3 >= text.size() || !is_alnum(text[q + 3]))) {
          q = skip_spaces(text, q + 3);
        }
      } else if (ci_starts(text, q, "and") &&
                 (q + 3 >= text.size() || !is_alnum(text[q + 3]))) {
        q = skip_spaces(text, q + 3);
        sep = true;
      }
      if (!sep) break;
      if (auto inner = match_document_word(text, q)) q = skip_spaces(text, *inner);
      auto next = match_number(text, q);
      if (!next) break;
      run.numbers.push_back(next->first);
      run.end = next->second;
      pos = next->second;
    }
    runs.push_back(std::move(run));
    i = runs.back().end;
  }
  return runs;
}

inline void sort_labels_by_number(std::vector<std::string>& labels) {
  std::sort(labels.begin(), labels.end(), [](const std::string& a, const std::string& b) {
    auto na = corpus::label_number(a);
    auto nb = corpus::label_number(b);
    if (na && nb && *na != *nb) return *na < *nb;
    return a < b;
  });
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
}

inline bool is_bullet(std::string_view line) {
  std::string_view t = detail::trim(line);
  return t.starts_with("- ") || t.starts_with("* ") || t.starts_with("\xE2\x80\xA2") ||
         t == "-" || t == "*";
}

inline std::string strip_bullet(std::string_view line) {
  std::string_view t = detail::trim(line);
  if (t.starts_with("- ") || t.starts_with("* ")) {
    t = t.substr(2);
  } else if (t.starts_with("\xE2\x80\xA2")) {
    t = t.substr(3);
  }
  return std::string(detail::trim(t));
}

// Section body split into items: each bullet starts an item, wrapped lines
// join their item, and leading prose becomes a preamble pseudo-item.
inline std::vector<std::string> section_items(const std::vector<std::string>& lines,
                                              const std::string& preamble) {
  std::vector<std::string> items;
  std::string head = std::string(detail::trim(preamble));
  bool head_open = !head.empty();
  for (const auto& line : lines) {
    std::string_view t = detail::trim(line);
    if (t.empty()) continue;
    if (is_bullet(line)) {
      if (head_open) {
        items.push_back(head);
        head.clear();
        head_open = false;
      }
      items.push_back(strip_bullet(line));
    } else if (!items.empty() && !head_open) {
      items.back() += " ";
      items.back() += std::string(t);
    } else {
      if (!head.empty()) head += " ";
      head += std::string(t);
      head_open = true;
    }
  }
  if (head_open) items.push_back(head);
  return items;
}

inline std::string description_after_colon(std::string_view item) {
  std::size_t colon = item.find(':');
  if (colon == std::string_view::npos) return std::string(detail::trim(item));
  return std::string(detail::trim(item.substr(colon + 1)));
}

inline std::string trim_heading_tail(std::string_view tail) {
  std::string_view t = detail::trim(tail);
  while (!t.empty() && (t.front() == '*' || t.front() == '-' || t.front() == ':' ||
                        t.front() == '#')) {
    t.remove_prefix(1);
    t = detail::trim(t);
  }
  if (t.starts_with("\xE2\x80\x94")) {  // em dash
    t.remove_prefix(3);
    t = detail::trim(t);
  }
  return std::string(t);
}

}  // namespace detail_vd

// Citation groups in the answer, first-occurrence order, deduplicated by
// label set. Unknown labels are dropped with a warning rather than failing:
// answers routinely cite hallucinated documents and the caller wants the
// salvageable groups plus the evidence.
inline std::vector<CitationGroup> extract_citations(
    std::string_view answer, const std::vector<std::string>& universe,
    std::vector<std::string>* warnings = nullptr) {
  std::set<std::string> known(universe.begin(), universe.end());
  std::vector<CitationGroup> groups;
  std::set<std::vector<std::string>> seen;
  for (const auto& run : detail_vd::scan_label_runs(answer)) {
    std::vector<std::string> labels;
    for (int number : run.numbers) {
      std::string label = corpus::document_label(static_cast<std::size_t>(number));
      if (known.count(label)) {
        labels.push_back(std::move(label));
      } else if (warnings) {
        warnings->push_back("citation to unknown label \"" + label + "\" ignored");
      }
    }
    if (labels.empty()) continue;
    detail_vd::sort_labels_by_number(labels);
    if (!seen.insert(labels).second) continue;
    groups.push_back(CitationGroup{std::move(labels), run.begin, run.end});
  }
  return groups;
}

namespace detail_vd {

// Key phrase that identifies each step heading, matched case-insensitively
// against non-bullet lines.
inline const std::array<std::string_view, 5>& step_phrases() {
  static const std::array<std::string_view, 5> phrases{
      "identify the sources", "overlapping areas", "distinct areas",
      "explain the overlaps", "unique information"};
  return phrases;
}

struct SectionMap {
  // line index of each step heading (npos when absent), plus final answer
  std::array<std::size_t, 5> heading_line;
  std::size_t final_line = std::string::npos;
  int found = 0;
};

inline SectionMap locate_sections(const std::vector<std::string>& lines) {
  SectionMap map;
  map.heading_line.fill(std::string::npos);
  std::set<std::size_t> claimed;
  for (std::size_t step = 0; step < 5; ++step) {
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (claimed.count(i) || is_bullet(lines[i])) continue;
      if (detail::contains_ci(lines[i], step_phrases()[step])) {
        map.heading_line[step] = i;
        claimed.insert(i);
        ++map.found;
        break;
      }
    }
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (claimed.count(i) || is_bullet(lines[i])) continue;
    if (detail::contains_ci(lines[i], "final answer")) {
      map.final_line = i;
      break;
    }
  }
  return map;
}

inline std::string heading_tail(const std::string& line, std::string_view phrase) {
  std::string lower = detail::to_lower(line);
  std::string needle = detail::to_lower(phrase);
  std::size_t at = lower.find(needle);
  std::size_t from = (at == std::string::npos) ? 0 : at + needle.size();
  std::size_t colon = line.find(':', from);
  if (colon == std::string::npos) {
    return trim_heading_tail(line.substr(from));
  }
  return trim_heading_tail(line.substr(colon + 1));
}

}  // namespace detail_vd

// Parses a five-step VD response. Requires at least 3 of the 5 step headings
// (fuzzy, case-insensitive match on the step's key phrase); anything less is
// an UnparseableResponseError carrying the raw text. Labels mentioned in the
// step sections must belong to the sample's label set.
inline VDAnalysis parse_vd_response(std::string_view text,
                                    const std::vector<std::string>& universe) {
  using namespace detail_vd;
  VDAnalysis analysis;
  analysis.universe = universe;

  std::vector<std::string> lines = detail::split_lines(text);
  SectionMap map = locate_sections(lines);
  if (map.found < 3) {
    throw UnparseableResponseError(
        "response has only " + std::to_string(map.found) +
            " of 5 step headings; refusing to treat it as a VD analysis",
        std::string(text));
  }
  for (std::size_t step = 0; step < 5; ++step) {
    analysis.steps_found[step] = map.heading_line[step] != std::string::npos;
  }

  // Section boundaries: each section runs to the next heading of any kind.
  std::vector<std::size_t> boundaries;
  for (std::size_t step = 0; step < 5; ++step) {
    if (analysis.steps_found[step]) boundaries.push_back(map.heading_line[step]);
  }
  if (map.final_line != std::string::npos) boundaries.push_back(map.final_line);
  std::sort(boundaries.begin(), boundaries.end());

  auto section_range = [&](std::size_t heading) -> std::pair<std::size_t, std::size_t> {
    auto it = std::upper_bound(boundaries.begin(), boundaries.end(), heading);
    std::size_t end = (it == boundaries.end()) ? lines.size() : *it;
    return {heading + 1, end};
  };

  std::set<std::string> known(universe.begin(), universe.end());
  std::vector<std::string> offenders;
  auto labels_in = [&](std::string_view item) {
    std::vector<std::string> labels;
    for (const auto& run : scan_label_runs(item)) {
      for (int number : run.numbers) {
        std::string label = corpus::document_label(static_cast<std::size_t>(number));
        if (known.count(label)) {
          labels.push_back(std::move(label));
        } else if (std::find(offenders.begin(), offenders.end(), label) == offenders.end()) {
          offenders.push_back(std::move(label));
        }
      }
    }
    return labels;
  };

  auto items_of = [&](std::size_t step) {
    std::size_t heading = map.heading_line[step];
    auto [begin, end] = section_range(heading);
    std::vector<std::string> body(lines.begin() + static_cast<long>(begin),
                                  lines.begin() + static_cast<long>(end));
    return section_items(body, heading_tail(lines[heading], step_phrases()[step]));
  };

  if (analysis.steps_found[0]) {
    for (const auto& item : items_of(0)) {
      for (auto& label : labels_in(item)) {
        if (std::find(analysis.sources.begin(), analysis.sources.end(), label) ==
            analysis.sources.end()) {
          analysis.sources.push_back(label);
        }
      }
    }
  }
  if (analysis.steps_found[1]) {
    for (const auto& item : items_of(1)) {
      OverlapGroup group;
      group.members = labels_in(item);
      sort_labels_by_number(group.members);
      group.description = description_after_colon(item);
      analysis.overlap_groups.push_back(std::move(group));
    }
  }
  if (analysis.steps_found[2]) {
    for (const auto& item : items_of(2)) {
      std::vector<std::string> labels = labels_in(item);
      sort_labels_by_number(labels);
      std::string description = description_after_colon(item);
      bool relevant = !irrelevance_patterns().matches(item);
      for (auto& label : labels) {
        analysis.unique_info.push_back(UniqueInfo{std::move(label), description, relevant});
      }
    }
  }
  if (analysis.steps_found[3]) {
    for (const auto& item : items_of(3)) {
      labels_in(item);  // collect unknown-label offenders
      analysis.overlap_explanations.push_back(item);
    }
  }
  if (analysis.steps_found[4]) {
    for (const auto& item : items_of(4)) {
      std::vector<std::string> labels = labels_in(item);
      sort_labels_by_number(labels);
      for (auto& label : labels) {
        analysis.unique_explanations.emplace_back(std::move(label), item);
      }
    }
  }
  if (!offenders.empty()) {
    std::string msg = "response mentions labels outside the sample's label set:";
    for (const auto& label : offenders) msg += " \"" + label + "\"";
    throw ValidationError(msg, offenders);
  }

  // Final answer: text after the final-answer heading, or the trailing
  // non-bullet paragraph after the last section.
  if (map.final_line != std::string::npos) {
    std::string answer = heading_tail(lines[map.final_line], "final answer");
    for (std::size_t i = map.final_line + 1; i < lines.size(); ++i) {
      if (!answer.empty()) answer += "\n";
      answer += lines[i];
    }
    analysis.final_answer = std::string(detail::trim(answer));
  } else {
    std::size_t last_heading = boundaries.empty() ? 0 : boundaries.back();
    std::vector<std::vector<std::string>> blocks;
    std::vector<std::string> current;
    for (std::size_t i = last_heading + 1; i < lines.size(); ++i) {
      if (detail::trim(lines[i]).empty()) {
        if (!current.empty()) blocks.push_back(std::move(current));
        current.clear();
      } else {
        current.push_back(lines[i]);
      }
    }
    if (!current.empty()) blocks.push_back(std::move(current));
    for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) {
      if (!is_bullet(it->front())) {
        std::string answer;
        for (const auto& line : *it) {
          if (!answer.empty()) answer += "\n";
          answer += line;
        }
        analysis.final_answer = std::string(detail::trim(answer));
        break;
      }
    }
  }

  analysis.citations = extract_citations(analysis.final_answer, universe,
                                         &analysis.warnings);
  return analysis;
}

// Cross-checks a parsed analysis against its sample. Returns violations
// instead of throwing: callers decide which ones are fatal.
inline std::vector<Violation> validate_analysis(const VDAnalysis& analysis,
                                                const corpus::Sample& sample) {
  std::vector<Violation> violations;
  std::set<std::string> labels;
  for (const auto& doc : sample.documents) labels.insert(doc.label);

  std::set<std::string> sources(analysis.sources.begin(), analysis.sources.end());
  if (!analysis.sources.empty() && sources != labels) {
    std::string msg = "step-1 sources do not match the sample's documents:";
    for (const auto& label : labels) {
      if (!sources.count(label)) msg += " missing \"" + label + "\"";
    }
    for (const auto& label : sources) {
      if (!labels.count(label)) msg += " extra \"" + label + "\"";
    }
    violations.push_back(Violation{"source_mismatch", msg});
  }

  for (const auto& group : analysis.overlap_groups) {
    if (group.members.size() < 2) {
      violations.push_back(Violation{
          "overlap_too_small",
          "overlap group needs at least two members, got " +
              std::to_string(group.members.size())});
    }
  }

  std::set<std::string> irrelevant;
  for (const auto& info : analysis.unique_info) {
    if (!info.relevant) irrelevant.insert(info.label);
  }
  for (const auto& group : analysis.citations) {
    for (const auto& label : group.labels) {
      if (irrelevant.count(label)) {
        violations.push_back(Violation{
            "cited_irrelevant",
            "final answer cites \"" + label + "\" which step 3 marked irrelevant"});
      }
    }
  }

  if (detail::trim(analysis.final_answer).empty()) {
    violations.push_back(Violation{"empty_final_answer", "final answer is empty"});
  }
  return violations;
}

}  // namespace venndi::vdparse
