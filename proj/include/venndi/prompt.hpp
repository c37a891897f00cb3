#pragma once

// Builds the Venn-diagram and standard prompts plus the auxiliary templates
// (question generation, claim extraction, claim verdicts) used by metrics.

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "venndi/corpus.hpp"
#include "venndi/error.hpp"

namespace venndi::prompt {

enum class PromptKind { vd, standard };

inline std::string to_string(PromptKind kind) {
  return kind == PromptKind::vd ? "vd" : "standard";
}

inline PromptKind parse_prompt_kind(std::string_view text) {
  if (text == "vd") return PromptKind::vd;
  if (text == "standard") return PromptKind::standard;
  throw ValidationError("unknown prompt kind \"" + std::string(text) + "\"",
                        {std::string(text)});
}

enum class AnswerStyle { concise_single_line, detailed };

struct OutputSpec {
  AnswerStyle answer_style = AnswerStyle::detailed;
  bool citation_required = true;
  std::string extra_instructions;

  bool operator==(const OutputSpec&) const = default;
};

struct PromptText {
  std::string text;
  PromptKind kind = PromptKind::vd;
  std::vector<std::string> doc_labels;
};

// Replaces every {{key}} in the template. Values are inserted literally and
// never re-scanned, so substituted text may safely contain marker syntax.
// Throws when the template has a placeholder with no value, or when a
// provided key never appears in the template.
inline std::string substitute(std::string_view tmpl,
                              const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::set<std::string> used;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    std::size_t open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    std::size_t close = tmpl.find("}}", open + 2);
    std::string name(close == std::string_view::npos
                         ? tmpl.substr(open + 2)
                         : tmpl.substr(open + 2, close - open - 2));
    auto it = values.find(name);
    if (close == std::string_view::npos || it == values.end()) {
      throw ValidationError("template has unresolved placeholder {{" + name + "}}",
                            {name});
    }
    out.append(it->second);
    used.insert(name);
    pos = close + 2;
  }
  for (const auto& [key, value] : values) {
    if (!used.count(key)) {
      throw ValidationError("template is missing placeholder {{" + key + "}}", {key});
    }
  }
  return out;
}

// The first line of every template asset names it and pins its version; the
// line stays in the rendered prompt on purpose so replay-cache keys change
// whenever the template does.
struct Templates {
  std::string vd;
  std::string standard_prompt;
  std::string question_gen;
  std::string claim_extract;
  std::string claim_verdict;

  static const Templates& builtin();
  static Templates load_dir(const std::filesystem::path& dir);
};

namespace detail_prompt {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open template file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline constexpr std::string_view kVdTemplate =
    "# venndi-template vd v1\n"
    "Treat the query as the Universal Set of information being asked for, and\n"
    "treat each document below as a set of information. Analyze the documents\n"
    "with the following steps, and show every step in your response under its\n"
    "own numbered heading.\n"
    "\n"
    "Query: {{query}}\n"
    "\n"
    "{{context}}\n"
    "\n"
    "Steps:\n"
    "1. Identify the sources: list each document and state what it is about.\n"
    "2. Find the Overlapping Areas with respect to query: identify the "
    "information that appears in more than one document, naming the documents "
    "that share it.\n"
    "3. Find the Distinct Areas with respect to query: identify the information "
    "unique to each document, and say explicitly when a document does not "
    "contain relevant information with respect to the query.\n"
    "4. Explain the Overlaps with respect to query: explain the shared "
    "information and whether the documents agree.\n"
    "5. Explain the Unique Information with respect to query: explain what each "
    "relevant document uniquely contributes.\n"
    "6. {{final_step}}\n";

inline constexpr std::string_view kStandardTemplate =
    "# venndi-template standard v1\n"
    "Answer the query using only the information in the documents below.\n"
    "\n"
    "Query: {{query}}\n"
    "\n"
    "{{context}}\n"
    "\n"
    "{{final_step}}\n";

inline constexpr std::string_view kQuestionGenTemplate =
    "# venndi-template question_gen v1\n"
    "Generate {{n}} questions that the following answer would fully and "
    "directly answer. Write one question per line, with no numbering and no "
    "other text.\n"
    "\n"
    "Answer: {{answer}}\n";

inline constexpr std::string_view kClaimExtractTemplate =
    "# venndi-template claim_extract v1\n"
    "List every atomic factual claim made by the following text. Write one "
    "claim per line, each starting with \"- \". Do not add any other text.\n"
    "\n"
    "Text: {{text}}\n";

inline constexpr std::string_view kClaimVerdictTemplate =
    "# venndi-template claim_verdict v1\n"
    "You are given ground-truth claims and answer claims. For each answer "
    "claim, decide whether the ground-truth claims support it. For each "
    "ground-truth claim, decide whether the answer claims cover it.\n"
    "Output exactly one line per claim, in this order and format:\n"
    "answer claim <i>: supported|unsupported\n"
    "truth claim <j>: covered|missing\n"
    "\n"
    "Ground-truth claims:\n"
    "{{ground_truth_claims}}\n"
    "\n"
    "Answer claims:\n"
    "{{answer_claims}}\n";

}  // namespace detail_prompt

inline const Templates& Templates::builtin() {
  static const Templates templates{
      std::string(detail_prompt::kVdTemplate),
      std::string(detail_prompt::kStandardTemplate),
      std::string(detail_prompt::kQuestionGenTemplate),
      std::string(detail_prompt::kClaimExtractTemplate),
      std::string(detail_prompt::kClaimVerdictTemplate)};
  return templates;
}

inline Templates Templates::load_dir(const std::filesystem::path& dir) {
  Templates templates;
  templates.vd = detail_prompt::read_file(dir / "vd.txt");
  templates.standard_prompt = detail_prompt::read_file(dir / "standard.txt");
  templates.question_gen = detail_prompt::read_file(dir / "question_gen.txt");
  templates.claim_extract = detail_prompt::read_file(dir / "claim_extract.txt");
  templates.claim_verdict = detail_prompt::read_file(dir / "claim_verdict.txt");
  return templates;
}

// "Document 1: <text>" blocks separated by blank lines, in label order.
inline std::string render_context_block(const std::vector<corpus::Document>& documents) {
  if (documents.empty()) throw PreconditionError("context block needs at least one document");
  std::string out;
  for (std::size_t i = 0; i < documents.size(); ++i) {
    if (i) out += "\n\n";
    out += documents[i].label;
    out += ": ";
    out += documents[i].text;
  }
  return out;
}

// The last instruction of either prompt; everything the output spec controls
// lands here, so prompts with different specs differ only in this suffix.
inline std::string final_step_instruction(const OutputSpec& spec, PromptKind kind) {
  std::string out;
  if (kind == PromptKind::vd) {
    out = "Provide the final answer to the query under a heading \"Final answer:\", "
          "combining the overlapping and unique relevant information.";
    if (spec.answer_style == AnswerStyle::concise_single_line) {
      out = "Provide the final answer to the query under a heading \"Final answer:\" "
            "as a single concise sentence.";
    }
  } else {
    out = "Answer the query using the documents.";
    if (spec.answer_style == AnswerStyle::concise_single_line) {
      out = "Answer the query in a single concise sentence using the documents.";
    }
  }
  if (spec.citation_required) {
    out += " Cite the supporting documents inline, e.g. (Document 2), for every claim.";
  }
  if (!spec.extra_instructions.empty()) {
    out += " ";
    out += spec.extra_instructions;
  }
  return out;
}

namespace detail_prompt {

inline PromptText build(const corpus::Sample& sample, const OutputSpec& spec,
                        PromptKind kind, const std::string& tmpl) {
  if (sample.documents.empty()) {
    throw PreconditionError("cannot build a prompt for a sample with no documents");
  }
  if (detail::trim(sample.query).empty()) {
    throw PreconditionError("cannot build a prompt for an empty query");
  }
  PromptText prompt;
  prompt.kind = kind;
  prompt.doc_labels = corpus::labels_of(sample);
  prompt.text = substitute(tmpl, {{"query", sample.query},
                                  {"context", render_context_block(sample.documents)},
                                  {"final_step", final_step_instruction(spec, kind)}});
  return prompt;
}

}  // namespace detail_prompt

inline PromptText build_vd_prompt(const corpus::Sample& sample, const OutputSpec& spec = {},
                                  const Templates& templates = Templates::builtin()) {
  return detail_prompt::build(sample, spec, PromptKind::vd, templates.vd);
}

inline PromptText build_standard_prompt(const corpus::Sample& sample,
                                        const OutputSpec& spec = {},
                                        const Templates& templates = Templates::builtin()) {
  return detail_prompt::build(sample, spec, PromptKind::standard,
                              templates.standard_prompt);
}

inline PromptText build_prompt(const corpus::Sample& sample, PromptKind kind,
                               const OutputSpec& spec = {},
                               const Templates& templates = Templates::builtin()) {
  return kind == PromptKind::vd ? build_vd_prompt(sample, spec, templates)
                                : build_standard_prompt(sample, spec, templates);
}

}  // namespace venndi::prompt
