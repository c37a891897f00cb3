#pragma once

// LLM-as-judge scoring on binary per-dimension rubrics, plus deterministic
// blind A/B ordering for paired judging.

#include <array>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "venndi/detail/text.hpp"
#include "venndi/error.hpp"
#include "venndi/llm.hpp"

namespace venndi::judge {

enum class RubricKind { reference_free, gt_comparison };

inline std::string to_string(RubricKind kind) {
  return kind == RubricKind::reference_free ? "reference_free" : "gt_comparison";
}

struct Dimension {
  std::string name;
  std::string criterion;

  bool operator==(const Dimension&) const = default;
};

struct JudgeRubric {
  std::string name;
  RubricKind kind = RubricKind::reference_free;
  std::string version;
  std::vector<Dimension> dimensions;

  std::string serialize() const {
    std::string out = "# venndi-rubric " + name + " " + to_string(kind) + " " + version + "\n";
    for (const auto& dim : dimensions) {
      out += dim.name + ": " + dim.criterion + "\n";
    }
    return out;
  }

  static JudgeRubric parse(std::string_view text) {
    JudgeRubric rubric;
    bool saw_header = false;
    for (const auto& raw : detail::split_lines(text)) {
      std::string_view line = detail::trim(raw);
      if (line.empty()) continue;
      if (line.starts_with("#")) {
        std::istringstream head{std::string(line.substr(1))};
        std::string marker, kind_word;
        head >> marker >> rubric.name >> kind_word >> rubric.version;
        if (marker != "venndi-rubric" || rubric.version.empty()) {
          throw ParseError(
              "rubric header must be \"# venndi-rubric <name> <kind> <version>\"");
        }
        if (kind_word == "reference_free") {
          rubric.kind = RubricKind::reference_free;
        } else if (kind_word == "gt_comparison") {
          rubric.kind = RubricKind::gt_comparison;
        } else {
          throw ParseError("unknown rubric kind \"" + kind_word + "\"");
        }
        saw_header = true;
        continue;
      }
      std::size_t colon = line.find(':');
      if (colon == std::string_view::npos) {
        throw ParseError("rubric line has no \"name: criterion\" separator: " +
                         std::string(line));
      }
      Dimension dim;
      dim.name = std::string(detail::trim(line.substr(0, colon)));
      dim.criterion = std::string(detail::trim(line.substr(colon + 1)));
      if (dim.name.empty() || dim.criterion.empty()) {
        throw ParseError("rubric dimension needs both a name and a criterion");
      }
      rubric.dimensions.push_back(std::move(dim));
    }
    if (!saw_header) throw ParseError("rubric is missing its version header");
    if (rubric.dimensions.empty()) throw ParseError("rubric has no dimensions");
    return rubric;
  }

  static JudgeRubric load_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open rubric file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
  }

  // Judge 1: reference-free grading of an answer against the knowledge base,
  // ten binary dimensions, total out of 10.
  static const JudgeRubric& judge1_builtin();
  // Judge 2: comparison against the ground-truth answer, five binary
  // dimensions, total out of 5.
  static const JudgeRubric& judge2_builtin();
};

inline const JudgeRubric& JudgeRubric::judge1_builtin() {
  static const JudgeRubric rubric = JudgeRubric::parse(
      "# venndi-rubric judge1 reference_free v1\n"
      "explicitness: The answer states its conclusion explicitly rather than leaving it "
      "implied.\n"
      "helpfulness: The answer helps the asker accomplish what they asked for.\n"
      "directness: The answer addresses the question directly, without digression.\n"
      "grammaticality: The answer is grammatically well formed.\n"
      "relevance: The answer stays relevant to the question.\n"
      "edge_case_reasoning: The answer handles edge cases or caveats sensibly where they "
      "apply.\n"
      "factuality: The answer is factually correct with respect to the knowledge.\n"
      "objectivity: The answer is objective and free of unsupported opinion.\n"
      "hallucination: The answer avoids fabricating information that is not grounded in "
      "the knowledge.\n"
      "source_credibility: The answer draws on the credible sources present in the "
      "knowledge.\n");
  return rubric;
}

inline const JudgeRubric& JudgeRubric::judge2_builtin() {
  static const JudgeRubric rubric = JudgeRubric::parse(
      "# venndi-rubric judge2 gt_comparison v1\n"
      "relevance: The answer addresses the same question the ground truth addresses.\n"
      "completeness: The answer covers the key points present in the ground truth.\n"
      "semantic_coherence: The answer conveys the same meaning as the ground truth.\n"
      "lexical_similarity: The answer shares the ground truth's key terminology.\n"
      "factual_agreement: The answer's facts agree with the ground truth's facts.\n");
  return rubric;
}

struct JudgeConfig {
  std::string model = "gpt-4";
  double temperature = 0.1;
};

struct DimensionScores {
  RubricKind kind = RubricKind::reference_free;
  std::vector<std::string> names;
  std::vector<int> verdicts;            // 0/1 per dimension
  std::vector<std::string> rationales;  // parallel to verdicts

  int total() const { return std::accumulate(verdicts.begin(), verdicts.end(), 0); }
};

namespace detail_judge {

inline std::string normalize_dim_name(std::string_view name) {
  std::string out;
  for (char c : name) {
    if (c == '_' || c == ' ' || c == '-') {
      out.push_back(' ');
    } else {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return out;
}

// Verdict lines are "name: 0|1 — rationale". Parsing is lenient about case,
// separators and ordering, but every dimension must get a verdict.
inline std::optional<DimensionScores> parse_verdict_block(const std::string& response,
                                                          const JudgeRubric& rubric) {
  DimensionScores scores;
  scores.kind = rubric.kind;
  scores.names.reserve(rubric.dimensions.size());
  scores.verdicts.assign(rubric.dimensions.size(), -1);
  scores.rationales.assign(rubric.dimensions.size(), "");
  for (const auto& dim : rubric.dimensions) scores.names.push_back(dim.name);

  std::vector<std::string> lines = detail::split_lines(response);
  for (std::size_t d = 0; d < rubric.dimensions.size(); ++d) {
    std::string needle = normalize_dim_name(rubric.dimensions[d].name);
    for (const auto& raw : lines) {
      std::string_view line = detail::trim(raw);
      std::size_t colon = line.find(':');
      if (colon == std::string_view::npos) continue;
      std::string head = normalize_dim_name(line.substr(0, colon));
      if (head.find(needle) == std::string::npos) continue;
      std::string_view tail = line.substr(colon + 1);
      std::size_t at = 0;
      while (at < tail.size() && tail[at] != '0' && tail[at] != '1') ++at;
      if (at == tail.size()) continue;
      scores.verdicts[d] = tail[at] - '0';
      std::string_view rationale = tail.substr(at + 1);
      while (!rationale.empty() &&
             (rationale.front() == ' ' || rationale.front() == '-' ||
              rationale.front() == ':' || rationale.front() == ',')) {
        rationale.remove_prefix(1);
      }
      if (rationale.starts_with("\xE2\x80\x94") || rationale.starts_with("\xE2\x80\x93")) {
        rationale.remove_prefix(3);
      }
      scores.rationales[d] = std::string(detail::trim(rationale));
      break;
    }
    if (scores.verdicts[d] == -1) return std::nullopt;
  }
  return scores;
}

inline std::string criteria_block(const JudgeRubric& rubric) {
  std::string out;
  for (const auto& dim : rubric.dimensions) {
    out += dim.name + ": " + dim.criterion + "\n";
  }
  return out;
}

inline DimensionScores score_with_retry(llm::Client& client, const JudgeRubric& rubric,
                                        const JudgeConfig& config,
                                        const std::string& prompt_text) {
  std::string response =
      client.complete({config.model, prompt_text, config.temperature, std::nullopt});
  if (auto scores = parse_verdict_block(response, rubric)) return *scores;
  std::string retry_prompt =
      prompt_text +
      "\n\nReminder: output exactly one line per criterion, in the form "
      "\"<criterion>: 0 or 1 - rationale\".";
  response = client.complete({config.model, retry_prompt, config.temperature, std::nullopt});
  if (auto scores = parse_verdict_block(response, rubric)) return *scores;
  throw UnparseableResponseError("judge verdicts failed to parse after one retry",
                                 response);
}

}  // namespace detail_judge

// Reference-free judge: grades the answer against the question and the
// knowledge it was produced from.
inline DimensionScores judge1_score(llm::Client& client, const std::string& question,
                                    const std::string& knowledge, const std::string& answer,
                                    const JudgeRubric& rubric = JudgeRubric::judge1_builtin(),
                                    const JudgeConfig& config = {}) {
  if (rubric.kind != RubricKind::reference_free) {
    throw PreconditionError("judge1_score needs a reference_free rubric");
  }
  if (rubric.dimensions.size() != 10) {
    throw PreconditionError("judge1 rubric must have exactly 10 dimensions, got " +
                            std::to_string(rubric.dimensions.size()));
  }
  std::string prompt_text =
      "You are grading an answer to a question, using the provided knowledge. For each "
      "criterion below, output exactly one line in the form \"<criterion>: 0 or 1 - "
      "rationale\".\n\nCriteria:\n" +
      detail_judge::criteria_block(rubric) + "\nQuestion: " + question +
      "\n\nKnowledge:\n" + knowledge + "\n\nAnswer: " + answer;
  return detail_judge::score_with_retry(client, rubric, config, prompt_text);
}

// Ground-truth-comparison judge: grades the answer against the reference
// answer alone.
inline DimensionScores judge2_score(llm::Client& client, const std::string& ground_truth,
                                    const std::string& answer,
                                    const JudgeRubric& rubric = JudgeRubric::judge2_builtin(),
                                    const JudgeConfig& config = {}) {
  if (rubric.kind != RubricKind::gt_comparison) {
    throw PreconditionError("judge2_score needs a gt_comparison rubric");
  }
  if (rubric.dimensions.size() != 5) {
    throw PreconditionError("judge2 rubric must have exactly 5 dimensions, got " +
                            std::to_string(rubric.dimensions.size()));
  }
  std::string prompt_text =
      "You are comparing an answer with a ground-truth answer. For each criterion below, "
      "output exactly one line in the form \"<criterion>: 0 or 1 - rationale\".\n\n"
      "Criteria:\n" +
      detail_judge::criteria_block(rubric) + "\nGround truth: " + ground_truth +
      "\n\nAnswer: " + answer;
  return detail_judge::score_with_retry(client, rubric, config, prompt_text);
}

// Deterministic A/B blinding for paired judging. The judge-visible payload
// carries only "Answer A"/"Answer B"; which production system sits in which
// slot is decided by the seed and the sample id, and recoverable afterwards.
struct BlindPair {
  std::array<std::string, 2> texts;   // presentation order
  std::array<std::string, 2> labels;  // "Answer A", "Answer B"
  bool swapped = false;               // true when texts = {second, first}

  // index into the original (first, second) pair for presentation slot i
  std::size_t original_index(std::size_t slot) const {
    return swapped ? 1 - slot : slot;
  }
};

inline BlindPair blind_pair(const std::string& first, const std::string& second,
                            std::uint64_t seed, std::string_view sample_id) {
  BlindPair pair;
  pair.labels = {"Answer A", "Answer B"};
  pair.swapped = (detail::mix64(seed ^ detail::fnv1a(sample_id)) & 1u) != 0;
  pair.texts = pair.swapped ? std::array<std::string, 2>{second, first}
                            : std::array<std::string, 2>{first, second};
  return pair;
}

}  // namespace venndi::judge
