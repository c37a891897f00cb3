#pragma once

// Reference-based answer metrics: relevancy via generated-question embedding
// similarity, similarity via ground-truth embedding cosine, and correctness
// as a weighted blend of similarity and claim-level statement F1.

#include <cmath>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "venndi/detail/text.hpp"
#include "venndi/error.hpp"
#include "venndi/llm.hpp"
#include "venndi/prompt.hpp"

namespace venndi::metrics {

struct MetricConfig {
  int n_questions = 3;
  double w1 = 0.25;  // weight of embedding similarity in correctness
  double w2 = 0.75;  // weight of statement F1 in correctness
  std::string completion_model = "gpt-4";
  std::string embedding_model = "text-embedding-3-small";
  double temperature = 0.1;
  bool lexical_f1 = false;  // offline fallback for the claim-level path
};

inline double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw PreconditionError("cosine needs equal dimensions, got " +
                            std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  if (a.empty()) throw PreconditionError("cosine of empty vectors is undefined");
  double dot = 0.0, norm_a = 0.0, norm_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    norm_a += a[i] * a[i];
    norm_b += b[i] * b[i];
  }
  if (norm_a == 0.0 || norm_b == 0.0) {
    throw PreconditionError("cosine of a zero vector is undefined");
  }
  return dot / (std::sqrt(norm_a) * std::sqrt(norm_b));
}

inline double cosine(const llm::EmbeddingVector& a, const llm::EmbeddingVector& b) {
  return cosine(std::span<const double>(a.values), std::span<const double>(b.values));
}

struct F1Counts {
  int tp = 0;
  int fp = 0;
  int fn = 0;
};

// F1 = 2TP / (2TP + FP + FN), defined as 0 when TP is 0.
inline double f1_from_counts(const F1Counts& counts) {
  if (counts.tp < 0 || counts.fp < 0 || counts.fn < 0) {
    throw PreconditionError("F1 counts must be non-negative");
  }
  if (counts.tp == 0) return 0.0;
  return 2.0 * counts.tp / (2.0 * counts.tp + counts.fp + counts.fn);
}

namespace detail_metrics {

// Lines of a model listing, stripped of bullet markers and numbering.
inline std::vector<std::string> parse_listing(std::string_view response) {
  std::vector<std::string> items;
  for (const auto& raw : detail::split_lines(response)) {
    std::string_view line = detail::trim(raw);
    if (line.empty()) continue;
    if (line.starts_with("- ") || line.starts_with("* ")) line = line.substr(2);
    std::size_t i = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')')) {
      line = line.substr(i + 1);
    }
    line = detail::trim(line);
    if (!line.empty()) items.emplace_back(line);
  }
  return items;
}

inline std::string numbered_listing(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    out += std::to_string(i + 1) + ". " + items[i];
    if (i + 1 < items.size()) out += "\n";
  }
  return out;
}

inline std::string complete(llm::Client& client, const MetricConfig& config,
                            const std::string& prompt_text) {
  return client.complete(
      {config.completion_model, prompt_text, config.temperature, std::nullopt});
}

// One retry with a format reminder, then a typed error.
template <typename Parse>
auto listing_with_retry(llm::Client& client, const MetricConfig& config,
                        const std::string& prompt_text, Parse parse,
                        const std::string& what) {
  std::string response = complete(client, config, prompt_text);
  auto parsed = parse(response);
  if (parsed) return std::move(*parsed);
  std::string retry_prompt =
      prompt_text + "\n\nReminder: follow the output format exactly, one item per line.";
  response = complete(client, config, retry_prompt);
  parsed = parse(response);
  if (parsed) return std::move(*parsed);
  throw UnparseableResponseError(what + " failed to parse after one retry", response);
}

}  // namespace detail_metrics

// Generates n questions the answer would satisfy, embeds them alongside the
// original question, and averages the cosines.
inline double answer_relevancy(llm::Client& client, const std::string& question,
                               const std::string& answer, const MetricConfig& config = {},
                               const prompt::Templates& templates =
                                   prompt::Templates::builtin()) {
  if (config.n_questions < 1) throw PreconditionError("n_questions must be >= 1");
  if (detail::trim(question).empty()) throw PreconditionError("relevancy needs a question");
  if (detail::trim(answer).empty()) throw PreconditionError("relevancy needs an answer");

  std::string prompt_text = prompt::substitute(
      templates.question_gen,
      {{"answer", answer}, {"n", std::to_string(config.n_questions)}});
  auto questions = detail_metrics::listing_with_retry(
      client, config, prompt_text,
      [&](const std::string& response) -> std::optional<std::vector<std::string>> {
        auto items = detail_metrics::parse_listing(response);
        if (static_cast<int>(items.size()) < config.n_questions) return std::nullopt;
        items.resize(static_cast<std::size_t>(config.n_questions));
        return items;
      },
      "question generation");

  llm::EmbeddingVector original = client.embed(question, config.embedding_model);
  double total = 0.0;
  for (const auto& generated : questions) {
    total += cosine(client.embed(generated, config.embedding_model), original);
  }
  return total / config.n_questions;
}

// Cosine between the ground-truth and answer embeddings.
inline double answer_similarity(llm::Client& client, const std::string& ground_truth,
                                const std::string& answer,
                                const MetricConfig& config = {}) {
  if (detail::trim(ground_truth).empty()) {
    throw PreconditionError("similarity needs a ground truth");
  }
  if (detail::trim(answer).empty()) throw PreconditionError("similarity needs an answer");
  return cosine(client.embed(ground_truth, config.embedding_model),
                client.embed(answer, config.embedding_model));
}

// Offline fallback: token-level F1 over lowercase alphanumeric tokens.
inline double lexical_statement_f1(const std::string& ground_truth,
                                   const std::string& answer) {
  auto tokens = [](std::string_view text) {
    std::vector<std::string> out;
    std::string current;
    for (char c : text) {
      if (std::isalnum(static_cast<unsigned char>(c))) {
        current.push_back(
            static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      } else if (!current.empty()) {
        out.push_back(std::move(current));
        current.clear();
      }
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
  };
  std::vector<std::string> gt_tokens = tokens(ground_truth);
  std::vector<std::string> ans_tokens = tokens(answer);
  if (gt_tokens.empty() || ans_tokens.empty()) return 0.0;
  std::multiset<std::string> gt_set(gt_tokens.begin(), gt_tokens.end());
  std::size_t common = 0;
  for (const auto& token : ans_tokens) {
    auto it = gt_set.find(token);
    if (it != gt_set.end()) {
      gt_set.erase(it);
      ++common;
    }
  }
  if (common == 0) return 0.0;
  double precision = static_cast<double>(common) / ans_tokens.size();
  double recall = static_cast<double>(common) / gt_tokens.size();
  return 2.0 * precision * recall / (precision + recall);
}

namespace detail_metrics {

inline std::vector<std::string> extract_claims(llm::Client& client,
                                               const MetricConfig& config,
                                               const prompt::Templates& templates,
                                               const std::string& text,
                                               const std::string& what) {
  std::string prompt_text = prompt::substitute(templates.claim_extract, {{"text", text}});
  return listing_with_retry(
      client, config, prompt_text,
      [](const std::string& response) -> std::optional<std::vector<std::string>> {
        auto items = parse_listing(response);
        if (items.empty()) return std::nullopt;
        return items;
      },
      what);
}

// Verdict lines: "answer claim <i>: supported|unsupported" and
// "truth claim <j>: covered|missing". Lenient on spacing and case; strict on
// every claim having a verdict.
inline std::optional<F1Counts> parse_verdicts(const std::string& response,
                                              std::size_t answer_count,
                                              std::size_t truth_count) {
  std::vector<int> answer_verdicts(answer_count, -1);
  std::vector<int> truth_verdicts(truth_count, -1);
  for (const auto& raw : detail::split_lines(response)) {
    std::string line = detail::to_lower(std::string(detail::trim(raw)));
    if (line.empty()) continue;
    auto read_index = [&](std::string_view head) -> std::optional<std::size_t> {
      std::size_t at = line.find(head);
      if (at == std::string::npos) return std::nullopt;
      std::size_t i = at + head.size();
      while (i < line.size() && line[i] == ' ') ++i;
      std::size_t begin = i;
      while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
      if (i == begin) return std::nullopt;
      return static_cast<std::size_t>(std::stoul(line.substr(begin, i - begin)));
    };
    if (auto index = read_index("answer claim")) {
      if (*index < 1 || *index > answer_count) continue;
      // "unsupported" first: "supported" is a substring of it
      if (line.find("unsupported") != std::string::npos) {
        answer_verdicts[*index - 1] = 0;
      } else if (line.find("supported") != std::string::npos) {
        answer_verdicts[*index - 1] = 1;
      }
    } else if (auto truth_index = read_index("truth claim")) {
      if (*truth_index < 1 || *truth_index > truth_count) continue;
      if (line.find("missing") != std::string::npos) {
        truth_verdicts[*truth_index - 1] = 0;
      } else if (line.find("covered") != std::string::npos) {
        truth_verdicts[*truth_index - 1] = 1;
      }
    }
  }
  F1Counts counts;
  for (int v : answer_verdicts) {
    if (v == -1) return std::nullopt;
    if (v == 1) ++counts.tp;
    else ++counts.fp;
  }
  for (int v : truth_verdicts) {
    if (v == -1) return std::nullopt;
    if (v == 0) ++counts.fn;
  }
  return counts;
}

}  // namespace detail_metrics

// Claim-level statement F1: extract claims from both texts, ask for verdicts,
// and count TP (supported answer claims), FP (unsupported answer claims) and
// FN (ground-truth claims the answer misses).
inline double statement_f1(llm::Client& client, const std::string& ground_truth,
                           const std::string& answer, const MetricConfig& config = {},
                           const prompt::Templates& templates =
                               prompt::Templates::builtin()) {
  if (detail::trim(ground_truth).empty()) {
    throw PreconditionError("statement F1 needs a ground truth");
  }
  if (detail::trim(answer).empty()) throw PreconditionError("statement F1 needs an answer");
  if (config.lexical_f1) return lexical_statement_f1(ground_truth, answer);

  auto answer_claims = detail_metrics::extract_claims(client, config, templates, answer,
                                                      "answer claim extraction");
  auto truth_claims = detail_metrics::extract_claims(client, config, templates,
                                                     ground_truth,
                                                     "ground-truth claim extraction");
  std::string prompt_text = prompt::substitute(
      templates.claim_verdict,
      {{"ground_truth_claims", detail_metrics::numbered_listing(truth_claims)},
       {"answer_claims", detail_metrics::numbered_listing(answer_claims)}});
  F1Counts counts = detail_metrics::listing_with_retry(
      client, config, prompt_text,
      [&](const std::string& response) {
        return detail_metrics::parse_verdicts(response, answer_claims.size(),
                                              truth_claims.size());
      },
      "claim verdicts");
  return f1_from_counts(counts);
}

// correctness = (w1 * similarity + w2 * F1) / (w1 + w2)
inline double answer_correctness(llm::Client& client, const std::string& ground_truth,
                                 const std::string& answer,
                                 const MetricConfig& config = {},
                                 const prompt::Templates& templates =
                                     prompt::Templates::builtin()) {
  if (config.w1 < 0.0 || config.w2 < 0.0 || config.w1 + config.w2 <= 0.0) {
    throw PreconditionError("correctness weights must be non-negative with a positive sum");
  }
  double similarity = answer_similarity(client, ground_truth, answer, config);
  double f1 = statement_f1(client, ground_truth, answer, config, templates);
  return (config.w1 * similarity + config.w2 * f1) / (config.w1 + config.w2);
}

struct EvalScores {
  double relevancy = 0.0;
  double similarity = 0.0;
  double correctness = 0.0;
  std::string completion_model;
  std::string embedding_model;
};

// All three metrics for one (question, ground truth, answer) triple, reusing
// the similarity computation inside correctness.
inline EvalScores compute_eval_scores(llm::Client& client, const std::string& question,
                                      const std::string& ground_truth,
                                      const std::string& answer,
                                      const MetricConfig& config = {},
                                      const prompt::Templates& templates =
                                          prompt::Templates::builtin()) {
  if (config.w1 < 0.0 || config.w2 < 0.0 || config.w1 + config.w2 <= 0.0) {
    throw PreconditionError("correctness weights must be non-negative with a positive sum");
  }
  EvalScores scores;
  scores.completion_model = config.completion_model;
  scores.embedding_model = config.embedding_model;
  scores.relevancy = answer_relevancy(client, question, answer, config, templates);
  scores.similarity = answer_similarity(client, ground_truth, answer, config);
  double f1 = statement_f1(client, ground_truth, answer, config, templates);
  scores.correctness =
      (config.w1 * scores.similarity + config.w2 * f1) / (config.w1 + config.w2);
  return scores;
}

}  // namespace venndi::metrics
