#pragma once

// Subcommand implementations behind the venndi binary: answer, compare,
// permute, eval, report. Kept header-level and transport-agnostic so tests
// drive them in-process with scripted transports.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "venndi/bias.hpp"
#include "venndi/corpus.hpp"
#include "venndi/error.hpp"
#include "venndi/judge.hpp"
#include "venndi/llm.hpp"
#include "venndi/metrics.hpp"
#include "venndi/prompt.hpp"
#include "venndi/setalg.hpp"
#include "venndi/vdparse.hpp"

namespace venndi::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitCacheMiss = 3;
inline constexpr int kExitParseFailure = 4;
inline constexpr int kExitInvariance = 5;

struct RunConfig {
  std::string base_url = "https://api.openai.com";
  std::string model = "gpt-4";
  std::string embedding_model = "text-embedding-3-small";
  double temperature = 0.1;
  llm::CacheMode cache_mode = llm::CacheMode::replay_strict;
  std::string cache_dir = "replay_cache";
  int parallelism = 1;
  int n_questions = 3;
  double w1 = 0.25;
  double w2 = 0.75;
  bool lexical_f1 = false;
  std::uint64_t blind_seed = 17;
  std::string output_dir = "out";
  std::string assets_dir;  // empty: use built-in templates and rubrics
  std::string credential_env = "OPENAI_API_KEY";  // env var NAME, never the value
  prompt::OutputSpec output_spec;
  bool include_peripheral = false;
};

namespace detail_cli {

inline bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ValidationError("config key \"" + key + "\" expects a boolean, got \"" + value +
                        "\"",
                        {key});
}

template <typename T>
T parse_number(const std::string& value, const std::string& key) {
  std::istringstream in(value);
  T out;
  in >> out;
  if (in.fail() || !in.eof()) {
    throw ValidationError("config key \"" + key + "\" expects a number, got \"" + value +
                          "\"",
                          {key});
  }
  return out;
}

}  // namespace detail_cli

// Applies one key=value entry; shared by the config file and VENNDI_* env
// overrides so both speak the same vocabulary.
inline void apply_config_entry(RunConfig& config, const std::string& key,
                               const std::string& value) {
  using detail_cli::parse_bool;
  using detail_cli::parse_number;
  if (key == "base_url") config.base_url = value;
  else if (key == "model") config.model = value;
  else if (key == "embedding_model") config.embedding_model = value;
  else if (key == "temperature") config.temperature = parse_number<double>(value, key);
  else if (key == "cache_mode") config.cache_mode = llm::parse_cache_mode(value);
  else if (key == "cache_dir") config.cache_dir = value;
  else if (key == "parallelism") config.parallelism = parse_number<int>(value, key);
  else if (key == "n_questions") config.n_questions = parse_number<int>(value, key);
  else if (key == "w1") config.w1 = parse_number<double>(value, key);
  else if (key == "w2") config.w2 = parse_number<double>(value, key);
  else if (key == "lexical_f1") config.lexical_f1 = parse_bool(value, key);
  else if (key == "blind_seed") config.blind_seed = parse_number<std::uint64_t>(value, key);
  else if (key == "output_dir") config.output_dir = value;
  else if (key == "assets_dir") config.assets_dir = value;
  else if (key == "credential_env") config.credential_env = value;
  else if (key == "include_peripheral") config.include_peripheral = parse_bool(value, key);
  else if (key == "answer_style") {
    if (value == "concise") {
      config.output_spec.answer_style = prompt::AnswerStyle::concise_single_line;
    } else if (value == "detailed") {
      config.output_spec.answer_style = prompt::AnswerStyle::detailed;
    } else {
      throw ValidationError("config key \"answer_style\" expects concise|detailed", {key});
    }
  } else if (key == "citation_required") {
    config.output_spec.citation_required = parse_bool(value, key);
  } else if (key == "extra_instructions") {
    config.output_spec.extra_instructions = value;
  } else {
    throw ValidationError("unknown config key \"" + key + "\"", {key});
  }
}

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "base_url",     "model",         "embedding_model", "temperature",
      "cache_mode",   "cache_dir",     "parallelism",     "n_questions",
      "w1",           "w2",            "lexical_f1",      "blind_seed",
      "output_dir",   "assets_dir",    "credential_env",  "include_peripheral",
      "answer_style", "citation_required", "extra_instructions"};
  return keys;
}

// Flat key=value file; # starts a comment. Unknown keys are errors.
inline void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open config file: " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = detail::trim(line);
    if (view.empty() || view.starts_with("#")) continue;
    std::size_t eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("config line " + std::to_string(line_no) +
                           ": expected key=value, got \"" + std::string(view) + "\"",
                       line_no);
    }
    std::string key(detail::trim(view.substr(0, eq)));
    std::string value(detail::trim(view.substr(eq + 1)));
    apply_config_entry(config, key, value);
  }
}

// VENNDI_<KEY> environment variables override file values; flags override both.
inline void apply_env_overrides(RunConfig& config) {
  for (const auto& key : config_keys()) {
    std::string var = "VENNDI_";
    for (char c : key) var.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    if (const char* value = std::getenv(var.c_str()); value != nullptr) {
      apply_config_entry(config, key, value);
    }
  }
}

inline nlohmann::json config_to_json(const RunConfig& config) {
  return nlohmann::json{
      {"base_url", config.base_url},
      {"model", config.model},
      {"embedding_model", config.embedding_model},
      {"temperature", config.temperature},
      {"cache_mode", llm::to_string(config.cache_mode)},
      {"cache_dir", config.cache_dir},
      {"parallelism", config.parallelism},
      {"n_questions", config.n_questions},
      {"w1", config.w1},
      {"w2", config.w2},
      {"lexical_f1", config.lexical_f1},
      {"blind_seed", config.blind_seed},
      {"output_dir", config.output_dir},
      {"assets_dir", config.assets_dir},
      {"credential_env", config.credential_env},
      {"include_peripheral", config.include_peripheral},
      {"answer_style", config.output_spec.answer_style == prompt::AnswerStyle::detailed
                           ? "detailed"
                           : "concise"},
      {"citation_required", config.output_spec.citation_required},
      {"extra_instructions", config.output_spec.extra_instructions}};
}

// Snapshot of the effective configuration next to the outputs it produced.
// Carries no timestamps (outputs must be byte-reproducible) and no secrets
// (credential_env is the variable's name, not its value).
inline void write_run_config_snapshot(const RunConfig& config,
                                      const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "run_config.json", std::ios::binary);
  if (!out) throw Error("cannot write run config snapshot in " + dir.string());
  out << config_to_json(config).dump(2) << "\n";
}

inline std::string format_fixed4(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", value);
  return buf;
}

inline metrics::MetricConfig metric_config(const RunConfig& config) {
  metrics::MetricConfig out;
  out.n_questions = config.n_questions;
  out.w1 = config.w1;
  out.w2 = config.w2;
  out.completion_model = config.model;
  out.embedding_model = config.embedding_model;
  out.temperature = config.temperature;
  out.lexical_f1 = config.lexical_f1;
  return out;
}

// ---------------------------------------------------------------------------
// Score rows

struct ScoreRow {
  std::size_t sample_index = 0;
  corpus::DatasetTag dataset_tag = corpus::DatasetTag::custom;
  corpus::DocType doc_type = corpus::DocType::multi_doc;
  prompt::PromptKind kind = prompt::PromptKind::vd;
  std::string answer;
  double relevancy = 0.0;
  double similarity = 0.0;
  double correctness = 0.0;
  int judge1 = 0;
  int judge2 = 0;
  bool error = false;
  std::string error_message;
};

inline nlohmann::json row_to_json(const ScoreRow& row) {
  nlohmann::json obj{{"sample_index", row.sample_index},
                     {"dataset_tag", corpus::to_string(row.dataset_tag)},
                     {"doc_type", corpus::to_string(row.doc_type)},
                     {"prompt_kind", prompt::to_string(row.kind)},
                     {"answer", row.answer},
                     {"error", row.error},
                     {"error_message", row.error_message}};
  if (row.error) {
    obj["relevancy"] = nullptr;
    obj["similarity"] = nullptr;
    obj["correctness"] = nullptr;
    obj["judge1"] = nullptr;
    obj["judge2"] = nullptr;
  } else {
    obj["relevancy"] = row.relevancy;
    obj["similarity"] = row.similarity;
    obj["correctness"] = row.correctness;
    obj["judge1"] = row.judge1;
    obj["judge2"] = row.judge2;
  }
  return obj;
}

inline ScoreRow row_from_json(const nlohmann::json& obj) {
  if (!obj.is_object()) throw ParseError("score row must be a JSON object");
  ScoreRow row;
  try {
    row.sample_index = obj.at("sample_index").get<std::size_t>();
    row.dataset_tag = corpus::parse_dataset_tag(obj.at("dataset_tag").get<std::string>());
    row.doc_type = corpus::parse_doc_type(obj.at("doc_type").get<std::string>());
    row.kind = prompt::parse_prompt_kind(obj.at("prompt_kind").get<std::string>());
    row.answer = obj.value("answer", std::string{});
    row.error = obj.value("error", false);
    row.error_message = obj.value("error_message", std::string{});
    if (!row.error) {
      row.relevancy = obj.at("relevancy").get<double>();
      row.similarity = obj.at("similarity").get<double>();
      row.correctness = obj.at("correctness").get<double>();
      row.judge1 = obj.at("judge1").get<int>();
      row.judge2 = obj.at("judge2").get<int>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed score row: ") + e.what());
  }
  return row;
}

inline std::vector<ScoreRow> load_rows(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open rows file: " + path.string());
  std::vector<ScoreRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    try {
      rows.push_back(row_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("rows line " + std::to_string(line_no) + ": invalid JSON: " +
                           e.what(),
                       line_no);
    } catch (const ParseError& e) {
      throw ParseError("rows line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return rows;
}

inline void save_rows(const std::vector<ScoreRow>& rows,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write rows file: " + path.string());
  for (const auto& row : rows) out << row_to_json(row).dump() << "\n";
}

struct ScoreKey {
  corpus::DatasetTag tag = corpus::DatasetTag::custom;
  prompt::PromptKind kind = prompt::PromptKind::vd;

  bool operator<(const ScoreKey& other) const {
    if (tag != other.tag) return static_cast<int>(tag) < static_cast<int>(other.tag);
    return static_cast<int>(kind) < static_cast<int>(other.kind);
  }
};

struct ScoreCell {
  double relevancy = 0.0;
  double similarity = 0.0;
  double correctness = 0.0;
  double judge1 = 0.0;
  double judge2 = 0.0;
  std::size_t count = 0;        // rows that scored successfully
  std::size_t error_count = 0;  // rows excluded from the means
};

// Means per (dataset, prompt kind); error rows are excluded from the means
// and surfaced through error_count.
inline std::map<ScoreKey, ScoreCell> aggregate_scores(const std::vector<ScoreRow>& rows) {
  std::map<ScoreKey, ScoreCell> cells;
  for (const auto& row : rows) {
    ScoreCell& cell = cells[ScoreKey{row.dataset_tag, row.kind}];
    if (row.error) {
      ++cell.error_count;
      continue;
    }
    cell.relevancy += row.relevancy;
    cell.similarity += row.similarity;
    cell.correctness += row.correctness;
    cell.judge1 += row.judge1;
    cell.judge2 += row.judge2;
    ++cell.count;
  }
  for (auto& [key, cell] : cells) {
    if (cell.count == 0) continue;
    double n = static_cast<double>(cell.count);
    cell.relevancy /= n;
    cell.similarity /= n;
    cell.correctness /= n;
    cell.judge1 /= n;
    cell.judge2 /= n;
  }
  return cells;
}

inline std::string render_report_md(const std::vector<ScoreRow>& rows) {
  auto cells = aggregate_scores(rows);
  std::string out = "# Evaluation report\n\n## Answer quality metrics\n\n";
  out += "| Dataset | Prompt | Relevancy | Similarity | Correctness | Samples | Errors |\n";
  out += "| --- | --- | --- | --- | --- | --- | --- |\n";
  for (const auto& [key, cell] : cells) {
    out += "| " + corpus::to_string(key.tag) + " | " + prompt::to_string(key.kind) +
           " | " + format_fixed4(cell.relevancy) + " | " + format_fixed4(cell.similarity) +
           " | " + format_fixed4(cell.correctness) + " | " + std::to_string(cell.count) +
           " | " + std::to_string(cell.error_count) + " |\n";
  }
  out += "\n## Judge scores\n\n";
  out += "| Dataset | Prompt | Judge 1 (of 10) | Judge 2 (of 5) | Samples | Errors |\n";
  out += "| --- | --- | --- | --- | --- | --- |\n";
  for (const auto& [key, cell] : cells) {
    out += "| " + corpus::to_string(key.tag) + " | " + prompt::to_string(key.kind) +
           " | " + format_fixed4(cell.judge1) + " | " + format_fixed4(cell.judge2) +
           " | " + std::to_string(cell.count) + " | " + std::to_string(cell.error_count) +
           " |\n";
  }
  return out;
}

inline std::string render_report_csv(const std::vector<ScoreRow>& rows) {
  auto cells = aggregate_scores(rows);
  std::string out =
      "dataset,prompt,relevancy,similarity,correctness,judge1,judge2,samples,errors\n";
  for (const auto& [key, cell] : cells) {
    out += corpus::to_string(key.tag) + "," + prompt::to_string(key.kind) + "," +
           format_fixed4(cell.relevancy) + "," + format_fixed4(cell.similarity) + "," +
           format_fixed4(cell.correctness) + "," + format_fixed4(cell.judge1) + "," +
           format_fixed4(cell.judge2) + "," + std::to_string(cell.count) + "," +
           std::to_string(cell.error_count) + "\n";
  }
  return out;
}

// Long-form per-sample values for external plotting.
inline std::string render_plot_data_csv(const std::vector<ScoreRow>& rows) {
  std::string out = "sample_index,dataset,prompt,metric,value\n";
  for (const auto& row : rows) {
    if (row.error) continue;
    auto emit = [&](const char* metric, double value) {
      out += std::to_string(row.sample_index) + "," + corpus::to_string(row.dataset_tag) +
             "," + prompt::to_string(row.kind) + "," + metric + "," +
             format_fixed4(value) + "\n";
    };
    emit("relevancy", row.relevancy);
    emit("similarity", row.similarity);
    emit("correctness", row.correctness);
    emit("judge1", static_cast<double>(row.judge1));
    emit("judge2", static_cast<double>(row.judge2));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline plumbing

struct Pipeline {
  RunConfig config;
  std::shared_ptr<llm::Client> client;
  prompt::Templates templates;
  judge::JudgeRubric rubric1;
  judge::JudgeRubric rubric2;
};

inline Pipeline make_pipeline(const RunConfig& config,
                              std::shared_ptr<llm::Transport> transport) {
  Pipeline pipeline;
  pipeline.config = config;
  pipeline.client = std::make_shared<llm::Client>(
      std::move(transport), llm::ReplayCache(config.cache_dir, config.cache_mode));
  if (config.assets_dir.empty()) {
    pipeline.templates = prompt::Templates::builtin();
    pipeline.rubric1 = judge::JudgeRubric::judge1_builtin();
    pipeline.rubric2 = judge::JudgeRubric::judge2_builtin();
  } else {
    std::filesystem::path dir(config.assets_dir);
    pipeline.templates = prompt::Templates::load_dir(dir / "prompts");
    pipeline.rubric1 = judge::JudgeRubric::load_file(dir / "rubrics" / "judge1.txt");
    pipeline.rubric2 = judge::JudgeRubric::load_file(dir / "rubrics" / "judge2.txt");
  }
  return pipeline;
}

struct AnswerResult {
  std::string raw;     // full model output
  std::string answer;  // final answer (VD) or the raw output (standard)
  std::vector<vdparse::CitationGroup> citations;
  std::optional<setalg::SetExpr> xi_prime;
  std::vector<std::string> warnings;
};

inline AnswerResult run_answer(Pipeline& pipeline, const corpus::Sample& sample,
                               prompt::PromptKind kind) {
  prompt::PromptText prompt_text =
      prompt::build_prompt(sample, kind, pipeline.config.output_spec, pipeline.templates);
  AnswerResult result;
  if (kind == prompt::PromptKind::vd) {
    auto [analysis, raw] =
        bias::answer_vd(*pipeline.client, prompt_text.text, prompt_text.doc_labels,
                        pipeline.config.model, pipeline.config.temperature);
    result.raw = raw;
    result.answer = analysis.final_answer;
    result.citations = analysis.citations;
    result.warnings = analysis.warnings;
    result.xi_prime = setalg::derive_xi_prime(analysis, &result.warnings);
  } else {
    result.raw = pipeline.client->complete({pipeline.config.model, prompt_text.text,
                                            pipeline.config.temperature, std::nullopt});
    result.answer = result.raw;
    result.citations =
        vdparse::extract_citations(result.raw, prompt_text.doc_labels, &result.warnings);
  }
  return result;
}

// Seam for tests: replaces the whole per-sample scoring pipeline.
class EvalBackend {
 public:
  virtual ~EvalBackend() = default;
  virtual std::vector<ScoreRow> score_sample(const corpus::Sample& sample,
                                             std::size_t index,
                                             const std::vector<prompt::PromptKind>& kinds) = 0;
};

namespace detail_cli {

// Data-level problems become error rows; infrastructure problems (cache miss,
// transport failures) abort the run so the exit code can say what happened.
inline bool is_row_level_error(const Error& e) {
  if (dynamic_cast<const CacheMissError*>(&e)) return false;
  if (dynamic_cast<const TransportError*>(&e)) return false;
  return true;
}

class PipelineEvalBackend : public EvalBackend {
 public:
  explicit PipelineEvalBackend(Pipeline& pipeline) : pipeline_(pipeline) {}

  std::vector<ScoreRow> score_sample(const corpus::Sample& sample, std::size_t index,
                                     const std::vector<prompt::PromptKind>& kinds) override {
    std::vector<ScoreRow> rows;
    std::vector<std::optional<AnswerResult>> answers(kinds.size());
    for (std::size_t k = 0; k < kinds.size(); ++k) {
      rows.push_back(make_base_row(sample, index, kinds[k]));
      try {
        answers[k] = run_answer(pipeline_, sample, kinds[k]);
        rows[k].answer = answers[k]->answer;
      } catch (const Error& e) {
        if (!is_row_level_error(e)) throw;
        rows[k].error = true;
        rows[k].error_message = e.what();
      }
    }

    // Metric scoring in declared kind order.
    for (std::size_t k = 0; k < kinds.size(); ++k) {
      if (rows[k].error) continue;
      try {
        if (!sample.ground_truth) {
          throw PreconditionError(
              "sample has no ground truth; similarity and correctness are undefined");
        }
        metrics::EvalScores scores = metrics::compute_eval_scores(
            *pipeline_.client, sample.query, *sample.ground_truth, rows[k].answer,
            metric_config(pipeline_.config), pipeline_.templates);
        rows[k].relevancy = scores.relevancy;
        rows[k].similarity = scores.similarity;
        rows[k].correctness = scores.correctness;
      } catch (const Error& e) {
        if (!is_row_level_error(e)) throw;
        rows[k].error = true;
        rows[k].error_message = e.what();
      }
    }

    // Judge scoring; with two answers the call order is blinded by seed so a
    // live judge cannot learn a fixed system order.
    std::vector<std::size_t> order(kinds.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    if (kinds.size() == 2) {
      judge::BlindPair pair =
          judge::blind_pair(prompt::to_string(kinds[0]), prompt::to_string(kinds[1]),
                            pipeline_.config.blind_seed, std::to_string(index));
      if (pair.swapped) std::swap(order[0], order[1]);
    }
    std::string knowledge = prompt::render_context_block(sample.documents);
    judge::JudgeConfig judge_config{pipeline_.config.model, pipeline_.config.temperature};
    for (std::size_t slot : order) {
      if (rows[slot].error) continue;
      try {
        rows[slot].judge1 = judge::judge1_score(*pipeline_.client, sample.query, knowledge,
                                                rows[slot].answer, pipeline_.rubric1,
                                                judge_config)
                                .total();
        if (!sample.ground_truth) {
          throw PreconditionError("sample has no ground truth; judge 2 is undefined");
        }
        rows[slot].judge2 = judge::judge2_score(*pipeline_.client, *sample.ground_truth,
                                                rows[slot].answer, pipeline_.rubric2,
                                                judge_config)
                                .total();
      } catch (const Error& e) {
        if (!is_row_level_error(e)) throw;
        rows[slot].error = true;
        rows[slot].error_message = e.what();
      }
    }
    return rows;
  }

 private:
  static ScoreRow make_base_row(const corpus::Sample& sample, std::size_t index,
                                prompt::PromptKind kind) {
    ScoreRow row;
    row.sample_index = index;
    row.dataset_tag = sample.dataset_tag;
    row.doc_type = sample.doc_type;
    row.kind = kind;
    return row;
  }

  Pipeline& pipeline_;
};

}  // namespace detail_cli

// ---------------------------------------------------------------------------
// Subcommands

inline int cmd_answer(const RunConfig& config, std::shared_ptr<llm::Transport> transport,
                      const std::filesystem::path& dataset_path, std::size_t index,
                      prompt::PromptKind kind, std::ostream& out, std::ostream& err) {
  std::vector<corpus::Sample> samples = corpus::load_dataset(dataset_path);
  if (index >= samples.size()) {
    err << "error: --index " << index << " is out of range; dataset has "
        << samples.size() << " samples\n";
    return kExitUsage;
  }
  Pipeline pipeline = make_pipeline(config, std::move(transport));
  AnswerResult result = run_answer(pipeline, samples[index], kind);

  nlohmann::json citations = nlohmann::json::array();
  for (const auto& group : result.citations) citations.push_back(group.labels);
  nlohmann::json output{{"prompt_kind", prompt::to_string(kind)},
                        {"answer", result.answer},
                        {"citations", std::move(citations)},
                        {"warnings", result.warnings}};
  if (result.xi_prime) {
    output["xi_prime"] = setalg::render_set_notation(*result.xi_prime);
  } else {
    output["xi_prime"] = nullptr;
  }
  out << output.dump(2) << "\n";
  return kExitOk;
}

inline int cmd_compare(const RunConfig& config, std::shared_ptr<llm::Transport> transport,
                       const std::filesystem::path& dataset_path,
                       std::optional<std::size_t> index, std::ostream& out,
                       std::ostream& err) {
  std::vector<corpus::Sample> samples = corpus::load_dataset(dataset_path);
  if (index && *index >= samples.size()) {
    err << "error: --index " << *index << " is out of range; dataset has "
        << samples.size() << " samples\n";
    return kExitUsage;
  }
  Pipeline pipeline = make_pipeline(config, std::move(transport));

  std::filesystem::create_directories(config.output_dir);
  std::filesystem::path rows_path =
      std::filesystem::path(config.output_dir) / "compare_rows.jsonl";
  std::ofstream rows_out(rows_path, std::ios::binary);
  if (!rows_out) throw Error("cannot write " + rows_path.string());

  std::size_t begin = index.value_or(0);
  std::size_t end = index ? *index + 1 : samples.size();
  std::size_t compared = 0;
  for (std::size_t i = begin; i < end; ++i) {
    nlohmann::json row{{"sample_index", i}, {"query", samples[i].query}};
    try {
      AnswerResult vd = run_answer(pipeline, samples[i], prompt::PromptKind::vd);
      AnswerResult standard = run_answer(pipeline, samples[i], prompt::PromptKind::standard);
      nlohmann::json vd_citations = nlohmann::json::array();
      for (const auto& group : vd.citations) vd_citations.push_back(group.labels);
      nlohmann::json standard_citations = nlohmann::json::array();
      for (const auto& group : standard.citations) standard_citations.push_back(group.labels);
      row["vd_answer"] = vd.answer;
      row["standard_answer"] = standard.answer;
      row["vd_citations"] = std::move(vd_citations);
      row["standard_citations"] = std::move(standard_citations);
      row["vd_xi_prime"] = vd.xi_prime ? nlohmann::json(setalg::render_set_notation(*vd.xi_prime))
                                       : nlohmann::json(nullptr);
      row["error"] = false;
      ++compared;
    } catch (const Error& e) {
      if (!detail_cli::is_row_level_error(e)) throw;
      row["error"] = true;
      row["error_message"] = e.what();
    }
    rows_out << row.dump() << "\n";
  }
  write_run_config_snapshot(config, config.output_dir);
  out << "compared " << compared << " of " << (end - begin) << " samples -> "
      << rows_path.string() << "\n";
  return kExitOk;
}

inline std::vector<int> parse_shifts(const std::string& spec, int n_docs) {
  std::string text(detail::trim(spec));
  std::vector<int> shifts;
  if (detail::to_lower(text) == "all") {
    for (int s = 0; s < n_docs; ++s) shifts.push_back(s);
    return shifts;
  }
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t comma = text.find(',', start);
    std::string part(detail::trim(text.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (part.empty()) {
      throw ValidationError("--shifts expects \"all\" or a comma-separated list of shifts",
                            {spec});
    }
    int value = detail_cli::parse_number<int>(part, "shifts");
    if (value < 0 || value >= n_docs) {
      throw ValidationError("shift " + part + " is out of range [0, " +
                                std::to_string(n_docs) + ")",
                            {part});
    }
    shifts.push_back(value);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (shifts.empty()) {
    throw ValidationError("--shifts expects at least one shift", {spec});
  }
  return shifts;
}

inline int cmd_permute(const RunConfig& config, std::shared_ptr<llm::Transport> transport,
                       const std::filesystem::path& dataset_path, std::size_t index,
                       prompt::PromptKind kind, const std::string& shifts_spec,
                       std::ostream& out, std::ostream& err) {
  std::vector<corpus::Sample> samples = corpus::load_dataset(dataset_path);
  if (index >= samples.size()) {
    err << "error: --index " << index << " is out of range; dataset has "
        << samples.size() << " samples\n";
    return kExitUsage;
  }
  const corpus::Sample& sample = samples[index];
  std::vector<int> shifts;
  try {
    shifts = parse_shifts(shifts_spec, static_cast<int>(sample.documents.size()));
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  Pipeline pipeline = make_pipeline(config, std::move(transport));
  bias::PermutationConfig perm_config;
  perm_config.model = config.model;
  perm_config.temperature = config.temperature;
  perm_config.output_spec = config.output_spec;
  perm_config.include_peripheral = config.include_peripheral;
  bias::BiasReport report = bias::run_permutation_passes(
      *pipeline.client, sample, kind, shifts, perm_config, pipeline.templates);

  std::filesystem::create_directories(config.output_dir);
  std::filesystem::path report_path =
      std::filesystem::path(config.output_dir) / "bias_report.json";
  {
    std::ofstream report_out(report_path, std::ios::binary);
    if (!report_out) throw Error("cannot write " + report_path.string());
    report_out << report.to_json().dump(2) << "\n";
  }
  write_run_config_snapshot(config, config.output_dir);
  out << report.to_json().dump(2) << "\n";

  if (kind == prompt::PromptKind::vd && !report.invariant) {
    err << "error: VD analysis is not invariant under cyclic relabeling\n";
    return kExitInvariance;
  }
  return kExitOk;
}

inline int cmd_eval(const RunConfig& config, std::shared_ptr<llm::Transport> transport,
                    const std::filesystem::path& dataset_path,
                    const std::vector<prompt::PromptKind>& kinds, std::ostream& out,
                    std::ostream& err, EvalBackend* backend_override = nullptr) {
  if (kinds.empty()) {
    err << "error: eval needs at least one prompt kind\n";
    return kExitUsage;
  }
  if (config.parallelism < 1) {
    err << "error: parallelism must be >= 1\n";
    return kExitUsage;
  }
  std::vector<corpus::Sample> samples = corpus::load_dataset(dataset_path);
  Pipeline pipeline = make_pipeline(config, std::move(transport));
  detail_cli::PipelineEvalBackend default_backend(pipeline);
  EvalBackend& backend = backend_override ? *backend_override : default_backend;

  std::vector<std::vector<ScoreRow>> per_sample(samples.size());
  std::vector<std::exception_ptr> failures(samples.size());
  std::atomic<std::size_t> next{0};
  std::size_t worker_count =
      std::min<std::size_t>(static_cast<std::size_t>(config.parallelism), samples.size());
  worker_count = std::max<std::size_t>(worker_count, 1);

  auto work = [&]() {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= samples.size()) break;
      try {
        per_sample[i] = backend.score_sample(samples[i], i, kinds);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  if (worker_count <= 1) {
    work();
  } else {
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < worker_count; ++w) workers.emplace_back(work);
    for (auto& worker : workers) worker.join();
  }
  for (const auto& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }

  // Output order is input order, regardless of worker scheduling.
  std::vector<ScoreRow> rows;
  for (auto& sample_rows : per_sample) {
    for (auto& row : sample_rows) rows.push_back(std::move(row));
  }

  std::filesystem::create_directories(config.output_dir);
  std::filesystem::path rows_path =
      std::filesystem::path(config.output_dir) / "eval_rows.jsonl";
  save_rows(rows, rows_path);
  write_run_config_snapshot(config, config.output_dir);

  std::size_t error_rows = 0;
  for (const auto& row : rows) error_rows += row.error ? 1u : 0u;
  out << render_report_md(rows);
  out << "\nwrote " << rows.size() << " rows (" << error_rows << " errors) -> "
      << rows_path.string() << "\n";
  return kExitOk;
}

inline int cmd_report(const std::filesystem::path& rows_path, const std::string& format,
                      const std::filesystem::path& output_dir, std::ostream& out,
                      std::ostream& err) {
  if (format != "md" && format != "csv") {
    err << "error: --format expects md or csv, got \"" << format << "\"\n";
    return kExitUsage;
  }
  std::vector<ScoreRow> rows = load_rows(rows_path);
  std::filesystem::create_directories(output_dir);

  std::filesystem::path report_path = output_dir / ("report." + format);
  std::string report =
      format == "md" ? render_report_md(rows) : render_report_csv(rows);
  {
    std::ofstream report_out(report_path, std::ios::binary);
    if (!report_out) throw Error("cannot write " + report_path.string());
    report_out << report;
  }
  std::filesystem::path plot_path = output_dir / "plot_data.csv";
  {
    std::ofstream plot_out(plot_path, std::ios::binary);
    if (!plot_out) throw Error("cannot write " + plot_path.string());
    plot_out << render_plot_data_csv(rows);
  }
  out << report;
  out << "\nwrote " << report_path.string() << " and " << plot_path.string() << "\n";
  return kExitOk;
}

// Maps the library's exception hierarchy onto the documented exit codes.
template <typename Fn>
int run_guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const CacheMissError& e) {
    err << "error: " << e.what() << "\n";
    return kExitCacheMiss;
  } catch (const UnparseableResponseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitParseFailure;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitParseFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace venndi::cli
