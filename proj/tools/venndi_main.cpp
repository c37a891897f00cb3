// venndi: Venn-diagram prompting for multi-document QA.

#include <cstdint>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "venndi/cli.hpp"
#include "venndi/http_transport.hpp"

namespace {

using venndi::cli::RunConfig;

struct FlagValues {
  std::string config_path;
  std::string cache_mode;
  std::string cache_dir;
  std::string model;
  std::string embedding_model;
  std::string base_url;
  std::string output_dir;
  std::string assets_dir;
  std::string credential_env;
  std::string style;
  std::string extra_instructions;
  double temperature = 0.1;
  double w1 = 0.25;
  double w2 = 0.75;
  int parallelism = 1;
  int n_questions = 3;
  std::uint64_t blind_seed = 17;
  bool lexical_f1 = false;
  bool no_citations = false;
  bool include_peripheral = false;
};

// Precedence: defaults < config file < VENNDI_* env < explicit flags.
void add_global_flags(CLI::App& app, FlagValues& flags) {
  app.add_option("--config", flags.config_path, "key=value config file");
  app.add_option("--cache", flags.cache_mode, "cache mode: record|replay|off");
  app.add_option("--cache-dir", flags.cache_dir, "replay cache directory");
  app.add_option("--model", flags.model, "completion model id");
  app.add_option("--embedding-model", flags.embedding_model, "embedding model id");
  app.add_option("--base-url", flags.base_url, "API base URL");
  app.add_option("--temperature", flags.temperature, "sampling temperature");
  app.add_option("--parallel", flags.parallelism, "worker threads for eval");
  app.add_option("--n-questions", flags.n_questions, "questions generated per relevancy call");
  app.add_option("--w1", flags.w1, "correctness weight for similarity");
  app.add_option("--w2", flags.w2, "correctness weight for statement F1");
  app.add_option("--blind-seed", flags.blind_seed, "seed for blind A/B judge ordering");
  app.add_option("--out", flags.output_dir, "output directory");
  app.add_option("--assets-dir", flags.assets_dir, "directory with prompts/ and rubrics/");
  app.add_option("--credential-env", flags.credential_env,
                 "environment variable holding the API key");
  app.add_option("--style", flags.style, "answer style: concise|detailed");
  app.add_option("--extra-instructions", flags.extra_instructions,
                 "extra instruction appended to the final step");
  app.add_flag("--lexical-f1", flags.lexical_f1,
               "use offline lexical F1 instead of claim verdicts");
  app.add_flag("--no-citations", flags.no_citations, "do not ask for inline citations");
  app.add_flag("--include-peripheral", flags.include_peripheral,
               "count peripheral citations in the permutation invariant");
}

int apply_flags(const CLI::App& app, const FlagValues& flags, RunConfig& config,
                std::ostream& err) {
  try {
    if (app.count("--config")) venndi::cli::apply_config_file(config, flags.config_path);
    venndi::cli::apply_env_overrides(config);
    if (app.count("--cache")) config.cache_mode = venndi::llm::parse_cache_mode(flags.cache_mode);
    if (app.count("--cache-dir")) config.cache_dir = flags.cache_dir;
    if (app.count("--model")) config.model = flags.model;
    if (app.count("--embedding-model")) config.embedding_model = flags.embedding_model;
    if (app.count("--base-url")) config.base_url = flags.base_url;
    if (app.count("--temperature")) config.temperature = flags.temperature;
    if (app.count("--parallel")) config.parallelism = flags.parallelism;
    if (app.count("--n-questions")) config.n_questions = flags.n_questions;
    if (app.count("--w1")) config.w1 = flags.w1;
    if (app.count("--w2")) config.w2 = flags.w2;
    if (app.count("--blind-seed")) config.blind_seed = flags.blind_seed;
    if (app.count("--out")) config.output_dir = flags.output_dir;
    if (app.count("--assets-dir")) config.assets_dir = flags.assets_dir;
    if (app.count("--credential-env")) config.credential_env = flags.credential_env;
    if (app.count("--style")) {
      venndi::cli::apply_config_entry(config, "answer_style", flags.style);
    }
    if (app.count("--extra-instructions")) {
      config.output_spec.extra_instructions = flags.extra_instructions;
    }
    if (app.count("--lexical-f1")) config.lexical_f1 = true;
    if (app.count("--no-citations")) config.output_spec.citation_required = false;
    if (app.count("--include-peripheral")) config.include_peripheral = true;
  } catch (const venndi::Error& e) {
    err << "error: " << e.what() << "\n";
    return venndi::cli::kExitUsage;
  }
  return venndi::cli::kExitOk;
}

std::shared_ptr<venndi::llm::Transport> make_transport(const RunConfig& config) {
  // replay never talks to the network; don't even construct the transport
  if (config.cache_mode == venndi::llm::CacheMode::replay_strict) return nullptr;
  return std::make_shared<venndi::llm::HttpTransport>(config.base_url,
                                                      config.credential_env);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Venn-diagram prompting for multi-document question answering"};
  app.require_subcommand(1);
  app.fallthrough();

  FlagValues flags;
  add_global_flags(app, flags);

  std::string dataset;
  std::size_t index = 0;
  std::string prompt_kind = "vd";
  std::string shifts = "all";
  std::string rows_path;
  std::string format = "md";

  CLI::App* answer = app.add_subcommand("answer", "answer one sample");
  answer->add_option("--dataset", dataset, "JSONL dataset")->required();
  answer->add_option("--index", index, "sample index");
  answer->add_option("--prompt", prompt_kind, "vd|standard");

  CLI::App* compare = app.add_subcommand("compare", "VD vs standard, side by side");
  compare->add_option("--dataset", dataset, "JSONL dataset")->required();
  compare->add_option("--index", index, "sample index (default: whole dataset)");

  CLI::App* permute = app.add_subcommand("permute", "cyclic relabeling bias experiment");
  permute->add_option("--dataset", dataset, "JSONL dataset")->required();
  permute->add_option("--index", index, "sample index");
  permute->add_option("--prompt", prompt_kind, "vd|standard");
  permute->add_option("--shifts", shifts, "\"all\" or comma-separated shifts");

  CLI::App* eval = app.add_subcommand("eval", "score a dataset");
  eval->add_option("--dataset", dataset, "JSONL dataset")->required();
  std::string eval_kinds = "both";
  eval->add_option("--prompt", eval_kinds, "vd|standard|both");

  CLI::App* report = app.add_subcommand("report", "render tables from eval rows");
  report->add_option("--rows", rows_path, "eval_rows.jsonl")->required();
  report->add_option("--format", format, "md|csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? venndi::cli::kExitOk : venndi::cli::kExitUsage;
  }

  RunConfig config;
  if (int code = apply_flags(app, flags, config, std::cerr);
      code != venndi::cli::kExitOk) {
    return code;
  }

  auto parse_kind = [&](const std::string& text,
                        std::optional<venndi::prompt::PromptKind>& out) -> int {
    try {
      out = venndi::prompt::parse_prompt_kind(text);
      return venndi::cli::kExitOk;
    } catch (const venndi::Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return venndi::cli::kExitUsage;
    }
  };

  return venndi::cli::run_guarded(std::cerr, [&]() -> int {
    if (app.got_subcommand(answer)) {
      std::optional<venndi::prompt::PromptKind> kind;
      if (int code = parse_kind(prompt_kind, kind); code != venndi::cli::kExitOk) {
        return code;
      }
      return venndi::cli::cmd_answer(config, make_transport(config), dataset, index,
                                     *kind, std::cout, std::cerr);
    }
    if (app.got_subcommand(compare)) {
      std::optional<std::size_t> only;
      if (compare->count("--index")) only = index;
      return venndi::cli::cmd_compare(config, make_transport(config), dataset, only,
                                      std::cout, std::cerr);
    }
    if (app.got_subcommand(permute)) {
      std::optional<venndi::prompt::PromptKind> kind;
      if (int code = parse_kind(prompt_kind, kind); code != venndi::cli::kExitOk) {
        return code;
      }
      return venndi::cli::cmd_permute(config, make_transport(config), dataset, index,
                                      *kind, shifts, std::cout, std::cerr);
    }
    if (app.got_subcommand(eval)) {
      std::vector<venndi::prompt::PromptKind> kinds;
      if (eval_kinds == "both") {
        kinds = {venndi::prompt::PromptKind::vd, venndi::prompt::PromptKind::standard};
      } else {
        std::optional<venndi::prompt::PromptKind> kind;
        if (int code = parse_kind(eval_kinds, kind); code != venndi::cli::kExitOk) {
          return code;
        }
        kinds = {*kind};
      }
      return venndi::cli::cmd_eval(config, make_transport(config), dataset, kinds,
                                   std::cout, std::cerr);
    }
    if (app.got_subcommand(report)) {
      return venndi::cli::cmd_report(rows_path, format, config.output_dir, std::cout,
                                     std::cerr);
    }
    std::cerr << "error: no subcommand\n";
    return venndi::cli::kExitUsage;
  });
}
