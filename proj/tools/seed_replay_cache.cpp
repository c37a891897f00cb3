// Seeds the replay cache backing the offline demos and the test suite by
// running the real pipelines in record mode against scripted transports:
//   - the egg-boiling sample, exercised by answer/compare/permute, with
//     responses read from fixtures/transcripts/
//   - an 11-sample clinical QA set, exercised by eval, with a deterministic
//     oracle generated here
// Everything goes through the same prompt builders and client the CLI uses,
// so a later replay run reproduces the requests byte for byte.

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "venndi/bias.hpp"
#include "venndi/cli.hpp"
#include "venndi/corpus.hpp"
#include "venndi/error.hpp"
#include "venndi/judge.hpp"
#include "venndi/llm.hpp"
#include "venndi/metrics.hpp"
#include "venndi/prompt.hpp"

namespace {

namespace fs = std::filesystem;
using venndi::Error;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open fixture: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string head_of(const std::string& text) {
  std::string out = text.substr(0, 96);
  for (char& c : out) {
    if (c == '\n') c = ' ';
  }
  return out;
}

std::size_t count_entries(const fs::path& dir) {
  if (!fs::exists(dir)) return 0;
  std::size_t n = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".json") ++n;
  }
  return n;
}

// ---------------------------------------------------------------------------
// Egg demo: scripted transcripts for every cyclic relabeling of the sample.

void seed_egg(const fs::path& fixtures, const fs::path& cache_dir) {
  auto samples = venndi::corpus::load_dataset(fixtures / "egg_sample.jsonl");
  const venndi::corpus::Sample& egg = samples.at(0);

  auto responses = std::make_shared<std::map<std::string, std::string>>();
  for (auto kind :
       {venndi::prompt::PromptKind::vd, venndi::prompt::PromptKind::standard}) {
    for (int shift = 0; shift < 6; ++shift) {
      auto [relabeled, map] = venndi::bias::cyclic_relabel(egg, shift);
      auto prompt_text = venndi::prompt::build_prompt(relabeled, kind, {});
      std::string name = "egg_" + venndi::prompt::to_string(kind) + "_shift" +
                         std::to_string(shift) + ".txt";
      (*responses)[prompt_text.text] = read_file(fixtures / "transcripts" / name);
    }
  }

  auto transport = std::make_shared<venndi::llm::FnTransport>(
      [responses](const std::string& path, const std::string& body) -> std::string {
        if (path != "/v1/chat/completions") {
          throw Error("egg seed: unexpected endpoint " + path);
        }
        std::string prompt =
            nlohmann::json::parse(body).at("messages").at(0).at("content");
        auto it = responses->find(prompt);
        if (it == responses->end()) {
          throw Error("egg seed: no scripted response for prompt: " + head_of(prompt));
        }
        return venndi::llm::make_chat_response_json(it->second);
      });
  venndi::llm::Client client(
      transport, venndi::llm::ReplayCache(cache_dir, venndi::llm::CacheMode::record));

  std::vector<int> shifts{0, 1, 2, 3, 4, 5};
  auto vd_report = venndi::bias::run_permutation_passes(
      client, egg, venndi::prompt::PromptKind::vd, shifts);
  if (!vd_report.invariant) {
    throw Error("egg seed: VD transcripts are not invariant under relabeling");
  }
  auto standard_report = venndi::bias::run_permutation_passes(
      client, egg, venndi::prompt::PromptKind::standard, shifts);
  if (standard_report.distinct_citation_sets < 2) {
    throw Error("egg seed: standard transcripts unexpectedly invariant");
  }
}

// ---------------------------------------------------------------------------
// Eval oracle: fixed per-sample verdicts and embeddings chosen so the score
// table is stable across reruns.

struct SampleScript {
  int gt_claims;
  int vd_tp, vd_fp, vd_fn;
  int sd_tp, sd_fp, sd_fn;
  int judge1_vd, judge2_vd, judge1_sd, judge2_sd;
};

constexpr SampleScript kScripts[] = {
    {3, 2, 6, 1, 1, 6, 2, 8, 4, 7, 3},  //
    {3, 2, 6, 1, 1, 6, 2, 8, 4, 7, 3},  //
    {3, 2, 6, 1, 1, 6, 2, 7, 3, 6, 2},  //
    {3, 2, 6, 1, 1, 6, 2, 9, 4, 7, 3},  //
    {3, 2, 6, 1, 1, 6, 2, 7, 4, 7, 2},  //
    {3, 2, 6, 1, 1, 6, 2, 8, 4, 6, 2},  //
    {3, 2, 6, 1, 1, 6, 2, 9, 4, 7, 3},  //
    {3, 2, 6, 1, 1, 6, 2, 8, 3, 7, 2},  //
    {3, 2, 6, 1, 1, 6, 2, 8, 4, 7, 3},  //
    {3, 3, 4, 0, 1, 0, 2, 7, 3, 6, 2},  //
    {7, 4, 2, 3, 1, 6, 6, 7, 4, 7, 2},  //
};

constexpr double kSimilarityVd = 0.9172;
constexpr double kSimilaritySd = 0.8690;
constexpr double kRelevancyVd = 0.9597;
constexpr double kRelevancySd = 0.9427;

std::vector<double> unit2(double x) { return {x, std::sqrt(1.0 - x * x)}; }

// Samples are parameterized by their 1-based cohort number.
std::string vd_answer_text(const std::string& n) {
  return "Yes. As per Document 1 and Document 2, adjuvant therapy A" + n +
         " improves remission rates in cohort " + n + ".";
}

std::string sd_answer_text(const std::string& n) {
  return "Adjuvant therapy A" + n + " improves remission rates in cohort " + n +
         " (Document 1).";
}

std::string vd_transcript(const std::string& n) {
  return "1. Identify the sources:\n"
         "- Document 1: Trial " + n + "A reporting remission outcomes under adjuvant "
         "therapy A" + n + ".\n"
         "- Document 2: Trial " + n + "B comparing adjuvant therapy A" + n +
         " with placebo.\n"
         "- Document 3: Registry notes on enrollment and logistics for cohort " + n +
         ".\n"
         "\n"
         "2. Find the Overlapping Areas with respect to query:\n"
         "- Overlapping information between Documents 1 and 2: both trials report "
         "improved remission rates under adjuvant therapy A" + n + ".\n"
         "\n"
         "3. Find the Distinct Areas with respect to query:\n"
         "- Document 1: compares remission against untreated controls.\n"
         "- Document 2: uses a placebo comparator.\n"
         "- Document 3: covers enrollment and funding logistics, so it does not "
         "contain relevant information with respect to the query.\n"
         "\n"
         "4. Explain the Overlaps with respect to query:\n"
         "- Documents 1 and 2 agree that remission rates improve under adjuvant "
         "therapy A" + n + ".\n"
         "\n"
         "5. Explain the Unique Information with respect to query:\n"
         "- Document 1 uniquely grounds the effect against untreated controls.\n"
         "- Document 2 uniquely shows the effect holds against placebo.\n"
         "\n"
         "Final answer:\n" +
         vd_answer_text(n) + "\n";
}

std::string generated_question(const std::string& n, venndi::prompt::PromptKind kind,
                               int k) {
  if (kind == venndi::prompt::PromptKind::vd) {
    return "Does adjuvant therapy A" + n + " improve remission in cohort " + n +
           "? (reading " + std::to_string(k) + ")";
  }
  return "Is remission better with adjuvant therapy A" + n + " in cohort " + n +
         "? (reading " + std::to_string(k) + ")";
}

std::vector<std::string> gt_claims(const std::string& n, int count) {
  std::vector<std::string> out;
  for (int k = 1; k <= count; ++k) {
    out.push_back("Adjuvant therapy A" + n + " improves remission rates in cohort " + n +
                  ", aspect " + std::to_string(k) + ".");
  }
  return out;
}

std::vector<std::string> answer_claims(const std::string& n,
                                       venndi::prompt::PromptKind kind, int count) {
  std::vector<std::string> out;
  for (int k = 1; k <= count; ++k) {
    if (kind == venndi::prompt::PromptKind::vd) {
      out.push_back("The answer reports improved remission under adjuvant therapy A" +
                    n + ", point " + std::to_string(k) + ".");
    } else {
      out.push_back("The answer links adjuvant therapy A" + n +
                    " to a remission change, point " + std::to_string(k) + ".");
    }
  }
  return out;
}

std::string bullet_listing(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& item : items) out += "- " + item + "\n";
  return out;
}

std::string plain_listing(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& item : items) out += item + "\n";
  return out;
}

std::string verdict_listing(int answer_count, int tp, int truth_count, int fn) {
  std::string out;
  for (int k = 1; k <= answer_count; ++k) {
    out += "answer claim " + std::to_string(k) + ": " +
           (k <= tp ? "supported" : "unsupported") + "\n";
  }
  for (int j = 1; j <= truth_count; ++j) {
    out += "truth claim " + std::to_string(j) + ": " +
           (j <= truth_count - fn ? "covered" : "missing") + "\n";
  }
  return out;
}

std::string judge_listing(const venndi::judge::JudgeRubric& rubric, int total) {
  std::string out;
  for (std::size_t d = 0; d < rubric.dimensions.size(); ++d) {
    bool pass = d < static_cast<std::size_t>(total);
    out += rubric.dimensions[d].name + ": " + (pass ? "1" : "0") + " - " +
           (pass ? "meets the criterion." : "does not meet the criterion.") + "\n";
  }
  return out;
}

struct EvalScript {
  std::map<std::string, std::string> by_prompt;
  std::map<std::string, std::string> judge1_by_answer;
  std::map<std::string, std::string> judge2_by_answer;
  std::map<std::string, std::vector<double>> embeddings;
};

std::shared_ptr<EvalScript> build_eval_script(
    const std::vector<venndi::corpus::Sample>& samples) {
  using venndi::prompt::PromptKind;
  if (samples.size() != std::size(kScripts)) {
    throw Error("eval seed: dataset has " + std::to_string(samples.size()) +
                " samples; the oracle scripts " + std::to_string(std::size(kScripts)));
  }
  const auto& templates = venndi::prompt::Templates::builtin();
  auto script = std::make_shared<EvalScript>();

  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& sample = samples[i];
    const SampleScript& plan = kScripts[i];
    const std::string n = std::to_string(i + 1);
    if (!sample.ground_truth) throw Error("eval seed: sample has no ground truth");
    const std::string& gt = *sample.ground_truth;

    std::string vd_answer = vd_answer_text(n);
    std::string sd_answer = sd_answer_text(n);

    script->by_prompt[venndi::prompt::build_prompt(sample, PromptKind::vd, {}).text] =
        vd_transcript(n);
    script->by_prompt[venndi::prompt::build_prompt(sample, PromptKind::standard, {})
                          .text] = sd_answer;

    script->embeddings[sample.query] = unit2(1.0);
    script->embeddings[gt] = unit2(1.0);
    script->embeddings[vd_answer] = unit2(kSimilarityVd);
    script->embeddings[sd_answer] = unit2(kSimilaritySd);

    std::vector<std::string> truth = gt_claims(n, plan.gt_claims);
    script->by_prompt[venndi::prompt::substitute(templates.claim_extract,
                                                 {{"text", gt}})] =
        bullet_listing(truth);

    for (PromptKind kind : {PromptKind::vd, PromptKind::standard}) {
      bool is_vd = kind == PromptKind::vd;
      const std::string& answer = is_vd ? vd_answer : sd_answer;
      int tp = is_vd ? plan.vd_tp : plan.sd_tp;
      int fp = is_vd ? plan.vd_fp : plan.sd_fp;
      int fn = is_vd ? plan.vd_fn : plan.sd_fn;

      std::vector<std::string> questions;
      for (int k = 1; k <= 3; ++k) {
        questions.push_back(generated_question(n, kind, k));
        script->embeddings[questions.back()] =
            unit2(is_vd ? kRelevancyVd : kRelevancySd);
      }
      script->by_prompt[venndi::prompt::substitute(
          templates.question_gen, {{"answer", answer}, {"n", "3"}})] =
          plain_listing(questions);

      std::vector<std::string> claims = answer_claims(n, kind, tp + fp);
      script->by_prompt[venndi::prompt::substitute(templates.claim_extract,
                                                   {{"text", answer}})] =
          bullet_listing(claims);
      script->by_prompt[venndi::prompt::substitute(
          templates.claim_verdict,
          {{"ground_truth_claims", venndi::metrics::detail_metrics::numbered_listing(truth)},
           {"answer_claims", venndi::metrics::detail_metrics::numbered_listing(claims)}})] =
          verdict_listing(tp + fp, tp, plan.gt_claims, fn);

      script->judge1_by_answer[answer] =
          judge_listing(venndi::judge::JudgeRubric::judge1_builtin(),
                        is_vd ? plan.judge1_vd : plan.judge1_sd);
      script->judge2_by_answer[answer] =
          judge_listing(venndi::judge::JudgeRubric::judge2_builtin(),
                        is_vd ? plan.judge2_vd : plan.judge2_sd);
    }
  }
  return script;
}

std::string answer_suffix(const std::string& prompt) {
  const std::string marker = "\n\nAnswer: ";
  std::size_t at = prompt.rfind(marker);
  if (at == std::string::npos) {
    throw Error("eval seed: judge prompt has no answer section: " + head_of(prompt));
  }
  return prompt.substr(at + marker.size());
}

void seed_eval(const fs::path& fixtures, const fs::path& cache_dir) {
  fs::path dataset = fixtures / "pubmed_eval.jsonl";
  auto script = build_eval_script(venndi::corpus::load_dataset(dataset));

  auto transport = std::make_shared<venndi::llm::FnTransport>(
      [script](const std::string& path, const std::string& body) -> std::string {
        nlohmann::json parsed = nlohmann::json::parse(body);
        if (path == "/v1/embeddings") {
          std::string input = parsed.at("input");
          auto it = script->embeddings.find(input);
          if (it == script->embeddings.end()) {
            throw Error("eval seed: no scripted embedding for: " + head_of(input));
          }
          return venndi::llm::make_embedding_response_json(
              it->second, parsed.at("model").get<std::string>());
        }
        if (path != "/v1/chat/completions") {
          throw Error("eval seed: unexpected endpoint " + path);
        }
        std::string prompt = parsed.at("messages").at(0).at("content");
        if (auto it = script->by_prompt.find(prompt); it != script->by_prompt.end()) {
          return venndi::llm::make_chat_response_json(it->second);
        }
        const std::map<std::string, std::string>* judge_map = nullptr;
        if (prompt.rfind("You are grading an answer", 0) == 0) {
          judge_map = &script->judge1_by_answer;
        } else if (prompt.rfind("You are comparing an answer", 0) == 0) {
          judge_map = &script->judge2_by_answer;
        }
        if (judge_map) {
          auto it = judge_map->find(answer_suffix(prompt));
          if (it != judge_map->end()) {
            return venndi::llm::make_chat_response_json(it->second);
          }
        }
        throw Error("eval seed: unscripted prompt: " + head_of(prompt));
      });

  venndi::cli::RunConfig config;
  config.cache_mode = venndi::llm::CacheMode::record;
  config.cache_dir = cache_dir.string();
  fs::path scratch = cache_dir / ".seed_scratch";
  config.output_dir = scratch.string();

  std::ostringstream sink;
  int code = venndi::cli::cmd_eval(config, transport, dataset,
                                   {venndi::prompt::PromptKind::vd,
                                    venndi::prompt::PromptKind::standard},
                                   sink, std::cerr);
  fs::remove_all(scratch);
  if (code != venndi::cli::kExitOk) {
    throw Error("eval seed: cmd_eval exited with code " + std::to_string(code));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seed the replay cache from fixtures"};
  std::string fixtures = "fixtures";
  std::string cache_dir;
  app.add_option("--fixtures", fixtures, "fixtures directory");
  app.add_option("--cache-dir", cache_dir, "cache directory to seed")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    fs::path cache(cache_dir);
    std::size_t before = count_entries(cache);
    seed_egg(fixtures, cache);
    std::size_t after_egg = count_entries(cache);
    seed_eval(fixtures, cache);
    std::size_t after_eval = count_entries(cache);
    std::cout << "seeded egg demo: " << (after_egg - before) << " entries\n"
              << "seeded eval oracle: " << (after_eval - after_egg) << " entries\n"
              << "cache total: " << after_eval << " entries in " << cache.string()
              << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
