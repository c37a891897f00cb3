#include "venndi/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "support/test_util.hpp"

namespace metrics = venndi::metrics;
namespace llm = venndi::llm;

namespace {

// Serves chat completions through a handler and embeddings from a table.
struct DualScript {
  std::function<std::string(const std::string& prompt)> chat;
  std::map<std::string, std::vector<double>> embeddings;
  int chat_calls = 0;
  int embed_calls = 0;

  llm::Client make_client() {
    auto transport = std::make_shared<llm::FnTransport>(
        [this](const std::string& path, const std::string& body) -> std::string {
          nlohmann::json parsed = nlohmann::json::parse(body);
          if (path == "/v1/embeddings") {
            ++embed_calls;
            std::string input = parsed["input"].get<std::string>();
            auto it = embeddings.find(input);
            if (it == embeddings.end()) {
              throw venndi::TransportError("no scripted embedding for: " + input);
            }
            return llm::make_embedding_response_json(it->second,
                                                     parsed["model"].get<std::string>());
          }
          ++chat_calls;
          return llm::make_chat_response_json(
              chat(parsed["messages"][0]["content"].get<std::string>()));
        });
    return llm::Client(std::move(transport),
                       llm::ReplayCache({}, llm::CacheMode::passthrough));
  }
};

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

}  // namespace

// --- cosine ------------------------------------------------------------------

TEST(Cosine, KnownValuesAndScaleInvariance) {
  std::vector<double> x{1.0, 0.0};
  std::vector<double> y{0.0, 1.0};
  std::vector<double> diag{1.0, 1.0};
  EXPECT_DOUBLE_EQ(metrics::cosine(std::span<const double>(x), std::span<const double>(x)),
                   1.0);
  EXPECT_DOUBLE_EQ(metrics::cosine(std::span<const double>(x), std::span<const double>(y)),
                   0.0);
  std::vector<double> neg{-1.0, 0.0};
  EXPECT_DOUBLE_EQ(
      metrics::cosine(std::span<const double>(x), std::span<const double>(neg)), -1.0);
  EXPECT_NEAR(metrics::cosine(std::span<const double>(x), std::span<const double>(diag)),
              1.0 / std::sqrt(2.0), 1e-15);
  std::vector<double> scaled{5.0, 5.0};
  EXPECT_NEAR(metrics::cosine(std::span<const double>(diag), std::span<const double>(scaled)),
              1.0, 1e-15);

  llm::EmbeddingVector a{{0.6, 0.8}, "m"};
  llm::EmbeddingVector b{{1.0, 0.0}, "m"};
  EXPECT_NEAR(metrics::cosine(a, b), 0.6, 1e-15);
}

TEST(Cosine, RejectsDegenerateInput) {
  std::vector<double> two{1.0, 0.0};
  std::vector<double> three{1.0, 0.0, 0.0};
  std::vector<double> zero{0.0, 0.0};
  std::vector<double> empty;
  EXPECT_THROW(
      metrics::cosine(std::span<const double>(two), std::span<const double>(three)),
      venndi::PreconditionError);
  EXPECT_THROW(
      metrics::cosine(std::span<const double>(empty), std::span<const double>(empty)),
      venndi::PreconditionError);
  EXPECT_THROW(
      metrics::cosine(std::span<const double>(two), std::span<const double>(zero)),
      venndi::PreconditionError);
}

// --- F1 ------------------------------------------------------------------------

TEST(F1, FormulaMatchesIndependentComputationAndZeroTpIsZero) {
  EXPECT_DOUBLE_EQ(metrics::f1_from_counts({0, 0, 0}), 0.0);
  EXPECT_DOUBLE_EQ(metrics::f1_from_counts({0, 5, 3}), 0.0);
  EXPECT_DOUBLE_EQ(metrics::f1_from_counts({2, 6, 1}), 4.0 / 11.0);
  EXPECT_DOUBLE_EQ(metrics::f1_from_counts({3, 0, 0}), 1.0);
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> dist(0, 20);
  for (int round = 0; round < 500; ++round) {
    int tp = dist(rng), fp = dist(rng), fn = dist(rng);
    double expected = tp == 0 ? 0.0 : (2.0 * tp) / (2.0 * tp + fp + fn);
    EXPECT_DOUBLE_EQ(metrics::f1_from_counts({tp, fp, fn}), expected);
  }
  EXPECT_THROW(metrics::f1_from_counts({-1, 0, 0}), venndi::PreconditionError);
}

// --- listings -------------------------------------------------------------------

TEST(Listings, ParseStripsBulletsAndNumbering) {
  std::string response =
      "- first\n* second\n1. third\n2) fourth\nplain fifth\n\n   - sixth   \n12 items "
      "is not numbering\n";
  EXPECT_EQ(metrics::detail_metrics::parse_listing(response),
            (std::vector<std::string>{"first", "second", "third", "fourth", "plain fifth",
                                      "sixth", "12 items is not numbering"}));
  EXPECT_TRUE(metrics::detail_metrics::parse_listing("").empty());
  EXPECT_TRUE(metrics::detail_metrics::parse_listing("\n \n").empty());
}

TEST(Listings, NumberedListingFormats) {
  EXPECT_EQ(metrics::detail_metrics::numbered_listing({"x", "y"}), "1. x\n2. y");
  EXPECT_EQ(metrics::detail_metrics::numbered_listing({"only"}), "1. only");
  EXPECT_EQ(metrics::detail_metrics::numbered_listing({}), "");
}

// --- verdict parsing -------------------------------------------------------------

TEST(Verdicts, ParsesLenientlyAndCountsExactly) {
  std::string response =
      "Answer claim 1: supported - matches the ground truth\n"
      "  **answer claim 2**: UNSUPPORTED\n"
      "answer claim 3 : supported\n"
      "Truth claim 1: covered\n"
      "truth claim 2: MISSING entirely\n";
  auto counts = metrics::detail_metrics::parse_verdicts(response, 3, 2);
  ASSERT_TRUE(counts.has_value());
  EXPECT_EQ(counts->tp, 2);
  EXPECT_EQ(counts->fp, 1);
  EXPECT_EQ(counts->fn, 1);
}

TEST(Verdicts, UnsupportedWinsOverItsSubstring) {
  auto counts = metrics::detail_metrics::parse_verdicts(
      "answer claim 1: unsupported\ntruth claim 1: covered", 1, 1);
  ASSERT_TRUE(counts.has_value());
  EXPECT_EQ(counts->tp, 0);
  EXPECT_EQ(counts->fp, 1);
}

TEST(Verdicts, MissingOrOutOfRangeVerdictsFailTheParse) {
  // claim 2 never gets a verdict
  EXPECT_FALSE(metrics::detail_metrics::parse_verdicts(
                   "answer claim 1: supported\ntruth claim 1: covered", 2, 1)
                   .has_value());
  // out-of-range indices are ignored, not errors...
  auto counts = metrics::detail_metrics::parse_verdicts(
      "answer claim 1: supported\nanswer claim 9: unsupported\ntruth claim 1: covered\n"
      "truth claim 0: missing",
      1, 1);
  ASSERT_TRUE(counts.has_value());
  EXPECT_EQ(counts->tp, 1);
  EXPECT_EQ(counts->fp, 0);
  EXPECT_EQ(counts->fn, 0);
  // ...a line with an index but no verdict keyword leaves the slot unset
  EXPECT_FALSE(metrics::detail_metrics::parse_verdicts(
                   "answer claim 1: maybe\ntruth claim 1: covered", 1, 1)
                   .has_value());
}

// --- answer relevancy --------------------------------------------------------------

TEST(Relevancy, MeansCosinesOfGeneratedQuestions) {
  DualScript script;
  script.chat = [](const std::string& prompt) {
    EXPECT_TRUE(contains(prompt, "Generate 2 questions"));
    EXPECT_TRUE(contains(prompt, "Answer: the answer text"));
    return std::string("gq one\ngq two");
  };
  script.embeddings["the question"] = {1.0, 0.0};
  script.embeddings["gq one"] = {0.8, 0.6};
  script.embeddings["gq two"] = {0.6, 0.8};

  metrics::MetricConfig config;
  config.n_questions = 2;
  llm::Client client = script.make_client();
  double relevancy =
      metrics::answer_relevancy(client, "the question", "the answer text", config);
  EXPECT_NEAR(relevancy, 0.7, 1e-12);
  EXPECT_EQ(script.chat_calls, 1);
  EXPECT_EQ(script.embed_calls, 3);
}

TEST(Relevancy, ExtraGeneratedQuestionsAreTruncatedToN) {
  DualScript script;
  script.chat = [](const std::string&) {
    return std::string("- gq one\n- gq two\n- poison three\n- poison four");
  };
  script.embeddings["the question"] = {1.0, 0.0};
  script.embeddings["gq one"] = {0.8, 0.6};
  script.embeddings["gq two"] = {0.6, 0.8};
  // the poison questions have no scripted embedding: using them would throw

  metrics::MetricConfig config;
  config.n_questions = 2;
  llm::Client client = script.make_client();
  EXPECT_NEAR(metrics::answer_relevancy(client, "the question", "answer", config), 0.7,
              1e-12);
  EXPECT_EQ(script.embed_calls, 3);
}

TEST(Relevancy, RetriesOnceWithReminderThenFails) {
  {
    DualScript script;
    int call = 0;
    std::vector<std::string> prompts;
    script.chat = [&](const std::string& prompt) {
      prompts.push_back(prompt);
      return ++call == 1 ? std::string("only one") : std::string("gq one\ngq two");
    };
    script.embeddings["q"] = {1.0, 0.0};
    script.embeddings["gq one"] = {1.0, 0.0};
    script.embeddings["gq two"] = {1.0, 0.0};
    metrics::MetricConfig config;
    config.n_questions = 2;
    llm::Client client = script.make_client();
    EXPECT_NEAR(metrics::answer_relevancy(client, "q", "a", config), 1.0, 1e-12);
    ASSERT_EQ(prompts.size(), 2u);
    EXPECT_EQ(prompts[1],
              prompts[0] +
                  "\n\nReminder: follow the output format exactly, one item per line.");
  }
  {
    DualScript script;
    script.chat = [](const std::string&) { return std::string("never enough"); };
    metrics::MetricConfig config;
    config.n_questions = 2;
    llm::Client client = script.make_client();
    EXPECT_THROW(metrics::answer_relevancy(client, "q", "a", config),
                 venndi::UnparseableResponseError);
    EXPECT_EQ(script.chat_calls, 2);
  }
}

// --- answer similarity ---------------------------------------------------------------

TEST(Similarity, IsTheCosineOfGroundTruthAndAnswer) {
  DualScript script;
  script.embeddings["the truth"] = {1.0, 0.0};
  script.embeddings["the answer"] = {0.6, 0.8};
  llm::Client client = script.make_client();
  EXPECT_NEAR(metrics::answer_similarity(client, "the truth", "the answer"), 0.6, 1e-12);
  EXPECT_EQ(script.chat_calls, 0);
}

TEST(Preconditions, EmptyInputsAndBadConfigsThrow) {
  DualScript script;
  llm::Client client = script.make_client();
  EXPECT_THROW(metrics::answer_similarity(client, "", "answer"), venndi::PreconditionError);
  EXPECT_THROW(metrics::answer_similarity(client, "truth", "  "),
               venndi::PreconditionError);
  EXPECT_THROW(metrics::answer_relevancy(client, "", "answer"), venndi::PreconditionError);
  EXPECT_THROW(metrics::answer_relevancy(client, "question", ""),
               venndi::PreconditionError);
  metrics::MetricConfig bad_n;
  bad_n.n_questions = 0;
  EXPECT_THROW(metrics::answer_relevancy(client, "q", "a", bad_n),
               venndi::PreconditionError);
  EXPECT_THROW(metrics::statement_f1(client, "", "a"), venndi::PreconditionError);
  EXPECT_THROW(metrics::statement_f1(client, "g", ""), venndi::PreconditionError);
  metrics::MetricConfig bad_weights;
  bad_weights.w1 = 0.0;
  bad_weights.w2 = 0.0;
  EXPECT_THROW(metrics::answer_correctness(client, "g", "a", bad_weights),
               venndi::PreconditionError);
  bad_weights.w1 = -0.1;
  bad_weights.w2 = 1.0;
  EXPECT_THROW(metrics::compute_eval_scores(client, "q", "g", "a", bad_weights),
               venndi::PreconditionError);
}

// --- lexical F1 -------------------------------------------------------------------------

TEST(LexicalF1, TokenMultisetOverlap) {
  EXPECT_DOUBLE_EQ(metrics::lexical_statement_f1("boil the eggs", "boil the eggs"), 1.0);
  EXPECT_DOUBLE_EQ(metrics::lexical_statement_f1("Boil, the EGGS!", "boil the eggs"), 1.0);
  EXPECT_DOUBLE_EQ(metrics::lexical_statement_f1("alpha beta", "gamma delta"), 0.0);
  EXPECT_NEAR(metrics::lexical_statement_f1("boil the eggs", "boil eggs now then"),
              4.0 / 7.0, 1e-15);
  // duplicated tokens are matched at most once each
  EXPECT_DOUBLE_EQ(metrics::lexical_statement_f1("egg egg egg", "egg"), 0.5);
  EXPECT_DOUBLE_EQ(metrics::lexical_statement_f1("", "anything"), 0.0);
  EXPECT_DOUBLE_EQ(metrics::lexical_statement_f1("anything", "..."), 0.0);
}

// --- claim-level statement F1 ----------------------------------------------------------

TEST(StatementF1, CountsSupportedAndMissingClaims) {
  DualScript script;
  std::vector<std::string> verdict_prompts;
  script.chat = [&](const std::string& prompt) -> std::string {
    if (contains(prompt, "atomic factual claim")) {
      if (contains(prompt, "Text: the long answer")) return "- a1\n- a2\n- a3";
      if (contains(prompt, "Text: the truth")) return "- g1\n- g2";
      ADD_FAILURE() << "unexpected claim-extraction prompt";
      return "";
    }
    verdict_prompts.push_back(prompt);
    return "answer claim 1: supported\nanswer claim 2: supported\n"
           "answer claim 3: unsupported\ntruth claim 1: covered\ntruth claim 2: missing";
  };
  llm::Client client = script.make_client();
  double f1 = metrics::statement_f1(client, "the truth", "the long answer");
  // tp=2 fp=1 fn=1
  EXPECT_NEAR(f1, 2.0 / 3.0, 1e-15);
  ASSERT_EQ(verdict_prompts.size(), 1u);
  EXPECT_TRUE(contains(verdict_prompts[0], "1. g1\n2. g2"));
  EXPECT_TRUE(contains(verdict_prompts[0], "1. a1\n2. a2\n3. a3"));
  EXPECT_EQ(script.chat_calls, 3);
  EXPECT_EQ(script.embed_calls, 0);
}

TEST(StatementF1, LexicalModeSkipsTheModelEntirely) {
  auto transport = std::make_shared<llm::FnTransport>(
      [](const std::string&, const std::string&) -> std::string {
        throw venndi::TransportError("must not be called");
      });
  llm::Client client(transport, llm::ReplayCache({}, llm::CacheMode::passthrough));
  metrics::MetricConfig config;
  config.lexical_f1 = true;
  EXPECT_DOUBLE_EQ(metrics::statement_f1(client, "boil the eggs", "boil the eggs", config),
                   1.0);
  EXPECT_DOUBLE_EQ(
      metrics::statement_f1(client, "boil the eggs", "boil eggs now then", config),
      metrics::lexical_statement_f1("boil the eggs", "boil eggs now then"));
}

// --- correctness -------------------------------------------------------------------------

namespace {

// Builds a script whose similarity and verdict counts are chosen by the test.
DualScript correctness_script(double target_similarity, int tp, int fp, int fn) {
  DualScript script;
  int answer_claims = tp + fp;
  int truth_claims = std::max(1, tp + fn);  // covered = truth_claims - fn
  script.chat = [answer_claims, truth_claims, tp, fn](const std::string& prompt) {
    if (contains(prompt, "atomic factual claim")) {
      int count = contains(prompt, "Text: the answer") ? answer_claims : truth_claims;
      std::string out;
      for (int i = 1; i <= count; ++i) out += "- claim " + std::to_string(i) + "\n";
      return out;
    }
    std::string verdicts;
    for (int i = 1; i <= answer_claims; ++i) {
      verdicts += "answer claim " + std::to_string(i) + ": " +
                  (i <= tp ? "supported" : "unsupported") + "\n";
    }
    for (int j = 1; j <= truth_claims; ++j) {
      verdicts +=
          "truth claim " + std::to_string(j) + ": " + (j <= fn ? "missing" : "covered") + "\n";
    }
    return verdicts;
  };
  double clamped = std::min(1.0, std::max(-1.0, target_similarity));
  script.embeddings["the truth"] = {1.0, 0.0};
  script.embeddings["the answer"] = {clamped, std::sqrt(1.0 - clamped * clamped)};
  return script;
}

}  // namespace

TEST(Correctness, WeightedCombinationMatchesIndependentFormula) {
  {
    DualScript script = correctness_script(0.6, 2, 1, 1);
    llm::Client client = script.make_client();
    double got = metrics::answer_correctness(client, "the truth", "the answer");
    // default weights 0.25/0.75; F1 = 4/6
    EXPECT_NEAR(got, (0.25 * 0.6 + 0.75 * (2.0 / 3.0)) / 1.0, 1e-12);
  }
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> sim_dist(-0.99, 0.99);
  std::uniform_real_distribution<double> weight_dist(0.0, 2.0);
  std::uniform_int_distribution<int> count_dist(0, 4);
  for (int round = 0; round < 25; ++round) {
    double sim = sim_dist(rng);
    int tp = count_dist(rng), fp = count_dist(rng), fn = count_dist(rng);
    if (tp + fp == 0) fp = 1;  // claim extraction needs at least one answer claim
    metrics::MetricConfig config;
    config.w1 = weight_dist(rng);
    config.w2 = weight_dist(rng);
    if (config.w1 + config.w2 <= 0.0) config.w2 = 1.0;
    DualScript script = correctness_script(sim, tp, fp, fn);
    llm::Client client = script.make_client();
    double got = metrics::answer_correctness(client, "the truth", "the answer", config);
    double expected_f1 = tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
    double expected =
        (config.w1 * sim + config.w2 * expected_f1) / (config.w1 + config.w2);
    EXPECT_NEAR(got, expected, 1e-9) << "round " << round;
  }
}

TEST(EvalScores, CombinesAllThreeMetricsInOnePass) {
  DualScript script;
  script.chat = [](const std::string& prompt) -> std::string {
    if (contains(prompt, "Generate 2 questions")) return "gq one\ngq two";
    if (contains(prompt, "atomic factual claim")) {
      if (contains(prompt, "Text: the answer")) return "- a1\n- a2";
      return "- g1\n- g2";
    }
    return "answer claim 1: supported\nanswer claim 2: unsupported\n"
           "truth claim 1: covered\ntruth claim 2: missing";
  };
  script.embeddings["the question"] = {1.0, 0.0};
  script.embeddings["gq one"] = {0.8, 0.6};
  script.embeddings["gq two"] = {0.6, 0.8};
  script.embeddings["the truth"] = {0.0, 1.0};
  script.embeddings["the answer"] = {0.6, 0.8};

  metrics::MetricConfig config;
  config.n_questions = 2;
  llm::Client client = script.make_client();
  metrics::EvalScores scores =
      metrics::compute_eval_scores(client, "the question", "the truth", "the answer", config);
  EXPECT_NEAR(scores.relevancy, 0.7, 1e-12);
  EXPECT_NEAR(scores.similarity, 0.8, 1e-12);
  // F1 = 0.5; correctness = 0.25*0.8 + 0.75*0.5
  EXPECT_NEAR(scores.correctness, 0.575, 1e-12);
  EXPECT_EQ(scores.completion_model, "gpt-4");
  EXPECT_EQ(scores.embedding_model, "text-embedding-3-small");
}
