#include "venndi/prompt.hpp"

#include <gtest/gtest.h>

#include "support/test_util.hpp"
#include "venndi/corpus.hpp"

namespace prompt = venndi::prompt;
namespace corpus = venndi::corpus;

namespace {

corpus::Sample two_doc_sample() {
  corpus::Sample s;
  s.query = "How to boil eggs?";
  s.documents.push_back({"Document 1", "a", "Start cold.", std::nullopt});
  s.documents.push_back({"Document 2", "b", "Twelve minutes.", std::nullopt});
  return s;
}

}  // namespace

TEST(PromptKind, RoundTripsAndRejects) {
  EXPECT_EQ(prompt::to_string(prompt::PromptKind::vd), "vd");
  EXPECT_EQ(prompt::to_string(prompt::PromptKind::standard), "standard");
  EXPECT_EQ(prompt::parse_prompt_kind("vd"), prompt::PromptKind::vd);
  EXPECT_EQ(prompt::parse_prompt_kind("standard"), prompt::PromptKind::standard);
  EXPECT_THROW(prompt::parse_prompt_kind("other"), venndi::ValidationError);
}

TEST(PromptSubstitute, ReplacesEveryOccurrence) {
  EXPECT_EQ(prompt::substitute("{{a}}+{{a}}={{b}}", {{"a", "1"}, {"b", "2"}}), "1+1=2");
}

TEST(PromptSubstitute, MissingPlaceholderThrows) {
  try {
    prompt::substitute("no markers here", {{"query", "q"}});
    FAIL() << "expected ValidationError";
  } catch (const venndi::ValidationError& e) {
    ASSERT_EQ(e.offenders().size(), 1u);
    EXPECT_EQ(e.offenders()[0], "query");
  }
}

TEST(PromptSubstitute, LeftoverPlaceholderThrows) {
  try {
    prompt::substitute("{{a}} and {{b}}", {{"a", "1"}});
    FAIL() << "expected ValidationError";
  } catch (const venndi::ValidationError& e) {
    ASSERT_EQ(e.offenders().size(), 1u);
    EXPECT_EQ(e.offenders()[0], "b");
  }
}

TEST(PromptSubstitute, ValueContainingMarkerDoesNotRecurse) {
  EXPECT_EQ(prompt::substitute("{{a}}", {{"a", "{{a}}"}}), "{{a}}");
}

TEST(PromptContext, RendersLabeledBlocks) {
  corpus::Sample s = two_doc_sample();
  EXPECT_EQ(prompt::render_context_block(s.documents),
            "Document 1: Start cold.\n\nDocument 2: Twelve minutes.");
  EXPECT_THROW(prompt::render_context_block({}), venndi::PreconditionError);
}

TEST(PromptFinalStep, StylesAndCitationsCompose) {
  prompt::OutputSpec spec;
  std::string vd = prompt::final_step_instruction(spec, prompt::PromptKind::vd);
  EXPECT_NE(vd.find("Final answer:"), std::string::npos);
  EXPECT_NE(vd.find("Cite the supporting documents inline, e.g. (Document 2)"),
            std::string::npos);

  spec.citation_required = false;
  std::string bare = prompt::final_step_instruction(spec, prompt::PromptKind::vd);
  EXPECT_EQ(bare.find("Cite the supporting"), std::string::npos);

  spec.answer_style = prompt::AnswerStyle::concise_single_line;
  std::string concise = prompt::final_step_instruction(spec, prompt::PromptKind::vd);
  EXPECT_NE(concise.find("single concise sentence"), std::string::npos);

  prompt::OutputSpec extra;
  extra.extra_instructions = "Answer in French.";
  std::string with_extra = prompt::final_step_instruction(extra, prompt::PromptKind::vd);
  EXPECT_TRUE(with_extra.ends_with("Answer in French."));

  std::string standard =
      prompt::final_step_instruction(prompt::OutputSpec{}, prompt::PromptKind::standard);
  EXPECT_EQ(standard.find("Final answer:"), std::string::npos);
  EXPECT_NE(standard.find("Cite the supporting documents"), std::string::npos);
}

TEST(PromptBuild, VdPromptCarriesTheFiveStepHeadings) {
  prompt::PromptText p = prompt::build_vd_prompt(two_doc_sample());
  EXPECT_EQ(p.kind, prompt::PromptKind::vd);
  EXPECT_EQ(p.doc_labels, (std::vector<std::string>{"Document 1", "Document 2"}));
  EXPECT_TRUE(p.text.starts_with("# venndi-template vd v1\n"));
  EXPECT_NE(p.text.find("Treat the query as the Universal Set"), std::string::npos);
  EXPECT_NE(p.text.find("Query: How to boil eggs?"), std::string::npos);
  EXPECT_NE(p.text.find("Document 1: Start cold.\n\nDocument 2: Twelve minutes."),
            std::string::npos);
  EXPECT_NE(p.text.find("1. Identify the sources"), std::string::npos);
  EXPECT_NE(p.text.find("2. Find the Overlapping Areas with respect to query"),
            std::string::npos);
  EXPECT_NE(p.text.find("3. Find the Distinct Areas with respect to query"),
            std::string::npos);
  EXPECT_NE(p.text.find("4. Explain the Overlaps with respect to query"),
            std::string::npos);
  EXPECT_NE(p.text.find("5. Explain the Unique Information with respect to query"),
            std::string::npos);
  EXPECT_NE(p.text.find("6. Provide the final answer"), std::string::npos);
  EXPECT_EQ(p.text.find("{{"), std::string::npos);
}

TEST(PromptBuild, StandardPromptHasNoStepScaffolding) {
  prompt::PromptText p = prompt::build_standard_prompt(two_doc_sample());
  EXPECT_EQ(p.kind, prompt::PromptKind::standard);
  EXPECT_TRUE(p.text.starts_with("# venndi-template standard v1\n"));
  EXPECT_EQ(p.text.find("Identify the sources"), std::string::npos);
  EXPECT_EQ(p.text.find("Overlapping Areas"), std::string::npos);
  EXPECT_NE(p.text.find("Answer the query using only the information"),
            std::string::npos);
}

TEST(PromptBuild, DispatchMatchesDirectBuilders) {
  corpus::Sample s = two_doc_sample();
  EXPECT_EQ(prompt::build_prompt(s, prompt::PromptKind::vd).text,
            prompt::build_vd_prompt(s).text);
  EXPECT_EQ(prompt::build_prompt(s, prompt::PromptKind::standard).text,
            prompt::build_standard_prompt(s).text);
}

TEST(PromptBuild, RejectsDegenerateSamples) {
  corpus::Sample empty_docs;
  empty_docs.query = "q";
  EXPECT_THROW(prompt::build_vd_prompt(empty_docs), venndi::PreconditionError);

  corpus::Sample blank_query = two_doc_sample();
  blank_query.query = "   ";
  EXPECT_THROW(prompt::build_standard_prompt(blank_query), venndi::PreconditionError);
}

TEST(PromptTemplates, LoadDirReadsTheAssetTree) {
  prompt::Templates loaded =
      prompt::Templates::load_dir(venndi_test::source_dir() / "assets" / "prompts");
  const prompt::Templates& builtin = prompt::Templates::builtin();
  EXPECT_EQ(loaded.vd, builtin.vd);
  EXPECT_EQ(loaded.standard_prompt, builtin.standard_prompt);
  EXPECT_EQ(loaded.question_gen, builtin.question_gen);
  EXPECT_EQ(loaded.claim_extract, builtin.claim_extract);
  EXPECT_EQ(loaded.claim_verdict, builtin.claim_verdict);
}

TEST(PromptTemplates, LoadDirFailsLoudlyOnMissingFiles) {
  venndi_test::TempDir dir;
  EXPECT_THROW(prompt::Templates::load_dir(dir.path), venndi::Error);
}

TEST(PromptTemplates, VersionHeaderStaysInsideRenderedPrompts) {
  // the template version line must reach the wire so cache keys shift when
  // templates change
  prompt::PromptText vd = prompt::build_vd_prompt(two_doc_sample());
  prompt::PromptText standard = prompt::build_standard_prompt(two_doc_sample());
  EXPECT_NE(vd.text.find("# venndi-template vd v1"), std::string::npos);
  EXPECT_NE(standard.text.find("# venndi-template standard v1"), std::string::npos);
}

TEST(PromptTemplates, CustomTemplateDrivesBuild) {
  prompt::Templates custom = prompt::Templates::builtin();
  custom.vd = "# venndi-template vd v2-test\nQ={{query}}\nC={{context}}\nF={{final_step}}\n";
  prompt::PromptText p = prompt::build_vd_prompt(two_doc_sample(), {}, custom);
  EXPECT_TRUE(p.text.starts_with("# venndi-template vd v2-test\nQ=How to boil eggs?\n"));
}
