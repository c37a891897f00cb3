#include "venndi/corpus.hpp"

#include <gtest/gtest.h>

#include "support/test_util.hpp"

namespace corpus = venndi::corpus;

TEST(CorpusLabels, DocumentLabelFormatsOneBased) {
  EXPECT_EQ(corpus::document_label(1), "Document 1");
  EXPECT_EQ(corpus::document_label(12), "Document 12");
}

TEST(CorpusLabels, LabelNumberAcceptsBothSpellings) {
  EXPECT_EQ(corpus::label_number("Document 3"), 3);
  EXPECT_EQ(corpus::label_number("Document 12"), 12);
  EXPECT_EQ(corpus::label_number("D7"), 7);
  EXPECT_EQ(corpus::label_number("D10"), 10);
}

TEST(CorpusLabels, LabelNumberRejectsOtherText) {
  EXPECT_FALSE(corpus::label_number("Doc 3").has_value());
  EXPECT_FALSE(corpus::label_number("Document x").has_value());
  EXPECT_FALSE(corpus::label_number("D").has_value());
  EXPECT_FALSE(corpus::label_number("Document ").has_value());
  EXPECT_FALSE(corpus::label_number("3").has_value());
  EXPECT_FALSE(corpus::label_number("D3x").has_value());
}

TEST(CorpusEnums, RoundTripThroughStrings) {
  for (auto tag : {corpus::DatasetTag::eli5, corpus::DatasetTag::pubmedqa,
                   corpus::DatasetTag::longctx, corpus::DatasetTag::sec10q,
                   corpus::DatasetTag::custom}) {
    EXPECT_EQ(corpus::parse_dataset_tag(corpus::to_string(tag)), tag);
  }
  for (auto type : {corpus::DocType::single_doc_single_chunk,
                    corpus::DocType::single_doc_multi_chunk, corpus::DocType::multi_doc}) {
    EXPECT_EQ(corpus::parse_doc_type(corpus::to_string(type)), type);
  }
  EXPECT_THROW(corpus::parse_dataset_tag("nope"), venndi::ValidationError);
  EXPECT_THROW(corpus::parse_doc_type("nope"), venndi::ValidationError);
}

TEST(CorpusParse, MinimalSampleGetsDefaults) {
  auto samples = corpus::parse_dataset_text(
      R"({"query":"q?","documents":[{"text":"alpha"},{"text":"beta"}]})" "\n",
      corpus::DatasetTag::custom);
  ASSERT_EQ(samples.size(), 1u);
  const corpus::Sample& s = samples[0];
  EXPECT_EQ(s.query, "q?");
  ASSERT_EQ(s.documents.size(), 2u);
  EXPECT_EQ(s.documents[0].label, "Document 1");
  EXPECT_EQ(s.documents[1].label, "Document 2");
  EXPECT_EQ(s.documents[0].doc_id, "doc1");
  EXPECT_EQ(s.documents[1].doc_id, "doc2");
  EXPECT_FALSE(s.ground_truth.has_value());
  EXPECT_EQ(s.dataset_tag, corpus::DatasetTag::custom);
  EXPECT_EQ(s.doc_type, corpus::DocType::multi_doc);
}

TEST(CorpusParse, ExplicitFieldsWin) {
  auto samples = corpus::parse_dataset_text(
      R"({"query":"q?","documents":[{"id":"x1","text":"alpha","source_meta":"m"}],)"
      R"("ground_truth":"gt","dataset_tag":"pubmedqa","doc_type":"multi_doc"})" "\n",
      corpus::DatasetTag::custom);
  ASSERT_EQ(samples.size(), 1u);
  const corpus::Sample& s = samples[0];
  EXPECT_EQ(s.documents[0].doc_id, "x1");
  EXPECT_EQ(s.documents[0].source_meta, "m");
  EXPECT_EQ(s.ground_truth, "gt");
  EXPECT_EQ(s.dataset_tag, corpus::DatasetTag::pubmedqa);
}

TEST(CorpusParse, NullGroundTruthStaysEmpty) {
  auto samples = corpus::parse_dataset_text(
      R"({"query":"q?","documents":[{"text":"a"}],"ground_truth":null})" "\n",
      corpus::DatasetTag::custom);
  EXPECT_FALSE(samples[0].ground_truth.has_value());
}

TEST(CorpusParse, DocTypeDefaultsFollowDatasetTag) {
  EXPECT_EQ(corpus::default_doc_type(corpus::DatasetTag::eli5),
            corpus::DocType::single_doc_multi_chunk);
  EXPECT_EQ(corpus::default_doc_type(corpus::DatasetTag::pubmedqa),
            corpus::DocType::single_doc_multi_chunk);
  EXPECT_EQ(corpus::default_doc_type(corpus::DatasetTag::longctx),
            corpus::DocType::single_doc_single_chunk);
  EXPECT_EQ(corpus::default_doc_type(corpus::DatasetTag::sec10q),
            corpus::DocType::multi_doc);
  EXPECT_EQ(corpus::default_doc_type(corpus::DatasetTag::custom),
            corpus::DocType::multi_doc);
}

TEST(CorpusParse, ErrorsCarryLineNumbers) {
  const char* bad_json = "{\"query\":\"q\",\"documents\":[{\"text\":\"a\"}]}\nnot json\n";
  try {
    corpus::parse_dataset_text(bad_json, corpus::DatasetTag::custom);
    FAIL() << "expected ParseError";
  } catch (const venndi::ParseError& e) {
    EXPECT_EQ(e.position(), 2u);
  }

  struct Case {
    const char* line;
    const char* reason;
  };
  const Case cases[] = {
      {R"({"documents":[{"text":"a"}]})", "missing query"},
      {R"({"query":"  ","documents":[{"text":"a"}]})", "blank query"},
      {R"({"query":"q"})", "missing documents"},
      {R"({"query":"q","documents":[]})", "empty documents"},
      {R"({"query":"q","documents":[{"text":""}]})", "empty document text"},
      {R"({"query":"q","documents":[{"id":"x"}]})", "document without text"},
      {R"({"query":"q","documents":[{"text":"a"}],"dataset_tag":"bogus"})", "bad tag"},
      {R"([1,2,3])", "non-object line"},
  };
  for (const Case& c : cases) {
    EXPECT_THROW(corpus::parse_dataset_text(std::string(c.line) + "\n",
                                            corpus::DatasetTag::custom),
                 venndi::ParseError)
        << c.reason;
  }
}

TEST(CorpusParse, BlankLinesAreSkipped) {
  auto samples = corpus::parse_dataset_text(
      "\n" R"({"query":"q","documents":[{"text":"a"}]})" "\n\n",
      corpus::DatasetTag::custom);
  EXPECT_EQ(samples.size(), 1u);
}

TEST(CorpusRoundTrip, SerializeThenParseIsIdentity) {
  auto samples = corpus::load_dataset(venndi_test::fixtures_dir() / "pubmed_eval.jsonl");
  std::string text = corpus::serialize_dataset(samples);
  auto reparsed = corpus::parse_dataset_text(text, corpus::DatasetTag::custom);
  EXPECT_EQ(samples, reparsed);
}

TEST(CorpusFixtures, EggSampleShape) {
  auto samples = corpus::load_dataset(venndi_test::fixtures_dir() / "egg_sample.jsonl");
  ASSERT_EQ(samples.size(), 1u);
  const corpus::Sample& s = samples[0];
  EXPECT_EQ(s.query, "How to boil eggs?");
  ASSERT_EQ(s.documents.size(), 6u);
  EXPECT_EQ(corpus::labels_of(s),
            (std::vector<std::string>{"Document 1", "Document 2", "Document 3",
                                      "Document 4", "Document 5", "Document 6"}));
  EXPECT_FALSE(s.ground_truth.has_value());
}

TEST(CorpusFixtures, EvalDatasetShape) {
  auto samples = corpus::load_dataset(venndi_test::fixtures_dir() / "pubmed_eval.jsonl");
  ASSERT_EQ(samples.size(), 11u);
  for (const auto& s : samples) {
    EXPECT_EQ(s.dataset_tag, corpus::DatasetTag::pubmedqa);
    EXPECT_EQ(s.documents.size(), 3u);
    ASSERT_TRUE(s.ground_truth.has_value());
    EXPECT_FALSE(s.ground_truth->empty());
  }
}

TEST(CorpusStats, ContextCharsCountsCodepoints) {
  corpus::Sample s;
  s.query = "q";
  s.documents.push_back({"Document 1", "d1", "abc", std::nullopt});
  // "héllo" is 6 bytes but 5 scalar values
  s.documents.push_back({"Document 2", "d2", "h\xC3\xA9llo", std::nullopt});
  EXPECT_EQ(corpus::context_chars(s), 8u);
}

TEST(CorpusStats, FilterKeepsLongContexts) {
  auto make = [](std::size_t chars) {
    corpus::Sample s;
    s.query = "q";
    s.documents.push_back({"Document 1", "d1", std::string(chars, 'x'), std::nullopt});
    return s;
  };
  std::vector<corpus::Sample> samples{make(10), make(50), make(49)};
  auto kept = corpus::filter_by_context_length(samples, 50);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(corpus::context_chars(kept[0]), 50u);
}

TEST(CorpusStats, AveragesAcrossSamples) {
  auto samples = corpus::load_dataset(venndi_test::fixtures_dir() / "pubmed_eval.jsonl");
  corpus::CorpusStats stats = corpus::corpus_stats(samples);
  EXPECT_EQ(stats.sample_count, 11u);
  std::size_t total = 0;
  for (const auto& s : samples) total += corpus::context_chars(s);
  EXPECT_DOUBLE_EQ(stats.avg_context_chars, static_cast<double>(total) / 11.0);
  EXPECT_THROW(corpus::corpus_stats({}), venndi::PreconditionError);
}
