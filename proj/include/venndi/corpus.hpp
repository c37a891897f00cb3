#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "venndi/detail/text.hpp"
#include "venndi/error.hpp"

namespace venndi::corpus {

enum class DatasetTag { eli5, pubmedqa, longctx, sec10q, custom };

enum class DocType { single_doc_single_chunk, single_doc_multi_chunk, multi_doc };

inline std::string to_string(DatasetTag tag) {
  switch (tag) {
    case DatasetTag::eli5: return "eli5";
    case DatasetTag::pubmedqa: return "pubmedqa";
    case DatasetTag::longctx: return "longctx";
    case DatasetTag::sec10q: return "sec10q";
    case DatasetTag::custom: return "custom";
  }
  return "custom";
}

inline DatasetTag parse_dataset_tag(std::string_view text) {
  if (text == "eli5") return DatasetTag::eli5;
  if (text == "pubmedqa") return DatasetTag::pubmedqa;
  if (text == "longctx") return DatasetTag::longctx;
  if (text == "sec10q") return DatasetTag::sec10q;
  if (text == "custom") return DatasetTag::custom;
  throw ValidationError("unknown dataset_tag \"" + std::string(text) + "\"",
                        {std::string(text)});
}

inline std::string to_string(DocType type) {
  switch (type) {
    case DocType::single_doc_single_chunk: return "single_doc_single_chunk";
    case DocType::single_doc_multi_chunk: return "single_doc_multi_chunk";
    case DocType::multi_doc: return "multi_doc";
  }
  return "multi_doc";
}

inline DocType parse_doc_type(std::string_view text) {
  if (text == "single_doc_single_chunk") return DocType::single_doc_single_chunk;
  if (text == "single_doc_multi_chunk") return DocType::single_doc_multi_chunk;
  if (text == "multi_doc") return DocType::multi_doc;
  throw ValidationError("unknown doc_type \"" + std::string(text) + "\"",
                        {std::string(text)});
}

// How the source benchmarks chunk their context; used when a sample line
// does not declare doc_type explicitly.
inline DocType default_doc_type(DatasetTag tag) {
  switch (tag) {
    case DatasetTag::eli5: return DocType::single_doc_multi_chunk;
    case DatasetTag::pubmedqa: return DocType::single_doc_multi_chunk;
    case DatasetTag::longctx: return DocType::single_doc_single_chunk;
    case DatasetTag::sec10q: return DocType::multi_doc;
    case DatasetTag::custom: return DocType::multi_doc;
  }
  return DocType::multi_doc;
}

struct Document {
  std::string label;  // prompt-facing name, "Document 1".."Document n"
  std::string doc_id;
  std::string text;
  std::optional<std::string> source_meta;

  bool operator==(const Document&) const = default;
};

struct Sample {
  std::string query;
  std::vector<Document> documents;
  std::optional<std::string> ground_truth;
  DatasetTag dataset_tag = DatasetTag::custom;
  DocType doc_type = DocType::multi_doc;

  bool operator==(const Sample&) const = default;
};

inline std::string document_label(std::size_t position_1based) {
  return "Document " + std::to_string(position_1based);
}

// Doc number of a label written as "Document <k>" or "D<k>"; nullopt otherwise.
inline std::optional<int> label_number(std::string_view label) {
  std::string_view rest;
  if (label.starts_with("Document ")) {
    rest = label.substr(9);
  } else if (label.size() >= 2 && label[0] == 'D') {
    rest = label.substr(1);
  } else {
    return std::nullopt;
  }
  if (rest.empty() || rest.size() > 9) return std::nullopt;
  int value = 0;
  for (char c : rest) {
    if (c < '0' || c > '9') return std::nullopt;
    value = value * 10 + (c - '0');
  }
  return value;
}

inline std::vector<std::string> labels_of(const Sample& sample) {
  std::vector<std::string> labels;
  labels.reserve(sample.documents.size());
  for (const auto& doc : sample.documents) labels.push_back(doc.label);
  return labels;
}

// Context size in Unicode scalar values across all document texts.
inline std::size_t context_chars(const Sample& sample) {
  std::size_t total = 0;
  for (const auto& doc : sample.documents) total += detail::utf8_length(doc.text);
  return total;
}

struct CorpusStats {
  std::size_t sample_count = 0;
  double avg_context_chars = 0.0;
  DocType doc_type = DocType::multi_doc;
};

namespace detail_corpus {

inline Sample sample_from_json(const nlohmann::json& obj, std::size_t line_no,
                               DatasetTag default_tag) {
  auto fail = [&](const std::string& what) -> ParseError {
    return ParseError("line " + std::to_string(line_no) + ": " + what, line_no);
  };
  if (!obj.is_object()) throw fail("expected a JSON object");

  Sample sample;
  if (!obj.contains("query")) throw fail("missing required field \"query\"");
  if (!obj["query"].is_string()) throw fail("field \"query\" must be a string");
  sample.query = obj["query"].get<std::string>();
  if (detail::trim(sample.query).empty()) throw fail("field \"query\" must be non-empty");

  if (!obj.contains("documents")) throw fail("missing required field \"documents\"");
  if (!obj["documents"].is_array() || obj["documents"].empty()) {
    throw fail("field \"documents\" must be a non-empty array");
  }
  std::size_t position = 1;
  for (const auto& item : obj["documents"]) {
    if (!item.is_object()) throw fail("document entries must be objects");
    Document doc;
    doc.label = document_label(position);
    if (item.contains("id") && item["id"].is_string()) {
      doc.doc_id = item["id"].get<std::string>();
    } else {
      doc.doc_id = "doc" + std::to_string(position);
    }
    if (!item.contains("text")) throw fail("missing required field \"text\" in document " +
                                           std::to_string(position));
    if (!item["text"].is_string()) throw fail("document \"text\" must be a string");
    doc.text = item["text"].get<std::string>();
    if (doc.text.empty()) throw fail("document " + std::to_string(position) +
                                     " has empty \"text\"");
    if (item.contains("source_meta") && item["source_meta"].is_string()) {
      doc.source_meta = item["source_meta"].get<std::string>();
    }
    sample.documents.push_back(std::move(doc));
    ++position;
  }

  if (obj.contains("ground_truth") && !obj["ground_truth"].is_null()) {
    if (!obj["ground_truth"].is_string()) throw fail("field \"ground_truth\" must be a string or null");
    sample.ground_truth = obj["ground_truth"].get<std::string>();
  }

  sample.dataset_tag = default_tag;
  if (obj.contains("dataset_tag")) {
    if (!obj["dataset_tag"].is_string()) throw fail("field \"dataset_tag\" must be a string");
    try {
      sample.dataset_tag = parse_dataset_tag(obj["dataset_tag"].get<std::string>());
    } catch (const ValidationError& e) {
      throw fail(e.what());
    }
  }

  sample.doc_type = default_doc_type(sample.dataset_tag);
  if (obj.contains("doc_type")) {
    if (!obj["doc_type"].is_string()) throw fail("field \"doc_type\" must be a string");
    try {
      sample.doc_type = parse_doc_type(obj["doc_type"].get<std::string>());
    } catch (const ValidationError& e) {
      throw fail(e.what());
    }
  }
  return sample;
}

inline nlohmann::json sample_to_json(const Sample& sample) {
  nlohmann::json docs = nlohmann::json::array();
  for (const auto& doc : sample.documents) {
    nlohmann::json item{{"id", doc.doc_id}, {"text", doc.text}};
    if (doc.source_meta) item["source_meta"] = *doc.source_meta;
    docs.push_back(std::move(item));
  }
  nlohmann::json obj{{"query", sample.query},
                     {"documents", std::move(docs)},
                     {"dataset_tag", to_string(sample.dataset_tag)},
                     {"doc_type", to_string(sample.doc_type)}};
  if (sample.ground_truth) {
    obj["ground_truth"] = *sample.ground_truth;
  } else {
    obj["ground_truth"] = nullptr;
  }
  return obj;
}

}  // namespace detail_corpus

inline std::vector<Sample> parse_dataset_text(std::string_view text,
                                              DatasetTag default_tag) {
  std::vector<Sample> samples;
  std::size_t line_no = 0;
  for (const auto& line : detail::split_lines(text)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what(),
                       line_no);
    }
    samples.push_back(detail_corpus::sample_from_json(obj, line_no, default_tag));
  }
  return samples;
}

inline std::vector<Sample> load_dataset(const std::filesystem::path& path,
                                        DatasetTag default_tag = DatasetTag::custom) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset_text(buf.str(), default_tag);
}

inline std::string serialize_dataset(const std::vector<Sample>& samples) {
  std::string out;
  for (const auto& sample : samples) {
    out += detail_corpus::sample_to_json(sample).dump();
    out += '\n';
  }
  return out;
}

inline void save_dataset(const std::vector<Sample>& samples,
                         const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset file: " + path.string());
  out << serialize_dataset(samples);
}

// Keeps samples whose total context length is at least min_chars, so corpora
// can screen out thin-context samples (typical cutoffs: 3000 characters for
// conversational QA, 15000 for long-context sets).
inline std::vector<Sample> filter_by_context_length(const std::vector<Sample>& samples,
                                                    std::size_t min_chars) {
  std::vector<Sample> kept;
  for (const auto& sample : samples) {
    if (context_chars(sample) >= min_chars) kept.push_back(sample);
  }
  return kept;
}

inline CorpusStats corpus_stats(const std::vector<Sample>& samples) {
  if (samples.empty()) throw PreconditionError("corpus_stats requires at least one sample");
  CorpusStats stats;
  stats.sample_count = samples.size();
  std::size_t total = 0;
  for (const auto& sample : samples) total += context_chars(sample);
  stats.avg_context_chars = static_cast<double>(total) / static_cast<double>(samples.size());
  stats.doc_type = samples.front().doc_type;
  return stats;
}

}  // namespace venndi::corpus
