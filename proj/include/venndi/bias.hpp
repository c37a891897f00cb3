#pragma once

// Position-bias experiment: cyclically relabel the documents, re-ask, and
// check whether the analysis is invariant once mapped back to the original
// label space.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "venndi/corpus.hpp"
#include "venndi/error.hpp"
#include "venndi/llm.hpp"
#include "venndi/prompt.hpp"
#include "venndi/setalg.hpp"
#include "venndi/vdparse.hpp"

namespace venndi::bias {

// Bidirectional mapping between original labels and the labels used in a
// relabeled pass.
struct LabelMap {
  int shift = 0;
  std::map<std::string, std::string> forward;  // original -> relabeled

  static LabelMap identity(const std::vector<std::string>& labels) {
    LabelMap map;
    for (const auto& label : labels) map.forward[label] = label;
    return map;
  }

  std::string to_relabeled(const std::string& original) const {
    auto it = forward.find(original);
    if (it == forward.end()) {
      throw UnknownLabelError("label \"" + original + "\" is not in the label map",
                              original);
    }
    return it->second;
  }

  std::string to_original(const std::string& relabeled) const {
    for (const auto& [original, renamed] : forward) {
      if (renamed == relabeled) return original;
    }
    throw UnknownLabelError("label \"" + relabeled + "\" is not in the label map",
                            relabeled);
  }
};

// The document at original position i (1-based) becomes "Document
// ((i-1-shift) mod n)+1", and documents are reordered so labels ascend.
// shift=0 is the identity; shift=1 sends Document 1 to the last position.
inline std::pair<corpus::Sample, LabelMap> cyclic_relabel(const corpus::Sample& sample,
                                                          int shift) {
  int n = static_cast<int>(sample.documents.size());
  if (n == 0) throw PreconditionError("cannot relabel a sample with no documents");
  if (shift < 0 || shift >= n) {
    throw PreconditionError("shift must be in [0, " + std::to_string(n) + "), got " +
                            std::to_string(shift));
  }
  corpus::Sample relabeled = sample;
  LabelMap map;
  map.shift = shift;
  std::vector<corpus::Document> docs(sample.documents.size());
  for (int i = 1; i <= n; ++i) {
    int renumbered = ((i - 1 - shift) % n + n) % n + 1;
    corpus::Document doc = sample.documents[static_cast<std::size_t>(i - 1)];
    map.forward[doc.label] = corpus::document_label(static_cast<std::size_t>(renumbered));
    doc.label = map.forward[doc.label];
    docs[static_cast<std::size_t>(renumbered - 1)] = std::move(doc);
  }
  relabeled.documents = std::move(docs);
  return {std::move(relabeled), std::move(map)};
}

// Maps citation groups back to original labels, re-sorting by doc number.
inline std::vector<std::vector<std::string>> normalize_citations(
    const std::vector<vdparse::CitationGroup>& groups, const LabelMap& map) {
  std::vector<std::vector<std::string>> out;
  out.reserve(groups.size());
  for (const auto& group : groups) {
    std::vector<std::string> labels;
    labels.reserve(group.labels.size());
    for (const auto& label : group.labels) labels.push_back(map.to_original(label));
    vdparse::detail_vd::sort_labels_by_number(labels);
    out.push_back(std::move(labels));
  }
  return out;
}

inline setalg::SetExpr normalize_expr(const setalg::SetExpr& expr, const LabelMap& map) {
  setalg::SetExpr out = expr;
  if (out.kind == setalg::Kind::Var) {
    out.label = map.to_original(out.label);
    return out;
  }
  for (auto& child : out.children) child = normalize_expr(child, map);
  return setalg::normalize(out);
}

// Phrases that mark a citation as peripheral: the sentence acknowledges a
// document without drawing the answer's substance from it.
inline const vdparse::PatternList& peripheral_patterns() {
  static const vdparse::PatternList list{
      "peripheral",
      "v1",
      {
          "also mention",
          "also mentions",
          "also touches on",
          "supported by",
          "consistent across",
          "does not provide specific instructions",
          "do not provide specific instructions",
      }};
  return list;
}

// A citation is peripheral when the sentence it sits in matches one of the
// peripheral patterns.
inline bool is_peripheral_citation(std::string_view answer,
                                   const vdparse::CitationGroup& group) {
  std::size_t begin = group.span_begin;
  std::size_t end = group.span_end;
  if (begin > answer.size()) return false;
  std::size_t sent_begin = 0;
  for (std::size_t i = begin; i > 0; --i) {
    char c = answer[i - 1];
    if (c == '.' || c == '!' || c == '?' || c == '\n') {
      sent_begin = i;
      break;
    }
  }
  std::size_t sent_end = answer.size();
  for (std::size_t i = std::min(end, answer.size()); i < answer.size(); ++i) {
    char c = answer[i];
    if (c == '.' || c == '!' || c == '?' || c == '\n') {
      sent_end = i + 1;
      break;
    }
  }
  return peripheral_patterns().matches(answer.substr(sent_begin, sent_end - sent_begin));
}

struct PassResult {
  int shift = 0;
  LabelMap map;
  std::string answer;
  std::vector<std::vector<std::string>> citations_normalized;  // original labels
  std::vector<bool> peripheral;  // parallel to citations_normalized
  std::optional<setalg::SetExpr> xi_prime_normalized;          // VD passes only
  std::vector<std::string> warnings;
};

struct BiasReport {
  prompt::PromptKind kind = prompt::PromptKind::vd;
  std::vector<PassResult> passes;
  bool include_peripheral = false;
  bool invariant = false;        // citation sets (and xi' for VD) agree across passes
  std::size_t distinct_citation_sets = 0;
  std::string notes;

  nlohmann::json to_json() const {
    nlohmann::json passes_json = nlohmann::json::array();
    for (const auto& pass : passes) {
      nlohmann::json map_json = nlohmann::json::object();
      for (const auto& [original, renamed] : pass.map.forward) map_json[original] = renamed;
      nlohmann::json pass_json{{"shift", pass.shift},
                               {"label_map", std::move(map_json)},
                               {"answer", pass.answer},
                               {"citations_normalized", pass.citations_normalized},
                               {"peripheral", pass.peripheral},
                               {"warnings", pass.warnings}};
      if (pass.xi_prime_normalized) {
        pass_json["xi_prime"] = setalg::render_set_notation(*pass.xi_prime_normalized);
      } else {
        pass_json["xi_prime"] = nullptr;
      }
      passes_json.push_back(std::move(pass_json));
    }
    return nlohmann::json{{"prompt_kind", prompt::to_string(kind)},
                          {"include_peripheral", include_peripheral},
                          {"invariant", invariant},
                          {"distinct_citation_sets", distinct_citation_sets},
                          {"passes", std::move(passes_json)},
                          {"notes", notes}};
  }
};

struct PermutationConfig {
  std::string model = "gpt-4";
  double temperature = 0.1;
  prompt::OutputSpec output_spec;
  bool include_peripheral = false;  // count peripheral citations in invariance
};

// Completion plus one re-ask when the response does not parse as a five-step
// analysis; the second failure propagates.
inline std::pair<vdparse::VDAnalysis, std::string> answer_vd(
    llm::Client& client, const std::string& prompt_text,
    const std::vector<std::string>& labels, const std::string& model,
    double temperature) {
  llm::CompletionRequest request{model, prompt_text, temperature, std::nullopt};
  std::string raw = client.complete(request);
  try {
    return {vdparse::parse_vd_response(raw, labels), raw};
  } catch (const UnparseableResponseError&) {
    llm::CompletionRequest repair = request;
    repair.prompt += "\n\nYour previous response did not follow the required format. "
                     "Respond again with all five numbered steps, using the exact step "
                     "headings, followed by the final answer.";
    raw = client.complete(repair);
    return {vdparse::parse_vd_response(raw, labels), raw};
  }
}

namespace detail_bias {

[[noreturn]] inline void rethrow_with_shift(int shift) {
  std::string prefix = "shift " + std::to_string(shift) + ": ";
  try {
    throw;
  } catch (const CacheMissError& e) {
    throw CacheMissError(prefix + e.what(), e.key());
  } catch (const UnparseableResponseError& e) {
    throw UnparseableResponseError(prefix + e.what(), e.raw_text());
  } catch (const ValidationError& e) {
    throw ValidationError(prefix + e.what(), e.offenders());
  } catch (const ParseError& e) {
    throw ParseError(prefix + e.what(), e.position());
  } catch (const RateLimitError& e) {
    throw RateLimitError(prefix + e.what());
  } catch (const TransportError& e) {
    throw TransportError(prefix + e.what());
  } catch (const Error& e) {
    throw Error(prefix + e.what());
  }
}

}  // namespace detail_bias

// Runs one relabeled pass per shift and checks invariance in the original
// label space. For VD prompts the invariant is: identical core citation sets
// (peripheral groups excluded unless configured in) and equivalent derived
// evidence sets. For standard prompts only the citation sets are compared.
inline BiasReport run_permutation_passes(llm::Client& client, const corpus::Sample& sample,
                                         prompt::PromptKind kind,
                                         const std::vector<int>& shifts,
                                         const PermutationConfig& config = {},
                                         const prompt::Templates& templates =
                                             prompt::Templates::builtin()) {
  if (shifts.empty()) throw PreconditionError("permutation run needs at least one shift");
  BiasReport report;
  report.kind = kind;
  report.include_peripheral = config.include_peripheral;

  std::vector<std::string> universe = corpus::labels_of(sample);

  for (int shift : shifts) {
    try {
      auto [relabeled, map] = cyclic_relabel(sample, shift);
      prompt::PromptText prompt_text =
          prompt::build_prompt(relabeled, kind, config.output_spec, templates);
      PassResult pass;
      pass.shift = shift;
      pass.map = map;
      if (kind == prompt::PromptKind::vd) {
        auto [analysis, raw] = answer_vd(client, prompt_text.text, prompt_text.doc_labels,
                                         config.model, config.temperature);
        pass.answer = analysis.final_answer;
        pass.warnings = analysis.warnings;
        pass.citations_normalized = normalize_citations(analysis.citations, map);
        pass.peripheral.reserve(analysis.citations.size());
        for (const auto& group : analysis.citations) {
          pass.peripheral.push_back(is_peripheral_citation(analysis.final_answer, group));
        }
        setalg::SetExpr xi = setalg::derive_xi_prime(analysis, &pass.warnings);
        pass.xi_prime_normalized = normalize_expr(xi, map);
      } else {
        llm::CompletionRequest request{config.model, prompt_text.text, config.temperature,
                                       std::nullopt};
        std::string raw = client.complete(request);
        pass.answer = raw;
        auto citations =
            vdparse::extract_citations(raw, prompt_text.doc_labels, &pass.warnings);
        pass.citations_normalized = normalize_citations(citations, map);
        pass.peripheral.assign(citations.size(), false);
        for (std::size_t i = 0; i < citations.size(); ++i) {
          pass.peripheral[i] = is_peripheral_citation(raw, citations[i]);
        }
      }
      report.passes.push_back(std::move(pass));
    } catch (...) {
      detail_bias::rethrow_with_shift(shift);
    }
  }

  // Compare passes in the original label space.
  auto core_set = [&](const PassResult& pass) {
    std::set<std::vector<std::string>> out;
    for (std::size_t i = 0; i < pass.citations_normalized.size(); ++i) {
      if (!config.include_peripheral && pass.peripheral[i]) continue;
      out.insert(pass.citations_normalized[i]);
    }
    return out;
  };

  std::set<std::set<std::vector<std::string>>> distinct;
  for (const auto& pass : report.passes) distinct.insert(core_set(pass));
  report.distinct_citation_sets = distinct.size();

  bool invariant = distinct.size() <= 1;
  if (kind == prompt::PromptKind::vd && invariant) {
    const auto& first = report.passes.front();
    for (std::size_t i = 1; i < report.passes.size(); ++i) {
      const auto& other = report.passes[i];
      if (!first.xi_prime_normalized || !other.xi_prime_normalized ||
          !setalg::equivalent(*first.xi_prime_normalized, *other.xi_prime_normalized,
                              universe)) {
        invariant = false;
        break;
      }
    }
  }
  report.invariant = invariant;
  report.notes = invariant
                     ? "analysis is invariant under cyclic relabeling"
                     : "analysis changes under cyclic relabeling (" +
                           std::to_string(report.distinct_citation_sets) +
                           " distinct citation sets)";
  return report;
}

}  // namespace venndi::bias
