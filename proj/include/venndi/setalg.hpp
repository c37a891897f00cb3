#pragma once

// Set-expression trees over document labels, with exhaustive truth-table
// equivalence, minterm-DNF simplification, a Unicode/ASCII notation
// parser/renderer, and the derivation of the answer's effective evidence set.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "venndi/corpus.hpp"
#include "venndi/error.hpp"
#include "venndi/vdparse.hpp"

namespace venndi::setalg {

enum class Kind { Var, Union, Intersection, Complement, Empty, Universal };

struct SetExpr {
  Kind kind = Kind::Empty;
  std::string label;               // Var only
  std::vector<SetExpr> children;   // Union/Intersection: >=1, Complement: ==1

  bool operator==(const SetExpr& other) const {
    return kind == other.kind && label == other.label && children == other.children;
  }

  static SetExpr var(std::string name) {
    SetExpr e;
    e.kind = Kind::Var;
    e.label = std::move(name);
    return e;
  }
  static SetExpr empty() { return SetExpr{Kind::Empty, {}, {}}; }
  static SetExpr universal() { return SetExpr{Kind::Universal, {}, {}}; }
  static SetExpr unite(std::vector<SetExpr> children) {
    if (children.empty()) throw PreconditionError("union needs at least one child");
    SetExpr e;
    e.kind = Kind::Union;
    e.children = std::move(children);
    return e;
  }
  static SetExpr intersect(std::vector<SetExpr> children) {
    if (children.empty()) throw PreconditionError("intersection needs at least one child");
    SetExpr e;
    e.kind = Kind::Intersection;
    e.children = std::move(children);
    return e;
  }
  static SetExpr complement(SetExpr child) {
    SetExpr e;
    e.kind = Kind::Complement;
    e.children.push_back(std::move(child));
    return e;
  }
};

using Assignment = std::map<std::string, bool>;

// Boolean membership semantics: does a point with the given document
// memberships lie in the set?
inline bool evaluate(const SetExpr& expr, const Assignment& assignment) {
  switch (expr.kind) {
    case Kind::Var: {
      auto it = assignment.find(expr.label);
      if (it == assignment.end()) {
        throw UnknownLabelError("assignment has no value for label \"" + expr.label + "\"",
                                expr.label);
      }
      return it->second;
    }
    case Kind::Union:
      for (const auto& child : expr.children) {
        if (evaluate(child, assignment)) return true;
      }
      return false;
    case Kind::Intersection:
      for (const auto& child : expr.children) {
        if (!evaluate(child, assignment)) return false;
      }
      return true;
    case Kind::Complement:
      return !evaluate(expr.children.front(), assignment);
    case Kind::Empty:
      return false;
    case Kind::Universal:
      return true;
  }
  return false;
}

namespace detail_sa {

// Natural comparison: digit runs compare numerically, so D2 < D10.
inline bool natural_less(std::string_view a, std::string_view b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    bool da = std::isdigit(static_cast<unsigned char>(a[i])) != 0;
    bool db = std::isdigit(static_cast<unsigned char>(b[j])) != 0;
    if (da && db) {
      std::size_t ia = i, jb = j;
      while (ia < a.size() && std::isdigit(static_cast<unsigned char>(a[ia]))) ++ia;
      while (jb < b.size() && std::isdigit(static_cast<unsigned char>(b[jb]))) ++jb;
      std::string_view na = a.substr(i, ia - i);
      std::string_view nb = b.substr(j, jb - j);
      // strip leading zeros for the length comparison
      while (na.size() > 1 && na.front() == '0') na.remove_prefix(1);
      while (nb.size() > 1 && nb.front() == '0') nb.remove_prefix(1);
      if (na.size() != nb.size()) return na.size() < nb.size();
      if (na != nb) return na < nb;
      i = ia;
      j = jb;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  return a.size() - i < b.size() - j;
}

inline void collect_labels_into(const SetExpr& expr, std::set<std::string>& out) {
  if (expr.kind == Kind::Var) {
    out.insert(expr.label);
    return;
  }
  for (const auto& child : expr.children) collect_labels_into(child, out);
}

inline std::size_t leaf_count(const SetExpr& expr) {
  if (expr.children.empty()) return 1;
  std::size_t total = 0;
  for (const auto& child : expr.children) total += leaf_count(child);
  return total;
}

}  // namespace detail_sa

inline std::vector<std::string> collect_labels(const SetExpr& expr) {
  std::set<std::string> set;
  detail_sa::collect_labels_into(expr, set);
  std::vector<std::string> out(set.begin(), set.end());
  std::sort(out.begin(), out.end(), detail_sa::natural_less);
  return out;
}

inline constexpr std::size_t kMaxUniverse = 16;

// Exhaustive equivalence over the given universe; both expressions may only
// use labels from it. Deliberately brute force: with the 16-label cap this is
// at most 65536 evaluations, and it doubles as the oracle for everything else.
inline bool equivalent(const SetExpr& a, const SetExpr& b,
                       const std::vector<std::string>& universe) {
  std::set<std::string> allowed(universe.begin(), universe.end());
  for (const auto& expr : {std::cref(a), std::cref(b)}) {
    for (const auto& label : collect_labels(expr.get())) {
      if (!allowed.count(label)) {
        throw UnknownLabelError("label \"" + label + "\" is not in the universe", label);
      }
    }
  }
  if (universe.size() > kMaxUniverse) {
    throw LimitError("universe of " + std::to_string(universe.size()) +
                     " labels exceeds the exhaustive bound of " +
                     std::to_string(kMaxUniverse));
  }
  std::vector<std::string> labels(universe.begin(), universe.end());
  Assignment assignment;
  for (std::uint32_t mask = 0; mask < (1u << labels.size()); ++mask) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      assignment[labels[i]] = (mask >> i) & 1u;
    }
    if (evaluate(a, assignment) != evaluate(b, assignment)) return false;
  }
  return true;
}

inline std::string render_set_notation(const SetExpr& expr);

// Canonical form: flatten nested unions/intersections, drop single-child
// wrappers, and order children deterministically (fewer leaves first, then
// natural order of the rendered text). Purely structural; no logic changes.
inline SetExpr normalize(const SetExpr& expr) {
  SetExpr out;
  out.kind = expr.kind;
  out.label = expr.label;
  if (expr.kind == Kind::Union || expr.kind == Kind::Intersection) {
    for (const auto& child : expr.children) {
      SetExpr norm = normalize(child);
      if (norm.kind == expr.kind) {
        for (auto& grand : norm.children) out.children.push_back(std::move(grand));
      } else {
        out.children.push_back(std::move(norm));
      }
    }
    if (out.children.size() == 1) return std::move(out.children.front());
    std::stable_sort(out.children.begin(), out.children.end(),
                     [](const SetExpr& a, const SetExpr& b) {
                       std::size_t la = detail_sa::leaf_count(a);
                       std::size_t lb = detail_sa::leaf_count(b);
                       if (la != lb) return la < lb;
                       return detail_sa::natural_less(render_set_notation(a),
                                                      render_set_notation(b));
                     });
    return out;
  }
  for (const auto& child : expr.children) out.children.push_back(normalize(child));
  return out;
}

// Truth-table simplification to a canonical minterm DNF over the expression's
// own labels. Contradictions become Empty; tautologies become the full union
// of minterms (or Universal when there are no labels at all).
inline SetExpr simplify(const SetExpr& expr) {
  std::vector<std::string> labels = collect_labels(expr);
  if (labels.size() > kMaxUniverse) {
    throw LimitError("expression over " + std::to_string(labels.size()) +
                     " labels exceeds the exhaustive bound of " +
                     std::to_string(kMaxUniverse));
  }
  if (labels.empty()) {
    return evaluate(expr, {}) ? SetExpr::universal() : SetExpr::empty();
  }
  std::vector<SetExpr> minterms;
  Assignment assignment;
  for (std::uint32_t mask = 0; mask < (1u << labels.size()); ++mask) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      assignment[labels[i]] = (mask >> i) & 1u;
    }
    if (!evaluate(expr, assignment)) continue;
    std::vector<SetExpr> literals;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      SetExpr var = SetExpr::var(labels[i]);
      literals.push_back(((mask >> i) & 1u) ? var : SetExpr::complement(var));
    }
    minterms.push_back(literals.size() == 1 ? std::move(literals.front())
                                            : SetExpr::intersect(std::move(literals)));
  }
  if (minterms.empty()) return SetExpr::empty();
  if (minterms.size() == 1) return normalize(minterms.front());
  return normalize(SetExpr::unite(std::move(minterms)));
}

namespace detail_sa {

inline bool needs_parens(const SetExpr& child) {
  return child.kind == Kind::Union || child.kind == Kind::Intersection;
}

inline std::string render_compact_label(const std::string& label) {
  if (auto number = corpus::label_number(label)) {
    return "D" + std::to_string(*number);
  }
  return label;
}

}  // namespace detail_sa

// Unicode notation with compact labels: "(D2 ∩ D3) ∪ (D1 ∩ D2 ∩ D3)".
inline std::string render_set_notation(const SetExpr& expr) {
  using detail_sa::needs_parens;
  switch (expr.kind) {
    case Kind::Var:
      return detail_sa::render_compact_label(expr.label);
    case Kind::Empty:
      return "\xE2\x88\x85";  // ∅
    case Kind::Universal:
      return "\xCE\xBE";  // ξ
    case Kind::Complement: {
      const SetExpr& child = expr.children.front();
      std::string inner = render_set_notation(child);
      if (child.kind == Kind::Var || child.kind == Kind::Empty ||
          child.kind == Kind::Universal) {
        return inner + "\xE1\xB6\x9C";  // postfix ᶜ
      }
      return "(" + inner + ")\xE1\xB6\x9C";
    }
    case Kind::Union:
    case Kind::Intersection: {
      const char* op = expr.kind == Kind::Union ? " \xE2\x88\xAA " : " \xE2\x88\xA9 ";
      std::string out;
      for (std::size_t i = 0; i < expr.children.size(); ++i) {
        if (i) out += op;
        std::string inner = render_set_notation(expr.children[i]);
        if (needs_parens(expr.children[i])) {
          out += "(" + inner + ")";
        } else {
          out += inner;
        }
      }
      return out;
    }
  }
  return "\xE2\x88\x85";
}

namespace detail_sa {

enum class TokKind { LParen, RParen, Union, Intersection, Complement, Not, Empty, Universal, Label, End };

struct Token {
  TokKind kind = TokKind::End;
  std::string label;   // canonical universe label for Label tokens
  std::size_t pos = 0;  // byte offset
};

struct Lexer {
  std::string_view text;
  const std::vector<std::string>& universe;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& what, std::size_t at) const {
    throw ParseError(what + " at position " + std::to_string(at), at);
  }

  std::string resolve_label(int number, std::string_view spelled, std::size_t at) const {
    for (const auto& label : universe) {
      if (label == spelled) return label;
      auto n = corpus::label_number(label);
      if (n && *n == number) return label;
    }
    throw UnknownLabelError("unknown label \"" + std::string(spelled) +
                                "\" at position " + std::to_string(at),
                            std::string(spelled));
  }

  Token next() {
    while (pos < text.size() &&
           (text[pos] == ' ' || text[pos] == '\t' || text[pos] == '\n' || text[pos] == '\r')) {
      ++pos;
    }
    std::size_t at = pos;
    if (pos >= text.size()) return Token{TokKind::End, "", at};
    char c = text[pos];
    if (c == '(') { ++pos; return Token{TokKind::LParen, "", at}; }
    if (c == ')') { ++pos; return Token{TokKind::RParen, "", at}; }
    auto multibyte = [&](std::string_view seq) {
      if (text.substr(pos, seq.size()) == seq) {
        pos += seq.size();
        return true;
      }
      return false;
    };
    if (multibyte("\xE2\x88\xAA")) return Token{TokKind::Union, "", at};        // ∪
    if (multibyte("\xE2\x88\xA9")) return Token{TokKind::Intersection, "", at};  // ∩
    if (multibyte("\xE1\xB6\x9C")) return Token{TokKind::Complement, "", at};    // ᶜ
    if (multibyte("\xE2\x88\x85")) return Token{TokKind::Empty, "", at};         // ∅
    if (multibyte("\xCE\xBE")) return Token{TokKind::Universal, "", at};         // ξ

    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t end = pos;
      while (end < text.size() && std::isalpha(static_cast<unsigned char>(text[end]))) ++end;
      std::string word(text.substr(pos, end - pos));
      std::string lower = detail::to_lower(word);
      if (lower == "or") { pos = end; return Token{TokKind::Union, "", at}; }
      if (lower == "and") { pos = end; return Token{TokKind::Intersection, "", at}; }
      if (lower == "not") { pos = end; return Token{TokKind::Not, "", at}; }
      if (lower == "empty") { pos = end; return Token{TokKind::Empty, "", at}; }
      if (lower == "xi") { pos = end; return Token{TokKind::Universal, "", at}; }
      if (lower == "document" || lower == "documents" || word == "D") {
        std::size_t digits = end;
        while (digits < text.size() && text[digits] == ' ') ++digits;
        std::size_t dend = digits;
        while (dend < text.size() && std::isdigit(static_cast<unsigned char>(text[dend]))) ++dend;
        if (dend == digits) fail("expected a document number after \"" + word + "\"", end);
        int number = 0;
        for (std::size_t i = digits; i < dend; ++i) number = number * 10 + (text[i] - '0');
        std::string spelled = word == "D" ? "D" + std::to_string(number)
                                          : "Document " + std::to_string(number);
        pos = dend;
        return Token{TokKind::Label, resolve_label(number, spelled, at), at};
      }
      fail("unexpected word \"" + word + "\"", at);
    }
    fail("unexpected character", at);
  }
};

struct Parser {
  Lexer lexer;
  Token current;

  explicit Parser(std::string_view text, const std::vector<std::string>& universe)
      : lexer{text, universe} {
    current = lexer.next();
  }

  void advance() { current = lexer.next(); }

  [[noreturn]] void fail(const std::string& what) const {
    std::size_t at = current.kind == TokKind::End ? lexer.text.size() : current.pos;
    std::string where = current.kind == TokKind::End ? "end of input" : what;
    throw ParseError("unexpected " + where + " at position " + std::to_string(at), at);
  }

  SetExpr parse() {
    SetExpr expr = parse_union();
    if (current.kind != TokKind::End) fail("token");
    return expr;
  }

  SetExpr parse_union() {
    std::vector<SetExpr> children;
    children.push_back(parse_intersection());
    while (current.kind == TokKind::Union) {
      advance();
      children.push_back(parse_intersection());
    }
    if (children.size() == 1) return std::move(children.front());
    return SetExpr::unite(std::move(children));
  }

  SetExpr parse_intersection() {
    std::vector<SetExpr> children;
    children.push_back(parse_factor());
    while (current.kind == TokKind::Intersection) {
      advance();
      children.push_back(parse_factor());
    }
    if (children.size() == 1) return std::move(children.front());
    return SetExpr::intersect(std::move(children));
  }

  SetExpr parse_factor() {
    if (current.kind == TokKind::Not) {
      advance();
      return SetExpr::complement(parse_factor());
    }
    SetExpr expr = parse_primary();
    while (current.kind == TokKind::Complement) {
      advance();
      expr = SetExpr::complement(std::move(expr));
    }
    return expr;
  }

  SetExpr parse_primary() {
    switch (current.kind) {
      case TokKind::LParen: {
        advance();
        SetExpr inner = parse_union();
        if (current.kind != TokKind::RParen) fail("token (expected \")\")");
        advance();
        while (current.kind == TokKind::Complement) {
          advance();
          inner = SetExpr::complement(std::move(inner));
        }
        return inner;
      }
      case TokKind::Empty:
        advance();
        return SetExpr::empty();
      case TokKind::Universal:
        advance();
        return SetExpr::universal();
      case TokKind::Label: {
        SetExpr var = SetExpr::var(current.label);
        advance();
        return var;
      }
      default:
        fail("token");
    }
  }
};

}  // namespace detail_sa

// Parses Unicode (∩ ∪ ᶜ ∅ ξ) or ASCII (AND OR NOT EMPTY XI) notation. Labels
// are written "D<k>" or "Document <k>" and resolve to the universe label with
// that document number.
inline SetExpr parse_set_notation(std::string_view text,
                                  const std::vector<std::string>& universe) {
  detail_sa::Parser parser(text, universe);
  return parser.parse();
}

// The answer's effective evidence set: citation groups become intersections,
// and a lone citation of a document that step 2 grouped with others is read
// as endorsing that whole overlap. Labels marked irrelevant in step 3 are
// stripped first; groups that end up empty are skipped with a warning.
inline SetExpr derive_xi_prime(const vdparse::VDAnalysis& analysis,
                               std::vector<std::string>* warnings = nullptr) {
  std::set<std::string> irrelevant;
  for (const auto& info : analysis.unique_info) {
    if (!info.relevant) irrelevant.insert(info.label);
  }

  auto vars_for = [](const std::vector<std::string>& labels) {
    std::vector<SetExpr> vars;
    vars.reserve(labels.size());
    for (const auto& label : labels) vars.push_back(SetExpr::var(label));
    return vars;
  };

  std::vector<SetExpr> terms;
  std::set<std::string> seen;
  for (const auto& group : analysis.citations) {
    std::vector<std::string> labels;
    for (const auto& label : group.labels) {
      if (!irrelevant.count(label)) labels.push_back(label);
    }
    if (labels.empty()) {
      if (warnings) {
        warnings->push_back("citation group dropped: every member is marked irrelevant");
      }
      continue;
    }
    SetExpr term;
    if (labels.size() >= 2) {
      term = SetExpr::intersect(vars_for(labels));
    } else {
      // Singleton mention: if step 2 put this document in an overlap group,
      // the mention endorses the overlap itself.
      const std::string& label = labels.front();
      const vdparse::OverlapGroup* home = nullptr;
      for (const auto& overlap : analysis.overlap_groups) {
        if (overlap.members.size() >= 2 &&
            std::find(overlap.members.begin(), overlap.members.end(), label) !=
                overlap.members.end()) {
          home = &overlap;
          break;
        }
      }
      if (home) {
        std::vector<std::string> members;
        for (const auto& member : home->members) {
          if (!irrelevant.count(member)) members.push_back(member);
        }
        term = members.size() >= 2 ? SetExpr::intersect(vars_for(members))
                                   : SetExpr::var(label);
      } else {
        term = SetExpr::var(label);
      }
    }
    term = normalize(term);
    if (!seen.insert(render_set_notation(term)).second) continue;
    terms.push_back(std::move(term));
  }
  if (terms.empty()) return SetExpr::empty();
  if (terms.size() == 1) return terms.front();
  return normalize(SetExpr::unite(std::move(terms)));
}

}  // namespace venndi::setalg
