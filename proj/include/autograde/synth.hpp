#pragma once

// Rubric-driven dataset synthesis. Correct seed programs are damaged by
// fault-injection operators and scored by the deduction table:
//
//   no output          -2
//   incorrect syntax   -1
//   incorrect logic    -3
//   half completed     fixed 3 marks
//
// with a floor of 3 marks.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "autograde/clex.hpp"
#include "autograde/corpus.hpp"
#include "autograde/csv.hpp"
#include "autograde/error.hpp"
#include "autograde/rng.hpp"

namespace autograde::synth {

enum class MutationKind { NoOutput, SyntaxError, LogicError, HalfCompleted };

inline std::string_view to_string(MutationKind k) {
  switch (k) {
    case MutationKind::NoOutput: return "NoOutput";
    case MutationKind::SyntaxError: return "SyntaxError";
    case MutationKind::LogicError: return "LogicError";
    case MutationKind::HalfCompleted: return "HalfCompleted";
  }
  return "?";
}

struct MutationPlan {
  std::vector<MutationKind> kinds;
  std::uint64_t seed = 0;

  bool contains(MutationKind k) const {
    return std::find(kinds.begin(), kinds.end(), k) != kinds.end();
  }

  // HalfCompleted, when present, must be the only kind.
  bool valid() const { return !contains(MutationKind::HalfCompleted) || kinds.size() == 1; }

  friend bool operator==(const MutationPlan&, const MutationPlan&) = default;
};

struct Rubric {
  double full_marks = 10.0;
  std::map<MutationKind, double> deductions = {
      {MutationKind::NoOutput, 2.0},
      {MutationKind::SyntaxError, 1.0},
      {MutationKind::LogicError, 3.0},
  };
  double half_completed_score = 3.0;
  double floor = 3.0;

  void validate() const {
    if (!(0.0 <= floor && floor <= half_completed_score && half_completed_score <= full_marks)) {
      throw ValidationError("rubric requires 0 <= floor <= half_completed_score <= full_marks");
    }
    for (const auto& [kind, d] : deductions) {
      if (!(d > 0.0)) throw ValidationError("rubric deductions must be positive");
    }
  }
};

inline double score_for(const MutationPlan& plan, const Rubric& rubric = {}) {
  if (!plan.valid()) throw ValidationError("HalfCompleted must not be combined with other kinds");
  if (plan.contains(MutationKind::HalfCompleted)) return rubric.half_completed_score;
  double score = rubric.full_marks;
  for (auto k : plan.kinds) score -= rubric.deductions.at(k);
  return std::max(rubric.floor, score);
}

namespace detail {

using clex::Token;
using clex::TokenKind;

inline std::string rebuild(const std::vector<Token>& tokens) { return clex::detokenize(tokens); }

// Index of the next non-whitespace, non-comment token after i, or npos.
inline std::size_t next_significant(const std::vector<Token>& t, std::size_t i) {
  for (std::size_t j = i + 1; j < t.size(); ++j) {
    if (t[j].kind != TokenKind::Whitespace && t[j].kind != TokenKind::Comment) return j;
  }
  return std::string::npos;
}

inline std::size_t prev_significant(const std::vector<Token>& t, std::size_t i) {
  for (std::size_t j = i; j-- > 0;) {
    if (t[j].kind != TokenKind::Whitespace && t[j].kind != TokenKind::Comment) return j;
  }
  return std::string::npos;
}

// Marks tokens that sit on a preprocessor line (first significant token `#`).
inline std::vector<bool> preprocessor_mask(const std::vector<Token>& t) {
  std::vector<bool> mask(t.size(), false);
  bool line_start = true;
  bool in_directive = false;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& tok = t[i];
    if (tok.kind == TokenKind::Whitespace || tok.kind == TokenKind::Comment) {
      if (tok.text.find('\n') != std::string::npos) {
        line_start = true;
        in_directive = false;
      }
      mask[i] = in_directive;
      continue;
    }
    if (line_start && tok.is_punct("#")) in_directive = true;
    line_start = false;
    mask[i] = in_directive;
  }
  return mask;
}

// Integer literals inside the parenthesized header of a for/while loop.
inline std::vector<bool> loop_header_mask(const std::vector<Token>& t) {
  std::vector<bool> mask(t.size(), false);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i].is(TokenKind::Keyword, "for") || t[i].is(TokenKind::Keyword, "while"))) continue;
    std::size_t j = next_significant(t, i);
    if (j == std::string::npos || !t[j].is_punct("(")) continue;
    int depth = 0;
    for (; j < t.size(); ++j) {
      if (t[j].is_punct("(")) ++depth;
      if (t[j].is_punct(")") && --depth == 0) break;
      mask[j] = true;
    }
  }
  return mask;
}

inline bool plain_decimal(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }) &&
         (s.size() == 1 || s.front() != '0');
}

}  // namespace detail

// Deletes a `;`, deletes a `}`, or drops the last character of a keyword.
inline std::string inject_syntax_error(std::string_view code, Rng& rng) {
  auto tokens = clex::tokenize(code).tokens;
  const bool any_punct = std::any_of(tokens.begin(), tokens.end(), [](const clex::Token& t) {
    return t.kind == clex::TokenKind::Punctuator;
  });
  if (!any_punct) throw NotMutable("syntax: no punctuator in code");

  std::vector<std::size_t> semis, braces, keywords;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].is_punct(";")) semis.push_back(i);
    if (tokens[i].is_punct("}")) braces.push_back(i);
    if (tokens[i].kind == clex::TokenKind::Keyword) keywords.push_back(i);
  }
  std::vector<const std::vector<std::size_t>*> strategies;
  for (const auto* s : {&semis, &braces, &keywords}) {
    if (!s->empty()) strategies.push_back(s);
  }
  if (strategies.empty()) throw NotMutable("syntax: no `;`, `}` or keyword to damage");

  const auto& sites = *strategies[rng.uniform_index(strategies.size())];
  const std::size_t at = sites[rng.uniform_index(sites.size())];
  if (&sites == &keywords) {
    tokens[at].text.pop_back();
  } else {
    tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(at));
  }
  return detail::rebuild(tokens);
}

// Swaps a relational operator, swaps `+`/`-`, or nudges a loop-bound
// integer literal by one. Preprocessor lines are left alone.
inline std::string inject_logic_error(std::string_view code, Rng& rng) {
  auto tokens = clex::tokenize(code).tokens;
  const auto pp = detail::preprocessor_mask(tokens);
  const auto loop = detail::loop_header_mask(tokens);
  static const std::map<std::string, std::string> relational = {
      {"<", ">"}, {">", "<"}, {"<=", ">="}, {">=", "<="}, {"==", "!="}, {"!=", "=="}};
  static const std::map<std::string, std::string> arithmetic = {{"+", "-"}, {"-", "+"}};

  std::vector<std::size_t> rel_sites, arith_sites, literal_sites;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (pp[i]) continue;
    const auto& t = tokens[i];
    if (t.kind == clex::TokenKind::Punctuator) {
      if (relational.contains(t.text)) rel_sites.push_back(i);
      if (arithmetic.contains(t.text)) arith_sites.push_back(i);
    } else if (t.kind == clex::TokenKind::IntLiteral && loop[i] && detail::plain_decimal(t.text) &&
               t.text.size() < 10) {
      literal_sites.push_back(i);
    }
  }
  std::vector<const std::vector<std::size_t>*> strategies;
  for (const auto* s : {&rel_sites, &arith_sites, &literal_sites}) {
    if (!s->empty()) strategies.push_back(s);
  }
  if (strategies.empty()) throw NotMutable("logic: no operator or loop-bound literal");

  const auto& sites = *strategies[rng.uniform_index(strategies.size())];
  const std::size_t at = sites[rng.uniform_index(sites.size())];
  auto& tok = tokens[at];
  if (&sites == &rel_sites) {
    tok.text = relational.at(tok.text);
  } else if (&sites == &arith_sites) {
    tok.text = arithmetic.at(tok.text);
  } else {
    const long value = std::stol(tok.text);
    const long delta = (value == 0 || rng.bernoulli(0.5)) ? 1 : -1;
    tok.text = std::to_string(value + delta);
  }
  return detail::rebuild(tokens);
}

inline bool is_output_call(const std::vector<clex::Token>& t, std::size_t i) {
  if (t[i].kind != clex::TokenKind::Identifier) return false;
  if (t[i].text != "printf" && t[i].text != "puts" && t[i].text != "putchar") return false;
  const std::size_t j = detail::next_significant(t, i);
  return j != std::string::npos && t[j].is_punct("(");
}

// Deletes one whole output statement (call through its `;`). When the call
// is the unbraced body of an if/else/loop it becomes an empty statement so
// the following statement does not move into the body.
inline std::string remove_output(std::string_view code, Rng& rng) {
  auto tokens = clex::tokenize(code).tokens;
  struct Site {
    std::size_t begin, end;  // token range [begin, end]
  };
  std::vector<Site> sites;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!is_output_call(tokens, i)) continue;
    int depth = 0;
    for (std::size_t j = i + 1; j < tokens.size(); ++j) {
      const auto& t = tokens[j];
      if (t.is_punct("(")) ++depth;
      if (t.is_punct(")")) --depth;
      if (t.is_punct(";") && depth == 0) {
        sites.push_back({i, j});
        break;
      }
      if (t.is_punct("{") || t.is_punct("}")) break;
    }
  }
  if (sites.empty()) throw NotMutable("no-output: no printf/puts/putchar statement");

  const Site s = sites[rng.uniform_index(sites.size())];
  const std::size_t before = detail::prev_significant(tokens, s.begin);
  const bool unbraced_body =
      before != std::string::npos &&
      (tokens[before].is_punct(")") || tokens[before].is(clex::TokenKind::Keyword, "else"));

  std::string prefix = detail::rebuild({tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(s.begin)});
  std::string suffix = detail::rebuild({tokens.begin() + static_cast<std::ptrdiff_t>(s.end + 1), tokens.end()});
  if (unbraced_body) return prefix + ";" + suffix;

  // Drop the whole line when the statement stood alone on it.
  const std::size_t line_start = prefix.find_last_of('\n');
  const std::size_t indent_from = line_start == std::string::npos ? 0 : line_start + 1;
  const bool alone_before =
      prefix.find_first_not_of(" \t", indent_from) == std::string::npos;
  const std::size_t line_end = suffix.find('\n');
  const bool alone_after =
      line_end != std::string::npos && suffix.find_first_not_of(" \t\r") >= line_end;
  if (alone_before && alone_after) {
    prefix.erase(indent_from);
    suffix.erase(0, line_end + 1);
  }
  return prefix + suffix;
}

inline std::size_t count_lines(std::string_view code) {
  if (code.empty()) return 0;
  std::size_t lines = static_cast<std::size_t>(std::count(code.begin(), code.end(), '\n'));
  if (code.back() != '\n') ++lines;
  return lines;
}

// Keeps the first ceil(L/2) lines.
inline std::string truncate_half(std::string_view code) {
  const std::size_t lines = count_lines(code);
  if (lines < 2) throw NotMutable("half-completed: need at least 2 lines");
  const std::size_t keep = (lines + 1) / 2;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < keep; ++i) pos = code.find('\n', pos) + 1;
  return std::string(code.substr(0, pos));
}

// Applies the plan in the fixed order NoOutput -> Logic -> Syntax.
inline std::string apply_plan(std::string_view code, const MutationPlan& plan) {
  Rng rng(plan.seed);
  if (plan.contains(MutationKind::HalfCompleted)) return truncate_half(code);
  std::string out(code);
  if (plan.contains(MutationKind::NoOutput)) out = remove_output(out, rng);
  if (plan.contains(MutationKind::LogicError)) out = inject_logic_error(out, rng);
  if (plan.contains(MutationKind::SyntaxError)) out = inject_syntax_error(out, rng);
  return out;
}

// Plan mix: 20% clean, 20% syntax, 20% logic, 15% no-output, 15% a random
// pair of distinct single kinds, 10% half completed.
inline MutationPlan draw_plan(Rng& rng, std::uint64_t plan_seed) {
  static const std::vector<double> weights = {0.20, 0.20, 0.20, 0.15, 0.15, 0.10};
  MutationPlan plan;
  plan.seed = plan_seed;
  switch (rng.weighted_index(weights)) {
    case 0: break;
    case 1: plan.kinds = {MutationKind::SyntaxError}; break;
    case 2: plan.kinds = {MutationKind::LogicError}; break;
    case 3: plan.kinds = {MutationKind::NoOutput}; break;
    case 4: {
      static const std::vector<std::vector<MutationKind>> pairs = {
          {MutationKind::NoOutput, MutationKind::LogicError},
          {MutationKind::NoOutput, MutationKind::SyntaxError},
          {MutationKind::LogicError, MutationKind::SyntaxError}};
      plan.kinds = pairs[rng.uniform_index(pairs.size())];
      break;
    }
    default: plan.kinds = {MutationKind::HalfCompleted}; break;
  }
  return plan;
}

struct SynthRow {
  corpus::Submission submission;
  MutationPlan plan;
  std::string seed_id;
};

struct SynthResult {
  corpus::Dataset dataset;
  std::vector<SynthRow> rows;
};

inline constexpr int kMaxPlanDraws = 32;

// Seeds are used round-robin. Row i draws its plan from a stream derived
// from (seed, i), so rows are independent of each other.
inline SynthResult synthesize(const std::vector<corpus::Submission>& seeds, std::size_t count,
                              const Rubric& rubric, std::uint64_t seed) {
  rubric.validate();
  if (count < 1) throw ValidationError("synthesize: count must be >= 1");
  if (seeds.empty()) throw ValidationError("synthesize: no seed programs");

  // A seed that supports no mutation at all is rejected up front.
  for (const auto& s : seeds) {
    bool any = false;
    for (auto k : {MutationKind::NoOutput, MutationKind::LogicError, MutationKind::SyntaxError,
                   MutationKind::HalfCompleted}) {
      try {
        apply_plan(s.code, MutationPlan{{k}, 0});
        any = true;
        break;
      } catch (const NotMutable&) {
      }
    }
    if (!any) throw NotMutable("seed '" + s.id + "' admits no mutation");
  }

  SynthResult out;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& src = seeds[i % seeds.size()];
    Rng rng(derive_seed(seed, i));
    bool done = false;
    for (int attempt = 0; attempt < kMaxPlanDraws && !done; ++attempt) {
      MutationPlan plan = draw_plan(rng, rng.next());
      std::string code;
      try {
        code = apply_plan(src.code, plan);
      } catch (const NotMutable&) {
        continue;
      }
      if (corpus::detail::is_blank(code)) continue;
      char id[64];
      std::snprintf(id, sizeof id, "%s-%05zu", src.id.c_str(), i);
      corpus::Submission sub{id, std::move(code), score_for(plan, rubric)};
      out.dataset.rows.push_back(sub);
      out.rows.push_back({std::move(sub), std::move(plan), src.id});
      done = true;
    }
    if (!done) throw NotMutable("seed '" + src.id + "': every drawn plan was not applicable");
  }
  return out;
}

// Plan sidecar: `id,kinds` with kinds joined by '+', empty for clean rows.
inline std::string plans_to_csv(const SynthResult& r) {
  std::string out = "id,kinds\n";
  for (const auto& row : r.rows) {
    std::string kinds;
    for (std::size_t i = 0; i < row.plan.kinds.size(); ++i) {
      if (i) kinds.push_back('+');
      kinds += to_string(row.plan.kinds[i]);
    }
    out += csv::join_row({row.submission.id, kinds});
  }
  return out;
}

}  // namespace autograde::synth
