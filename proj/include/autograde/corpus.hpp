#pragma once

// Graded submissions: CSV ingestion, seeded train/validation/test splits,
// and descriptive statistics.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "autograde/csv.hpp"
#include "autograde/error.hpp"
#include "autograde/rng.hpp"

namespace autograde::corpus {

inline constexpr double kMinScore = 0.0;
inline constexpr double kMaxScore = 10.0;

struct Submission {
  std::string id;
  std::string code;
  double score = 0.0;

  friend bool operator==(const Submission&, const Submission&) = default;
};

struct Dataset {
  std::vector<Submission> rows;

  std::size_t size() const noexcept { return rows.size(); }
  bool empty() const noexcept { return rows.empty(); }

  std::vector<double> scores() const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.score);
    return out;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct SplitRatios {
  double train = 0.5;
  double validation = 0.25;
  double test = 0.25;
};

struct SplitDataset {
  Dataset train;
  Dataset validation;
  Dataset test;
  std::uint64_t seed = 0;
};

struct DatasetStats {
  std::size_t row_count = 0;
  std::size_t total_words = 0;
  std::size_t max_words_per_row = 0;
  std::map<double, std::size_t> score_histogram;
};

namespace detail {

inline bool is_blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n\v\f") == std::string_view::npos;
}

inline double parse_score(const std::string& text, std::size_t line) {
  std::string_view s = text;
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("score '" + text + "' is not a decimal number", line);
  }
  return value;
}

inline std::string format_score(double score) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), score);
  return std::string(buf.data(), ptr);
}

}  // namespace detail

inline void validate(const Submission& s, std::size_t line = 0) {
  const std::string where = "row '" + s.id + "'" + (line ? " at line " + std::to_string(line) : "");
  if (s.id.empty()) throw ValidationError("empty id" + (line ? " at line " + std::to_string(line) : ""));
  if (!std::isfinite(s.score) || s.score < kMinScore || s.score > kMaxScore) {
    throw ValidationError(where + ": score " + detail::format_score(s.score) +
                          " outside [0,10]");
  }
  if (detail::is_blank(s.code)) throw ValidationError(where + ": code is empty");
}

inline Dataset parse_dataset(std::string_view text) {
  auto records = csv::parse(text);
  if (records.empty()) throw ParseError("missing header `id,code,score`", 1);
  const auto& header = records.front().fields;
  if (header != std::vector<std::string>{"id", "code", "score"}) {
    throw ParseError("header must be exactly `id,code,score`", records.front().line);
  }

  Dataset ds;
  std::unordered_set<std::string> seen;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() == 1 && rec.fields[0].empty()) continue;  // blank line
    if (rec.fields.size() != 3) {
      throw ParseError("expected 3 fields, found " + std::to_string(rec.fields.size()), rec.line);
    }
    Submission s{rec.fields[0], rec.fields[1], detail::parse_score(rec.fields[2], rec.line)};
    validate(s, rec.line);
    if (!seen.insert(s.id).second) {
      throw ValidationError("duplicate id '" + s.id + "' at line " + std::to_string(rec.line));
    }
    ds.rows.push_back(std::move(s));
  }
  return ds;
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str());
}

inline std::string to_csv(const Dataset& ds) {
  std::string out = "id,code,score\n";
  for (const auto& s : ds.rows) {
    out += csv::escape(s.id);
    out.push_back(',');
    out += csv::quote(s.code);
    out.push_back(',');
    out += detail::format_score(s.score);
    out.push_back('\n');
  }
  return out;
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset '" + path + "'");
  out << to_csv(ds);
}

// Seeded shuffle, then floor(N*r_train), floor(N*r_val), remainder.
inline SplitDataset split(const Dataset& ds, SplitRatios ratios = {}, std::uint64_t seed = 0) {
  if (!(ratios.train > 0 && ratios.validation > 0 && ratios.test > 0)) {
    throw ValidationError("split ratios must be positive");
  }
  if (std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    throw ValidationError("split ratios must sum to 1");
  }
  const std::size_t n = ds.size();
  if (n < 3) throw ValidationError("need at least 3 rows to split, got " + std::to_string(n));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);

  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.train));
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.validation));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
    throw ValidationError("split leaves an empty part for N=" + std::to_string(n));
  }

  SplitDataset out;
  out.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = ds.rows[order[i]];
    if (i < n_train) {
      out.train.rows.push_back(row);
    } else if (i < n_train + n_val) {
      out.validation.rows.push_back(row);
    } else {
      out.test.rows.push_back(row);
    }
  }
  return out;
}

// Words are maximal runs of non-whitespace characters.
inline std::size_t count_words(std::string_view text) {
  std::size_t words = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
    if (!space && !in_word) ++words;
    in_word = !space;
  }
  return words;
}

inline DatasetStats dataset_stats(const Dataset& ds) {
  DatasetStats st;
  st.row_count = ds.size();
  for (const auto& s : ds.rows) {
    const std::size_t w = count_words(s.code);
    st.total_words += w;
    st.max_words_per_row = std::max(st.max_words_per_row, w);
    ++st.score_histogram[s.score];
  }
  return st;
}

}  // namespace autograde::corpus
