#pragma once

// Code -> vector providers. Two implementations share one interface:
//
//  * ExternalEmbeddings: vectors computed offline by a pretrained code model
//    and shipped as JSON Lines, looked up by submission id.
//  * TfIdfProvider: hashed TF-IDF over significant C tokens, fitted on a
//    training corpus; can embed arbitrary code.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "autograde/clex.hpp"
#include "autograde/error.hpp"
#include "autograde/matrix.hpp"
#include "autograde/sequence.hpp"
#include "json.hpp"

namespace autograde::embed {

using json = nlohmann::json;

inline constexpr std::size_t kExternalDefaultSeqLen = 512;
inline constexpr std::size_t kTfIdfDefaultDim = 256;
inline constexpr std::size_t kTfIdfDefaultSeqLen = 512;

struct Embedding {
  std::vector<double> pooled;
  std::optional<Sequence> sequence;  // L x d when present

  std::size_t dim() const noexcept { return pooled.size(); }
  std::size_t seq_len() const noexcept { return sequence ? sequence->rows() : 0; }
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::size_t dimension() const = 0;
  virtual std::size_t max_seq_len() const = 0;
  virtual bool supports_id() const = 0;
  virtual bool supports_code() const = 0;
  virtual Embedding embed_by_id(const std::string& id) const = 0;
  virtual Embedding embed_code(std::string_view code) const = 0;
  // Enough to reconstruct the provider (see provider_from_config).
  virtual json config() const = 0;

  // Prefers lookup by id, falling back to embedding the code itself.
  Embedding embed(const std::string& id, std::string_view code) const {
    if (supports_id()) return embed_by_id(id);
    return embed_code(code);
  }
};

// Column mean over rows that are not entirely zero; padding is excluded.
inline std::vector<double> pool(const Sequence& seq) {
  std::vector<double> out(seq.cols(), 0.0);
  std::size_t used = 0;
  for (std::size_t r = 0; r < seq.rows(); ++r) {
    auto row = seq.row(r);
    if (row.empty()) continue;
    ++used;
    for (const auto& e : row) out[e.col] += e.value;
  }
  if (used) {
    for (auto& v : out) v /= static_cast<double>(used);
  }
  return out;
}

inline std::vector<double> pool(const Matrix& m) {
  if (m.rows() < 1) throw ShapeError("pool: sequence needs at least one row");
  return pool(Sequence::from_dense(m));
}

// ---------------------------------------------------------------------------
// External JSON Lines vectors

class ExternalEmbeddings final : public EmbeddingProvider {
 public:
  ExternalEmbeddings(std::size_t dim, std::size_t seq_len, std::string source)
      : dim_(dim), seq_len_(seq_len), source_(std::move(source)) {}

  std::size_t dimension() const override { return dim_; }
  std::size_t max_seq_len() const override { return seq_len_; }
  bool supports_id() const override { return true; }
  bool supports_code() const override { return false; }

  Embedding embed_by_id(const std::string& id) const override {
    auto it = table_.find(id);
    if (it == table_.end()) throw LookupError("no external embedding for id '" + id + "'");
    return it->second;
  }

  Embedding embed_code(std::string_view) const override {
    throw LookupError(
        "external embeddings cannot embed ad-hoc code; use the tfidf provider or add the "
        "submission to the vector file");
  }

  json config() const override {
    return {{"provider", "external"}, {"vectors", source_}, {"dim", dim_}, {"seq_len", seq_len_}};
  }

  std::size_t size() const noexcept { return table_.size(); }
  void insert(std::string id, Embedding e) { table_.insert_or_assign(std::move(id), std::move(e)); }

 private:
  std::size_t dim_;
  std::size_t seq_len_;
  std::string source_;
  std::unordered_map<std::string, Embedding> table_;
};

namespace detail {

inline std::vector<double> read_vector(const json& arr, std::size_t line, const char* what) {
  if (!arr.is_array()) throw FormatError(std::string("`") + what + "` must be an array", line);
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number()) throw FormatError(std::string("`") + what + "` holds a non-number", line);
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw FormatError(std::string("`") + what + "` holds a non-finite value", line);
    out.push_back(x);
  }
  return out;
}

}  // namespace detail

// `expected_dim` of 0 infers d from the first line.
inline std::unique_ptr<ExternalEmbeddings> parse_external_embeddings(
    std::istream& in, std::size_t seq_len = kExternalDefaultSeqLen, std::size_t expected_dim = 0,
    std::string source = {}) {
  std::size_t dim = expected_dim;
  std::unique_ptr<ExternalEmbeddings> provider;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;

    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line);
    }
    if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string()) {
      throw FormatError("each line needs a string `id`", line);
    }
    if (!obj.contains("pooled")) throw FormatError("missing `pooled`", line);
    Embedding e;
    e.pooled = detail::read_vector(obj["pooled"], line, "pooled");
    if (dim == 0) dim = e.pooled.size();
    if (dim == 0) throw FormatError("`pooled` is empty", line);
    if (e.pooled.size() != dim) {
      throw FormatError("`pooled` has length " + std::to_string(e.pooled.size()) + ", expected " +
                            std::to_string(dim),
                        line);
    }
    if (!provider) provider = std::make_unique<ExternalEmbeddings>(dim, seq_len, source);

    if (obj.contains("tokens") && !obj["tokens"].is_null()) {
      const auto& rows = obj["tokens"];
      if (!rows.is_array()) throw FormatError("`tokens` must be an array of arrays", line);
      Sequence seq(seq_len, dim);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        auto v = detail::read_vector(rows[r], line, "tokens");
        if (v.size() != dim) {
          throw FormatError("token row " + std::to_string(r) + " has length " +
                                std::to_string(v.size()) + ", expected " + std::to_string(dim),
                            line);
        }
        if (r >= seq_len) continue;  // truncate
        for (std::size_t c = 0; c < dim; ++c) seq.push(r, static_cast<std::uint32_t>(c), v[c]);
      }
      e.sequence = std::move(seq);
    }
    provider->insert(obj["id"].get<std::string>(), std::move(e));
  }
  if (!provider) provider = std::make_unique<ExternalEmbeddings>(dim, seq_len, source);
  return provider;
}

inline std::unique_ptr<ExternalEmbeddings> load_external_embeddings(
    const std::string& path, std::size_t seq_len = kExternalDefaultSeqLen, std::size_t expected_dim = 0) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open embedding file '" + path + "'");
  return parse_external_embeddings(in, seq_len, expected_dim, path);
}

// ---------------------------------------------------------------------------
// Hashed TF-IDF

inline constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct TfIdfModel {
  std::size_t dim = kTfIdfDefaultDim;
  std::size_t seq_len = kTfIdfDefaultSeqLen;
  std::size_t doc_count = 0;
  std::vector<std::size_t> doc_freq;  // per bucket
  std::vector<double> idf;            // ln((1+N)/(1+df)) + 1

  std::size_t bucket(std::string_view token) const { return static_cast<std::size_t>(fnv1a64(token) % dim); }
};

inline TfIdfModel tfidf_fit(std::span<const clex::TokenStream> corpus, std::size_t dim = kTfIdfDefaultDim,
                            std::size_t seq_len = kTfIdfDefaultSeqLen) {
  if (dim < 8) throw ValidationError("tfidf: dimension must be >= 8");
  if (seq_len < 1) throw ValidationError("tfidf: sequence length must be >= 1");
  if (corpus.empty()) throw ValidationError("tfidf: empty corpus");
  TfIdfModel m;
  m.dim = dim;
  m.seq_len = seq_len;
  m.doc_count = corpus.size();
  m.doc_freq.assign(dim, 0);
  std::vector<char> seen(dim);
  for (const auto& ts : corpus) {
    std::fill(seen.begin(), seen.end(), 0);
    for (const auto& t : clex::significant_tokens(ts)) seen[m.bucket(t.text)] = 1;
    for (std::size_t b = 0; b < dim; ++b) m.doc_freq[b] += static_cast<std::size_t>(seen[b]);
  }
  m.idf.resize(dim);
  const double n = static_cast<double>(m.doc_count);
  for (std::size_t b = 0; b < dim; ++b) {
    m.idf[b] = std::log((1.0 + n) / (1.0 + static_cast<double>(m.doc_freq[b]))) + 1.0;
  }
  return m;
}

inline Embedding tfidf_embed(const TfIdfModel& m, std::string_view code) {
  const auto tokens = clex::significant_tokens(clex::tokenize(code));
  Embedding e;
  e.pooled.assign(m.dim, 0.0);
  Sequence seq(m.seq_len, m.dim);
  std::vector<std::size_t> counts(m.dim, 0);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const std::size_t b = m.bucket(tokens[t].text);
    ++counts[b];
    if (t < m.seq_len) seq.push(t, static_cast<std::uint32_t>(b), m.idf[b]);
  }
  if (!tokens.empty()) {
    const double total = static_cast<double>(tokens.size());
    double norm2 = 0.0;
    for (std::size_t b = 0; b < m.dim; ++b) {
      e.pooled[b] = static_cast<double>(counts[b]) / total * m.idf[b];
      norm2 += e.pooled[b] * e.pooled[b];
    }
    const double norm = std::sqrt(norm2);
    if (norm > 0.0) {
      for (auto& v : e.pooled) v /= norm;
    }
  }
  e.sequence = std::move(seq);
  return e;
}

class TfIdfProvider final : public EmbeddingProvider {
 public:
  explicit TfIdfProvider(TfIdfModel model) : model_(std::move(model)) {}

  std::size_t dimension() const override { return model_.dim; }
  std::size_t max_seq_len() const override { return model_.seq_len; }
  bool supports_id() const override { return false; }
  bool supports_code() const override { return true; }

  Embedding embed_by_id(const std::string& id) const override {
    throw LookupError("tfidf provider embeds code, not ids ('" + id + "')");
  }
  Embedding embed_code(std::string_view code) const override { return tfidf_embed(model_, code); }

  json config() const override {
    return {{"provider", "tfidf"},         {"dim", model_.dim},
            {"seq_len", model_.seq_len},   {"doc_count", model_.doc_count},
            {"doc_freq", model_.doc_freq}, {"idf", model_.idf}};
  }

  const TfIdfModel& model() const noexcept { return model_; }

 private:
  TfIdfModel model_;
};

inline std::unique_ptr<EmbeddingProvider> provider_from_config(const json& cfg) {
  const auto kind = cfg.at("provider").get<std::string>();
  if (kind == "tfidf") {
    TfIdfModel m;
    m.dim = cfg.at("dim").get<std::size_t>();
    m.seq_len = cfg.at("seq_len").get<std::size_t>();
    m.doc_count = cfg.at("doc_count").get<std::size_t>();
    m.doc_freq = cfg.at("doc_freq").get<std::vector<std::size_t>>();
    m.idf = cfg.at("idf").get<std::vector<double>>();
    if (m.doc_freq.size() != m.dim || m.idf.size() != m.dim) {
      throw FormatError("tfidf config vectors do not match dim", 0);
    }
    return std::make_unique<TfIdfProvider>(std::move(m));
  }
  if (kind == "external") {
    return load_external_embeddings(cfg.at("vectors").get<std::string>(),
                                    cfg.value("seq_len", kExternalDefaultSeqLen),
                                    cfg.value("dim", std::size_t{0}));
  }
  throw ValidationError("unknown embedding provider '" + kind + "'");
}

}  // namespace autograde::embed
