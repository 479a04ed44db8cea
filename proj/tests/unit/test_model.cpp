#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "autograde/model.hpp"

using namespace autograde;

namespace {

const std::vector<std::string> kCodes = {
    "int main(void) { int x = 1; printf(\"%d\\n\", x); return 0; }",
    "int main() { for (int i = 0; i < 10; i++) { printf(\"%d\", i); } return 0; }",
    "#include <stdio.h>\nint add(int a, int b) { return a + b; }\nint main() { return add(1, 2); }",
    "int main() { double d = 2.5; if (d > 1.0) { d = d * 2; } return (int)d; }",
    "int main() { int a[3] = {1, 2, 3}; int s = 0; while (s < 5) s += a[0]; return s; }",
    "int main() { char c = 'a'; putchar(c); return 0 }",
};

std::shared_ptr<const embed::EmbeddingProvider> provider(std::size_t dim = 16, std::size_t seq_len = 12) {
  std::vector<clex::TokenStream> streams;
  for (const auto& c : kCodes) streams.push_back(clex::tokenize(c));
  return std::make_shared<embed::TfIdfProvider>(embed::tfidf_fit(streams, dim, seq_len));
}

tabular::FeatureMatrix features(const embed::EmbeddingProvider& p, const std::vector<double>& y) {
  std::vector<std::vector<double>> rows;
  for (const auto& c : kCodes) rows.push_back(p.embed_code(c).pooled);
  return {Matrix::from_rows(rows), y};
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::path(::testing::TempDir()) / name).string();
}

GradingModel tabular_model(ModelKind kind, const json& params, const std::vector<double>& y) {
  GradingModel m;
  m.kind = kind;
  m.provider = provider();
  m.regressor = tabular::fit(tabular_family(kind), params, features(*m.provider, y));
  return m;
}

const std::vector<double> kScores = {9, 8, 6, 7, 5, 3};

}  // namespace

TEST(Model, KindNamesRoundTrip) {
  for (const auto& name : model_kind_names()) EXPECT_EQ(to_string(model_kind_from_string(name)), name);
  EXPECT_THROW(model_kind_from_string("svm"), ValidationError);
  EXPECT_EQ(model_kind_names().size(), 8u);
}

TEST(Model, ConstantModelGradesSeven) {
  const auto m = tabular_model(ModelKind::Rf, {{"n_trees", 5}}, std::vector<double>(kCodes.size(), 7.0));
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f", m.grade_code("int main() { return 42; }"));
  EXPECT_STREQ(buf, "7.00");
}

TEST(Model, TabularSaveLoadRoundTrip) {
  const std::vector<std::pair<ModelKind, json>> cases = {
      {ModelKind::Rf, {{"n_trees", 7}, {"seed", 4}}},
      {ModelKind::Ridge, {{"lambda", 0.5}}},
      {ModelKind::Gbt, {{"n_rounds", 10}, {"max_depth", 2}}},
      {ModelKind::Knn, {{"k", 3}}},
  };
  for (const auto& [kind, params] : cases) {
    const auto m = tabular_model(kind, params, kScores);
    const auto path = temp_path("model_" + to_string(kind) + ".json");
    save_model(m, path);
    const auto back = load_model(path);
    EXPECT_EQ(back.kind, kind);
    EXPECT_EQ(to_json(back).dump(), to_json(m).dump()) << to_string(kind);
    for (const auto& c : kCodes) EXPECT_EQ(back.grade_code(c), m.grade_code(c)) << to_string(kind);
    EXPECT_FALSE(std::filesystem::exists(path + ".tmp"));
  }
}

TEST(Model, NeuralSaveLoadRoundTrip) {
  auto p = provider();
  GradingModel cnn;
  cnn.kind = ModelKind::Cnn;
  cnn.provider = p;
  nn::CnnSpec cs;
  cs.conv_filters = 4;
  cs.dense_units = 6;
  cnn.regressor = nn::Cnn(cs, p->dimension(), p->max_seq_len(), 1, 6.0);

  GradingModel lstm;
  lstm.kind = ModelKind::Lstm;
  lstm.provider = p;
  nn::LstmSpec ls;
  ls.units = 5;
  ls.dense_units = 4;
  lstm.regressor = nn::Lstm(ls, p->dimension(), 2, 6.0);

  for (const auto* m : {&cnn, &lstm}) {
    const auto path = temp_path("model_" + to_string(m->kind) + ".json");
    save_model(*m, path);
    const auto back = load_model(path);
    EXPECT_EQ(to_json(back).dump(), to_json(*m).dump());
    for (const auto& c : kCodes) {
      const double s = back.grade_code(c);
      EXPECT_EQ(s, m->grade_code(c));
      EXPECT_GE(s, 0.0);
      EXPECT_LE(s, 10.0);
    }
  }
}

TEST(Model, HybridSaveLoadRoundTrip) {
  auto p = provider();
  std::vector<Sequence> xs;
  for (const auto& c : kCodes) xs.push_back(*p->embed_code(c).sequence);
  nn::LstmSpec ls;
  ls.units = 5;
  ls.dense_units = 4;
  auto fit = hybrid::hybrid_from_trained(hybrid::HybridKind::LstmRf, nn::Lstm(ls, p->dimension(), 3), xs, kScores,
                                         json{{"n_trees", 4}}, 0);
  GradingModel m;
  m.kind = ModelKind::LstmRf;
  m.provider = p;
  m.regressor = fit.model;
  const auto path = temp_path("model_lstm_rf.json");
  save_model(m, path);
  const auto back = load_model(path);
  for (const auto& c : kCodes) EXPECT_EQ(back.grade_code(c), m.grade_code(c));

  auto j = to_json(m);
  j["model"] = "cnn_rf";
  EXPECT_THROW(model_from_json(j), FormatError);
}

TEST(Model, ExternalProviderCannotGradeCode) {
  const auto vectors = temp_path("vectors.jsonl");
  {
    std::ofstream out(vectors);
    out << "{\"id\":\"a\",\"pooled\":[1,0]}\n{\"id\":\"b\",\"pooled\":[0,1]}\n";
  }
  GradingModel m;
  m.kind = ModelKind::Knn;
  m.provider = embed::load_external_embeddings(vectors);
  m.regressor = tabular::fit(tabular::Family::Knn, {{"k", 1}}, {Matrix::from_rows({{1, 0}, {0, 1}}), {4, 9}});
  EXPECT_EQ(m.predict(m.provider->embed_by_id("b")), 9.0);
  EXPECT_THROW(m.grade_code("int main() {}"), LookupError);

  const auto path = temp_path("model_external.json");
  save_model(m, path);
  EXPECT_EQ(load_model(path).predict(m.provider->embed_by_id("a")), 4.0);
}

TEST(Model, SequenceModelNeedsSequenceEmbedding) {
  auto p = provider();
  GradingModel m;
  m.kind = ModelKind::Cnn;
  m.provider = p;
  nn::CnnSpec cs;
  cs.conv_filters = 2;
  cs.dense_units = 2;
  m.regressor = nn::Cnn(cs, p->dimension(), p->max_seq_len(), 1);
  embed::Embedding pooled_only;
  pooled_only.pooled.assign(p->dimension(), 0.0);
  EXPECT_THROW(m.predict(pooled_only), ShapeError);
}

TEST(Model, LoadRejectsBadFiles) {
  EXPECT_THROW(load_model(temp_path("does_not_exist.json")), Error);
  const auto garbage = temp_path("garbage.json");
  write_file_atomic(garbage, "{not json");
  EXPECT_THROW(load_model(garbage), FormatError);

  auto j = to_json(tabular_model(ModelKind::Knn, {{"k", 2}}, kScores));
  j["format_version"] = 99;
  EXPECT_THROW(model_from_json(j), FormatError);
  j = to_json(tabular_model(ModelKind::Knn, {{"k", 2}}, kScores));
  j.erase("state");
  EXPECT_THROW(model_from_json(j), FormatError);
  j = to_json(tabular_model(ModelKind::Knn, {{"k", 2}}, kScores));
  j["model"] = "svm";
  EXPECT_THROW(model_from_json(j), ValidationError);
}
