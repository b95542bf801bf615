#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <numeric>
#include <set>

#include <gtest/gtest.h>
#include <json.hpp>

#include "support.hpp"
#include "vistr/embedding.hpp"
#include "vistr/errors.hpp"
#include "vistr/refstore.hpp"
#include "vistr/render.hpp"
#include "vistr/vocabulary.hpp"

using namespace vistr;

namespace {

const DescriptorEmbedder& embedder() {
  static const DescriptorEmbedder e;
  return e;
}

const TrendRecognizer& recognizer() {
  static const TrendRecognizer r(TrendVocabulary::default_vocabulary(), std::make_shared<DescriptorEmbedder>());
  return r;
}

std::vector<double> two_bumps(std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = double(i) / double(n - 1);
    v[i] = 3.0 + std::exp(-std::pow((x - 0.28) / 0.1, 2)) + std::exp(-std::pow((x - 0.72) / 0.1, 2));
  }
  return v;
}

Embedding random_embedding(Rng& rng) { return Embedding::normalized(vistr::testing::random_unit(rng, kEmbeddingDim)); }

}  // namespace

TEST(Embedding, UnitNormAndDeterministic) {
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> v(5 + rng.below(100));
    for (auto& x : v) x = rng.normal();
    for (ChartType t : {ChartType::kLine, ChartType::kBar, ChartType::kArea}) {
      const auto img = render_chart(v, t);
      const Embedding a = embedder().embed_image(img), b = embedder().embed_image(img);
      EXPECT_NEAR(a.norm(), 1.0, 1e-6);
      EXPECT_EQ(a, b);
      for (double c : a.values) ASSERT_TRUE(std::isfinite(c));
    }
  }
}

TEST(Embedding, LineAndAreaAgree) {
  Rng rng(8);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> v(30);
    double level = 0.0;
    for (auto& x : v) x = (level += rng.normal());
    const auto line = embedder().embed_image(render_chart(v, ChartType::kLine));
    const auto area = embedder().embed_image(render_chart(v, ChartType::kArea));
    EXPECT_GE(similarity(line, area), 0.99);
  }
}

TEST(Embedding, AffineCopiesEmbedIdentically) {
  const auto v = two_bumps(60);
  std::vector<double> w(v.size());
  std::transform(v.begin(), v.end(), w.begin(), [](double x) { return 2 * x + 7; });
  for (ChartType t : {ChartType::kLine, ChartType::kBar, ChartType::kArea})
    EXPECT_EQ(embedder().embed_image(render_chart(v, t)), embedder().embed_image(render_chart(w, t)));
}

TEST(Embedding, ConstantRenderHasFlatTrace) {
  const auto trace = extract_trace(render_chart(std::vector<double>(20, 1.0), ChartType::kLine));
  ASSERT_EQ(trace.size(), kTracePoints);
  for (double t : trace) EXPECT_EQ(t, 0.5);
}

TEST(Embedding, RampTraceIsLinspace) {
  std::vector<double> ramp(10);
  std::iota(ramp.begin(), ramp.end(), 0.0);
  const RenderConfig cfg;
  const auto trace = extract_trace(render_chart(ramp, ChartType::kLine, cfg), cfg);
  for (std::size_t i = 0; i < trace.size(); ++i) EXPECT_NEAR(trace[i], double(i) / 63.0, 2.0 / cfg.plot_height());
}

TEST(Embedding, BlankImageIsEmptySketch) {
  EXPECT_THROW(extract_trace(ChartImage(224, 224, ChartType::kSketch)), EmptySketchError);
  EXPECT_THROW(embedder().embed_image(ChartImage(224, 224, ChartType::kLine)), EmptySketchError);
}

TEST(Embedding, DescriptorLayout) {
  const auto d = describe_image(render_chart(two_bumps(50), ChartType::kLine));
  const auto flat = d.flatten();
  EXPECT_EQ(flat.size(), 135u);
  for (double t : d.trace) {
    EXPECT_GE(t, 0.0);
    EXPECT_LE(t, 1.0);
  }
  for (std::size_t i = 0; i < d.diffs.size(); ++i) EXPECT_DOUBLE_EQ(d.diffs[i], d.trace[i + 1] - d.trace[i]);
  const double mean = std::accumulate(d.trace.begin(), d.trace.end(), 0.0) / 64.0;
  EXPECT_NEAR(d.stats[0], mean, 1e-12);
  EXPECT_DOUBLE_EQ(d.stats[5], d.trace.front());
  EXPECT_DOUBLE_EQ(d.stats[6], d.trace.back());
}

TEST(Embedding, ProjectionHasOrthonormalColumns) {
  const auto p = make_projection(DescriptorEmbedder::kSeed);
  ASSERT_EQ(p.rows(), 512);
  ASSERT_EQ(p.cols(), 135);
  const Eigen::MatrixXd gram = p.transpose() * p;
  EXPECT_LE((gram - Eigen::MatrixXd::Identity(135, 135)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE(make_projection(DescriptorEmbedder::kSeed) == p);
}

TEST(Embedding, OrthogonalDescriptorsGiveZeroSimilarity) {
  const auto p = make_projection(DescriptorEmbedder::kSeed);
  Rng rng(21);
  Eigen::VectorXd a(135), b(135);
  for (int i = 0; i < 135; ++i) {
    a[i] = rng.normal();
    b[i] = rng.normal();
  }
  a.normalize();
  b -= a.dot(b) * a;  // one Gram-Schmidt step
  b.normalize();
  const Eigen::VectorXd pa = p * a, pb = p * b;
  const auto ea = Embedding::normalized(std::span<const double>(pa.data(), 512));
  const auto eb = Embedding::normalized(std::span<const double>(pb.data(), 512));
  EXPECT_NEAR(similarity(ea, eb), 0.0, 1e-6);
}

TEST(Embedding, SimilarityBounds) {
  Rng rng(2);
  const Embedding e = random_embedding(rng);
  Embedding neg = e;
  for (double& c : neg.values) c = -c;
  EXPECT_NEAR(similarity(e, e), 1.0, 1e-12);
  EXPECT_NEAR(similarity(e, neg), -1.0, 1e-12);
  EXPECT_THROW(Embedding::normalized(std::vector<double>(512, 0.0)), ConfigError);
}

TEST(Embedding, DistanceDotIdentity) {
  Rng rng(77);
  for (int i = 0; i < 200; ++i) {
    const Embedding a = random_embedding(rng), b = random_embedding(rng);
    const double d = euclidean_distance(a, b);
    EXPECT_NEAR(d * d, 2.0 - 2.0 * a.dot(b), 1e-6);
  }
}

TEST(Vocabulary, DefaultHasTwentyThreeValidCategories) {
  const auto vocab = TrendVocabulary::default_vocabulary();
  ASSERT_EQ(vocab.size(), 23u);
  std::set<std::string> keys;
  for (const auto& c : vocab.categories()) {
    ASSERT_EQ(c.prototype.size(), 64u) << c.name;
    const auto [lo, hi] = std::minmax_element(c.prototype.begin(), c.prototype.end());
    if (c.name == "flat") {
      EXPECT_EQ(*lo, 0.5);
      EXPECT_EQ(*hi, 0.5);
    } else {
      EXPECT_EQ(*lo, 0.0) << c.name;
      EXPECT_EQ(*hi, 1.0) << c.name;
    }
    for (const auto& s : c.synonyms) EXPECT_EQ(vocab.at(vocab.resolve(s)).name, c.name) << s;
  }
  for (const char* name : {"two-peak", "double-bottom", "sharp drop", "zigzag"})
    EXPECT_NO_THROW(vocab.resolve(name)) << name;
}

TEST(Vocabulary, ShippedFileMatchesDefault) {
  const std::string path = std::string(VISTR_DATA_DIR) + "/trend_vocabulary.json";
  const auto vocab = TrendVocabulary::default_vocabulary();
  if (std::getenv("VISTR_UPDATE_GOLDEN")) {
    vocab.save(path);
    GTEST_SKIP() << "vocabulary file rewritten";
  }
  const auto loaded = TrendVocabulary::load(path);
  EXPECT_EQ(loaded.to_json(), vocab.to_json());
}

TEST(Vocabulary, InflectionsShareCategory) {
  const auto vocab = TrendVocabulary::default_vocabulary();
  EXPECT_EQ(vocab.resolve("rising"), vocab.resolve("upward"));
  EXPECT_EQ(vocab.resolve("rising"), vocab.resolve("increasing"));
  EXPECT_EQ(vocab.at(vocab.resolve("two peaks")).name, "two-peak");
  EXPECT_EQ(stem("valleys"), stem("valley"));
  const auto found = vocab.find_categories("a sharp drop after two peaks");
  ASSERT_EQ(found.size(), 2u);
  EXPECT_EQ(vocab.at(found[0]).name, "sharp drop");
  EXPECT_EQ(vocab.at(found[1]).name, "two-peak");
}

TEST(Vocabulary, UnknownAndAmbiguousPhrases) {
  const auto vocab = TrendVocabulary::default_vocabulary();
  try {
    vocab.resolve("xyzzy");
    FAIL();
  } catch (const UnknownTrendError& e) {
    EXPECT_FALSE(e.detail().at("nearest").empty());
  }
  EXPECT_THROW(vocab.resolve("increasing then a valley"), AmbiguousTrendError);
}

TEST(Vocabulary, InvalidDocumentsAreRejected) {
  auto doc = TrendVocabulary::default_vocabulary().to_json();
  auto dup = doc;
  dup["categories"][1]["synonyms"].push_back(dup["categories"][0]["synonyms"][0]);
  EXPECT_THROW(TrendVocabulary::from_json(dup), ConfigError);
  auto short_proto = doc;
  short_proto["categories"][2]["prototype"].erase(0);
  EXPECT_THROW(TrendVocabulary::from_json(short_proto), ConfigError);
  auto fewer = doc;
  fewer["categories"].erase(fewer["categories"].size() - 1);
  EXPECT_THROW(TrendVocabulary::from_json(fewer), ConfigError);
}

TEST(TextEmbedding, SynonymsEmbedIdentically) {
  EXPECT_EQ(recognizer().embed_text("rising"), recognizer().embed_text("upward"));
  EXPECT_THROW(recognizer().embed_text("xyzzy"), UnknownTrendError);
}

TEST(TextEmbedding, TwoPeaksMatchesTwoBumpRender) {
  const auto chart = embedder().embed_image(render_chart(two_bumps(80), ChartType::kLine));
  EXPECT_GE(similarity(recognizer().embed_text("two peaks"), chart), 0.8);
  EXPECT_EQ(recognizer().vocabulary().at(recognizer().recognize(chart).category).name, "two-peak");
}

TEST(Recognizer, PrototypesRecognizeThemselvesWithMargin) {
  const auto& r = recognizer();
  for (std::size_t c = 0; c < r.vocabulary().size(); ++c) {
    const auto m = r.recognize(r.prototype_embedding(c));
    EXPECT_EQ(m.category, c);
    EXPECT_NEAR(m.confidence, 1.0, 1e-6);
    double runner_up = -1.0;
    for (std::size_t o = 0; o < r.vocabulary().size(); ++o)
      if (o != c) runner_up = std::max(runner_up, similarity(r.prototype_embedding(c), r.prototype_embedding(o)));
    EXPECT_GE(1.0 - runner_up, 0.05) << r.vocabulary().at(c).name;
  }
}

TEST(Recognizer, NoiselessRampIsIncreasing) {
  std::vector<double> ramp(40);
  std::iota(ramp.begin(), ramp.end(), 0.0);
  const auto m = recognizer().recognize(embedder().embed_image(render_chart(ramp, ChartType::kLine)));
  EXPECT_EQ(recognizer().vocabulary().at(m.category).name, "increasing");
  EXPECT_GE(m.confidence, 0.9);
}
