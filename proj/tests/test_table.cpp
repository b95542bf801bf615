#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "support.hpp"
#include "vistr/changepoint.hpp"
#include "vistr/errors.hpp"
#include "vistr/facet.hpp"
#include "vistr/rng.hpp"
#include "vistr/smoothing.hpp"
#include "vistr/synth.hpp"
#include "vistr/table.hpp"

using namespace vistr;

namespace {

// Direct convolution with truncate-and-renormalize edges, written from the
// definition rather than from gaussian_kernel().
std::vector<double> convolve_oracle(const std::vector<double>& x, double sigma, int radius) {
  std::vector<double> out(x.size());
  const int n = static_cast<int>(x.size());
  for (int t = 0; t < n; ++t) {
    double num = 0.0, den = 0.0;
    for (int k = -radius; k <= radius; ++k) {
      if (t + k < 0 || t + k >= n) continue;
      const double w = std::exp(-0.5 * k * k / (sigma * sigma));
      num += w * x[t + k];
      den += w;
    }
    out[t] = num / den;
  }
  return out;
}

// Page-Hinkley recursion with the mean recomputed from scratch each step.
std::vector<std::size_t> pht_oracle(const std::vector<double>& x, double delta, double lambda) {
  std::vector<std::size_t> alarms;
  std::size_t since = 0;
  double u = 0.0, v = 0.0, umin = std::numeric_limits<double>::infinity(), vmin = umin;
  for (std::size_t t = 0; t < x.size(); ++t) {
    double sum = 0.0;
    for (std::size_t i = since; i <= t; ++i) sum += x[i];
    const double m = sum / double(t - since + 1);
    u += x[t] - m - delta;
    v += m - x[t] - delta;
    umin = std::min(umin, u);
    vmin = std::min(vmin, v);
    if (u - umin > lambda || v - vmin > lambda) {
      alarms.push_back(t);
      since = t + 1;
      u = v = 0.0;
      umin = vmin = std::numeric_limits<double>::infinity();
    }
  }
  return alarms;
}

std::vector<double> step_series(std::size_t n, const std::vector<std::pair<std::size_t, double>>& levels) {
  std::vector<double> s(n, 0.0);
  for (auto [from, level] : levels)
    for (std::size_t i = from; i < n; ++i) s[i] = level;
  return s;
}

}  // namespace

TEST(ParseTable, FourRowCsv) {
  const auto t = parse_table("Date,Close\n2020-01-02,1.5\n2020-01-03,2\n2020-01-06,3.25\n2020-01-07,4\n");
  ASSERT_EQ(t.variables.size(), 1u);
  EXPECT_EQ(t.rows(), 4u);
  EXPECT_EQ(t.variables[0].name, "Close");
  EXPECT_EQ(format_date(t.timestamps[2]), "2020-01-06");
  EXPECT_DOUBLE_EQ(t.variables[0].values[2], 3.25);
}

TEST(ParseTable, NonNumericCellReportsRowAndColumn) {
  try {
    parse_table("Date,Open,Close\n2020-01-02,1,2\n2020-01-03,abc,3\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 3u);
    EXPECT_EQ(e.col(), 2u);
    EXPECT_EQ(e.code(), ErrorCode::kParse);
  }
}

TEST(ParseTable, MissingCellIsParseError) {
  EXPECT_THROW(parse_table("Date,A,B\n2020-01-02,1,2\n2020-01-03,1\n"), ParseError);
}

TEST(ParseTable, DjiColumnsGiveFourVariables) {
  const auto t = parse_table(
      "Date,Open,High,Low,Close\n"
      "2021-01-04,30627.47,30674.28,29881.82,30223.89\n"
      "2021-01-05,30204.25,30504.89,30141.78,30391.60\n"
      "2021-01-06,30362.78,31022.65,30313.07,30829.40\n");
  ASSERT_EQ(t.variables.size(), 4u);
  EXPECT_EQ(t.variables[3].name, "Close");
  EXPECT_EQ(t.find_variable("high"), std::optional<std::size_t>(1));
}

TEST(ParseTable, SchemaErrors) {
  EXPECT_THROW(parse_table("Date,A\n2020-01-02,1\n"), SchemaError);
  EXPECT_THROW(parse_table("Date,A\n2020-01-02,1\n2020-01-02,2\n"), SchemaError);
  EXPECT_THROW(parse_table("Date\n2020-01-02\n2020-01-03\n"), SchemaError);
}

TEST(ParseTable, UnsortedRowsAreSorted) {
  const auto t = parse_table("Date,A\n2020-01-03,2\n2020-01-02,1\n2020-01-04,3\n");
  EXPECT_EQ(t.variables[0].values, (std::vector<double>{1, 2, 3}));
}

TEST(ParseTable, TimestampHints) {
  SchemaHint hint;
  hint.timestamp_column = "when";
  hint.timestamp_format = "%d/%m/%Y";
  const auto t = parse_table("x,when\n1,02/01/2020\n2,03/01/2020\n", hint);
  EXPECT_EQ(format_date(t.timestamps[0]), "2020-01-02");
  EXPECT_EQ(t.variables[0].name, "x");
}

TEST(ParseTable, SerializeRoundTrip) {
  RandomWalkOptions o;
  o.rows = 300;
  o.vars = 4;
  o.seed = 5;
  const auto t = random_walk_table(o);
  const auto back = parse_table(serialize_table(t), SchemaHint{t.table_id, {}, {}});
  EXPECT_EQ(back.timestamps, t.timestamps);
  EXPECT_EQ(back.variables, t.variables);

  TimeSeriesTable dt = t;
  for (std::size_t i = 0; i < dt.rows(); ++i) dt.timestamps[i] += std::chrono::seconds(3600 * 7 + 61);
  const auto back2 = parse_table(serialize_table(dt), SchemaHint{t.table_id, {}, {}});
  EXPECT_EQ(back2.timestamps, dt.timestamps);
}

TEST(Smoothing, ConstantIsPreservedExactly) {
  const std::vector<double> c(5, 5.0);
  EXPECT_EQ(gaussian_smooth(c, SmoothingConfig{2.0, 6}), c);
  const std::vector<double> odd(40, 0.1);
  EXPECT_EQ(gaussian_smooth(odd, SmoothingConfig{2.0, 6}), odd);
}

TEST(Smoothing, ImpulseMatchesConvolutionOracle) {
  const std::vector<double> x{0, 0, 1, 0, 0};
  const auto got = gaussian_smooth(x, SmoothingConfig{1.0, 2});
  const auto want = convolve_oracle(x, 1.0, 2);
  ASSERT_EQ(got.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(got[i], want[i], 1e-12) << i;
  // Center: e^0 / (1 + 2e^-0.5 + 2e^-2).
  EXPECT_NEAR(got[2], 1.0 / (1.0 + 2 * std::exp(-0.5) + 2 * std::exp(-2.0)), 1e-12);
}

TEST(Smoothing, RampInteriorUnchanged) {
  std::vector<double> ramp(10);
  std::iota(ramp.begin(), ramp.end(), 0.0);
  const auto cfg = SmoothingConfig::with_sigma(1.0);
  const auto got = gaussian_smooth(ramp, cfg);
  const auto want = convolve_oracle(ramp, 1.0, cfg.radius);
  for (std::size_t i = 0; i < ramp.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  for (int i = cfg.radius; i < 10 - cfg.radius; ++i) EXPECT_NEAR(got[i], ramp[i], 1e-9);
}

TEST(Smoothing, StaysWithinWindowBounds) {
  Rng rng(3);
  std::vector<double> x(500);
  for (auto& v : x) v = rng.normal() * 10 + (rng.uniform() < 0.05 ? 100 : 0);
  const SmoothingConfig cfg{2.0, 6};
  const auto s = gaussian_smooth(x, cfg);
  const auto want = convolve_oracle(x, 2.0, 6);
  for (std::size_t t = 0; t < x.size(); ++t) {
    const std::size_t lo = t >= 6 ? t - 6 : 0, hi = std::min(x.size() - 1, t + 6);
    const auto [mn, mx] = std::minmax_element(x.begin() + lo, x.begin() + hi + 1);
    EXPECT_GE(s[t], *mn);
    EXPECT_LE(s[t], *mx);
    EXPECT_NEAR(s[t], want[t], 1e-9);
  }
}

TEST(Smoothing, RejectsBadConfig) {
  EXPECT_THROW(gaussian_smooth(std::vector<double>{1, 2}, SmoothingConfig{0.0, 3}), ConfigError);
  EXPECT_THROW(gaussian_smooth(std::vector<double>{1, 2}, SmoothingConfig{1.0, -1}), ConfigError);
}

TEST(Pht, ConstantSeriesHasNoAlarms) {
  const std::vector<double> c(300, 4.2);
  EXPECT_TRUE(pht_changepoints(c, PhtConfig{0.05, 2.5, true}).empty());
  EXPECT_TRUE(pht_changepoints(c, PhtConfig::defaults_for(c)).empty());
}

TEST(Pht, NoiselessStepDetectedWithinLag) {
  const auto s = step_series(200, {{100, 5.0}});
  const auto got = pht_changepoints(s, PhtConfig{0.05, 2.5, true});
  EXPECT_EQ(got, pht_oracle(s, 0.05, 2.5));
  ASSERT_EQ(got.size(), 1u);
  EXPECT_GE(got[0], 100u);
  EXPECT_LE(got[0], 115u);
}

TEST(Pht, TwoStepsWithReset) {
  const auto s = step_series(200, {{100, 5.0}, {150, 0.0}});
  const auto got = pht_changepoints(s, PhtConfig{0.05, 2.5, true});
  EXPECT_EQ(got, pht_oracle(s, 0.05, 2.5));
  ASSERT_EQ(got.size(), 2u);
  EXPECT_GE(got[0], 100u);
  EXPECT_LE(got[0], 115u);
  EXPECT_GE(got[1], 150u);
  EXPECT_LE(got[1], 165u);
}

TEST(Pht, MatchesRecursionOracleOnNoise) {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> x(400);
    double level = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (i % 90 == 89) level += rng.normal() * 4;
      x[i] = level + rng.normal();
    }
    EXPECT_EQ(pht_changepoints(x, PhtConfig{0.5, 10.0, true}), pht_oracle(x, 0.5, 10.0)) << trial;
  }
}

TEST(Pht, FalseAlarmRateOnNoiseBelowFivePercent) {
  Rng rng(2024);
  int fired = 0;
  const int trials = 1000;
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<double> x(200);
    for (auto& v : x) v = 3.0 * rng.normal();
    // lambda = 10 sigma with the true sigma, as the property states.
    if (!pht_changepoints(x, PhtConfig{1.5, 30.0, true}).empty()) ++fired;
  }
  EXPECT_LT(fired, trials / 20);
}

TEST(Pht, OneSidedIgnoresDrops) {
  const auto s = step_series(200, {{100, -5.0}});
  EXPECT_TRUE(pht_changepoints(s, PhtConfig{0.05, 2.5, false}).empty());
  EXPECT_EQ(pht_changepoints(s, PhtConfig{0.05, 2.5, true}).size(), 1u);
}

TEST(Pht, RejectsBadConfig) {
  const std::vector<double> x{1, 2, 3};
  EXPECT_THROW(pht_changepoints(x, PhtConfig{-1.0, 2.5, true}), ConfigError);
  EXPECT_THROW(pht_changepoints(x, PhtConfig{0.1, 0.0, true}), ConfigError);
}

TEST(Facets, ThreeSegmentsGiveSixRuns) {
  const std::vector<std::size_t> cps{10, 20};
  const auto spans = facet_spans(30, cps, FacetConfig{1, 30000});
  const std::vector<RowSpan> want{{0, 9}, {10, 19}, {20, 29}, {0, 19}, {10, 29}, {0, 29}};
  EXPECT_EQ(spans, want);
}

TEST(Facets, NoChangePointsGivesWholeSeries) {
  const auto spans = facet_spans(30, std::vector<std::size_t>{}, FacetConfig{});
  ASSERT_EQ(spans.size(), 1u);
  EXPECT_EQ(spans[0], (RowSpan{0, 29}));
  EXPECT_TRUE(facet_spans(4, std::vector<std::size_t>{}, FacetConfig{5, 100}).empty());
}

TEST(Facets, CombinatorialCountAndProperties) {
  Rng rng(9);
  for (std::size_t k = 1; k <= 12; ++k) {
    const std::size_t n = 20 * k;
    std::vector<std::size_t> cps;
    for (std::size_t i = 1; i < k; ++i) cps.push_back(i * 20 + rng.below(5));
    const auto base = base_segments(n, cps);
    ASSERT_EQ(base.size(), k);
    const auto spans = facet_spans(n, cps, FacetConfig{1, 100000});
    EXPECT_EQ(spans.size(), k * (k + 1) / 2);

    std::set<std::size_t> starts, ends;
    for (const auto& b : base) {
      starts.insert(b.start);
      ends.insert(b.end);
    }
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& s : spans) {
      EXPECT_TRUE(starts.count(s.start) && ends.count(s.end));
      EXPECT_TRUE(seen.insert({s.start, s.end}).second);
    }
    for (const auto& b : base) EXPECT_TRUE(seen.count({b.start, b.end}));
  }
}

TEST(Facets, MinLengthFiltersAndKeepsLongSegments) {
  const std::vector<std::size_t> cps{3, 10, 12};
  const auto spans = facet_spans(30, cps, FacetConfig{5, 30000});
  for (const auto& s : spans) EXPECT_GE(s.length(), 5u);
  for (const auto& b : base_segments(30, cps))
    if (b.length() >= 5) { EXPECT_NE(std::find(spans.begin(), spans.end(), b), spans.end()); }
}

TEST(Facets, CapKeepsSinglesAndWholeSeries) {
  std::vector<std::size_t> cps;
  for (std::size_t c = 10; c < 1000; c += 10) cps.push_back(c);
  const auto spans = facet_spans(1000, cps, FacetConfig{5, 500});
  EXPECT_EQ(spans.size(), 500u);
  for (const auto& b : base_segments(1000, cps)) EXPECT_NE(std::find(spans.begin(), spans.end(), b), spans.end());
  EXPECT_NE(std::find(spans.begin(), spans.end(), RowSpan{0, 999}), spans.end());
}

TEST(Facets, GenerateCarriesValuesAndTimes) {
  RandomWalkOptions o;
  o.rows = 30;
  const auto t = random_walk_table(o);
  const std::vector<std::size_t> cps{10, 20};
  const auto facets = generate_facets("Close", t.variables[0].values, t.timestamps, cps, FacetConfig{1, 100});
  ASSERT_EQ(facets.size(), 6u);
  const auto& f = facets[4];
  EXPECT_EQ(f.span, (RowSpan{10, 29}));
  EXPECT_EQ(f.values.size(), 20u);
  EXPECT_EQ(f.values.front(), t.variables[0].values[10]);
  EXPECT_EQ(f.start_time, t.timestamps[10]);
  EXPECT_EQ(f.end_time, t.timestamps[29]);
}
