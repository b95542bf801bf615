#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "vistr/rng.hpp"

namespace vistr::testing {

struct FixtureFacet {
  std::string name;
  std::vector<double> values;
};

/// The twelve golden rendering fixtures. Values are closed-form or drawn
/// from the library's own portable Rng, so they never change.
inline std::vector<FixtureFacet> render_fixtures() {
  auto gen = [](std::size_t n, auto f) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = f(static_cast<double>(i) / static_cast<double>(n - 1), i);
    return v;
  };
  const double pi = std::numbers::pi;
  std::vector<FixtureFacet> out;
  out.push_back({"ramp", gen(10, [](double x, std::size_t) { return x; })});
  out.push_back({"descent", gen(40, [](double x, std::size_t) { return 50.0 - 20.0 * x; })});
  out.push_back({"constant", std::vector<double>(12, 3.0)});
  out.push_back({"sine", gen(120, [&](double x, std::size_t) { return std::sin(2 * pi * x); })});
  out.push_back({"two-bumps", gen(90, [](double x, std::size_t) {
                   return std::exp(-std::pow((x - 0.3) / 0.08, 2)) + std::exp(-std::pow((x - 0.7) / 0.08, 2));
                 })});
  out.push_back({"v-shape", gen(31, [](double x, std::size_t) { return std::abs(x - 0.5); })});
  out.push_back({"step", gen(60, [](double x, std::size_t) { return x < 0.5 ? 1.0 : 4.0; })});
  out.push_back({"spike", gen(50, [](double, std::size_t i) { return i == 25 ? 10.0 : 1.0; })});
  out.push_back({"zigzag", gen(21, [](double, std::size_t i) { return i % 2 ? 1.0 : -1.0; })});
  out.push_back({"exponential", gen(70, [](double x, std::size_t) { return std::exp(4.0 * x); })});
  out.push_back({"pair", {7.0, 2.0}});
  {
    Rng rng(1);
    std::vector<double> walk(300);
    double level = 100.0;
    for (auto& v : walk) v = (level += rng.normal());
    out.push_back({"walk", std::move(walk)});
  }
  return out;
}

/// 64-bit FNV-1a, used as a compact golden fingerprint of raster bytes.
template <typename Bytes>
std::uint64_t fnv1a(const Bytes& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (auto b : bytes) {
    h ^= static_cast<std::uint8_t>(b);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace vistr::testing
