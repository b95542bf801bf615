#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vistr/table.hpp"

namespace vistr {

/// Inclusive row range.
struct RowSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start + 1; }
  bool operator==(const RowSpan&) const = default;
};

struct FacetConfig {
  std::size_t min_facet_len = 5;
  std::size_t max_facets = 30000;
};

/// A contiguous slice of one smoothed variable.
struct Facet {
  std::string variable;
  RowSpan span;
  std::vector<double> values;
  Timestamp start_time;
  Timestamp end_time;

  std::size_t length() const { return span.length(); }
};

/// Base segments: a change point c ends the running segment at c - 1 and
/// starts the next one at c. Out-of-range and duplicate points are ignored.
std::vector<RowSpan> base_segments(std::size_t n, std::span<const std::size_t> changepoints);

/// Every union of consecutive base segments that has at least
/// max(2, min_facet_len) rows, ordered by segment count and then start.
/// When more than max_facets survive, all single segments and the whole
/// series are kept first, then the longest spans (earlier start on ties).
std::vector<RowSpan> facet_spans(std::size_t n, std::span<const std::size_t> changepoints, const FacetConfig& cfg);

std::vector<Facet> generate_facets(const std::string& variable, std::span<const double> smoothed,
                                   std::span<const Timestamp> timestamps, std::span<const std::size_t> changepoints,
                                   const FacetConfig& cfg);

}  // namespace vistr
