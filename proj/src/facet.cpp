#include "vistr/facet.hpp"

#include <algorithm>

#include "vistr/errors.hpp"

namespace vistr {

std::vector<RowSpan> base_segments(std::size_t n, std::span<const std::size_t> changepoints) {
  std::vector<RowSpan> segments;
  if (n == 0) return segments;
  std::vector<std::size_t> cuts(changepoints.begin(), changepoints.end());
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  std::size_t start = 0;
  for (std::size_t c : cuts) {
    if (c == 0 || c >= n) continue;
    segments.push_back({start, c - 1});
    start = c;
  }
  segments.push_back({start, n - 1});
  return segments;
}

std::vector<RowSpan> facet_spans(std::size_t n, std::span<const std::size_t> changepoints, const FacetConfig& cfg) {
  const auto segments = base_segments(n, changepoints);
  const std::size_t k = segments.size();
  const std::size_t min_len = std::max<std::size_t>(2, cfg.min_facet_len);

  struct Candidate {
    RowSpan span;
    std::size_t segments;
  };
  std::vector<Candidate> candidates;
  for (std::size_t width = 1; width <= k; ++width) {
    for (std::size_t i = 0; i + width <= k; ++i) {
      const RowSpan span{segments[i].start, segments[i + width - 1].end};
      if (span.length() >= min_len) candidates.push_back({span, width});
    }
  }

  if (candidates.size() > cfg.max_facets) {
    std::vector<char> keep(candidates.size(), 0);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (candidates[i].segments == 1 || candidates[i].segments == k) {
        keep[i] = 1;
        ++kept;
      }
    }
    std::vector<std::size_t> order(candidates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const auto la = candidates[a].span.length(), lb = candidates[b].span.length();
      if (la != lb) return la > lb;
      return candidates[a].span.start < candidates[b].span.start;
    });
    for (std::size_t idx : order) {
      if (kept >= cfg.max_facets) break;
      if (!keep[idx]) {
        keep[idx] = 1;
        ++kept;
      }
    }
    std::vector<Candidate> filtered;
    filtered.reserve(kept);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (keep[i]) filtered.push_back(candidates[i]);
    }
    candidates.swap(filtered);
  }

  std::vector<RowSpan> spans;
  spans.reserve(candidates.size());
  for (const auto& c : candidates) spans.push_back(c.span);
  return spans;
}

std::vector<Facet> generate_facets(const std::string& variable, std::span<const double> smoothed,
                                   std::span<const Timestamp> timestamps, std::span<const std::size_t> changepoints,
                                   const FacetConfig& cfg) {
  if (timestamps.size() != smoothed.size()) throw SchemaError("timestamps and series lengths differ");
  std::vector<Facet> facets;
  for (const RowSpan& span : facet_spans(smoothed.size(), changepoints, cfg)) {
    Facet f;
    f.variable = variable;
    f.span = span;
    f.values.assign(smoothed.begin() + static_cast<std::ptrdiff_t>(span.start),
                    smoothed.begin() + static_cast<std::ptrdiff_t>(span.end) + 1);
    f.start_time = timestamps[span.start];
    f.end_time = timestamps[span.end];
    facets.push_back(std::move(f));
  }
  return facets;
}

}  // namespace vistr
