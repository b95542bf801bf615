#include "vistr/hnsw.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "vistr/errors.hpp"

namespace vistr {
namespace {

// Independent partial sums keep the loop vectorizable without reassociation
// flags; the summation order is fixed, so results are reproducible.
float dot_float(const float* a, const float* b, std::size_t n) {
  float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
  }
  float tail = 0.0f;
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

// Per-thread visited marks, reset lazily with a generation counter.
struct VisitedSet {
  std::vector<std::uint32_t> mark;
  std::uint32_t generation = 0;

  void reset(std::size_t n) {
    if (mark.size() < n) mark.resize(n, 0);
    if (++generation == 0) {
      std::fill(mark.begin(), mark.end(), 0);
      generation = 1;
    }
  }
  bool insert(std::uint32_t id) {
    if (mark[id] == generation) return false;
    mark[id] = generation;
    return true;
  }
};

VisitedSet& visited_for_thread() {
  thread_local VisitedSet set;
  return set;
}

}  // namespace

double dot_f32(const float* a, const float* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

HnswGraph::HnswGraph(std::size_t dim, HnswParams params, RowAccessor row)
    : dim_(dim), params_(params), row_(std::move(row)), rng_state_(params.seed) {
  if (params_.m < 2 || params_.ef_construction < 1 || params_.ef_search < 1) {
    throw ConfigError("HNSW needs M >= 2 and positive ef values");
  }
  level_mult_ = 1.0 / std::log(static_cast<double>(params_.m));
}

float HnswGraph::distance(const float* a, std::uint32_t node) const {
  return 1.0f - dot_float(a, row_(node), dim_);
}

int HnswGraph::random_level() {
  // splitmix64 keeps level draws independent of any other generator state.
  rng_state_ += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = rng_state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  const double u = (static_cast<double>(z >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
  return static_cast<int>(std::floor(-std::log(u) * level_mult_));
}

std::vector<HnswGraph::Candidate> HnswGraph::search_layer(const float* query, const std::vector<Candidate>& entry,
                                                          std::size_t ef, int layer) const {
  VisitedSet& visited = visited_for_thread();
  visited.reset(size());
  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> frontier;  // nearest first
  std::priority_queue<Candidate> best;                                              // farthest first
  for (const auto& c : entry) {
    if (!visited.insert(c.second)) continue;
    frontier.push(c);
    best.push(c);
    if (best.size() > ef) best.pop();
  }
  while (!frontier.empty()) {
    const Candidate cur = frontier.top();
    if (best.size() >= ef && cur > best.top()) break;
    frontier.pop();
    for (std::uint32_t nb : links_[cur.second][static_cast<std::size_t>(layer)]) {
      if (!visited.insert(nb)) continue;
      const Candidate cand{distance(query, nb), nb};
      if (best.size() < ef || cand < best.top()) {
        frontier.push(cand);
        best.push(cand);
        if (best.size() > ef) best.pop();
      }
    }
  }
  std::vector<Candidate> out;
  out.reserve(best.size());
  while (!best.empty()) {
    out.push_back(best.top());
    best.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

// Keeps a candidate only if it is closer to the query than to every
// neighbour already kept, then tops up with the nearest rejects.
std::vector<std::uint32_t> HnswGraph::select_neighbors(const std::vector<Candidate>& candidates,
                                                       std::size_t m) const {
  std::vector<std::uint32_t> kept;
  std::vector<std::uint32_t> rejected;
  for (const auto& [dist, id] : candidates) {
    if (kept.size() >= m) break;
    bool good = true;
    for (std::uint32_t k : kept) {
      if (distance(row_(id), k) < dist) {
        good = false;
        break;
      }
    }
    (good ? kept : rejected).push_back(id);
  }
  for (std::size_t i = 0; i < rejected.size() && kept.size() < m; ++i) kept.push_back(rejected[i]);
  return kept;
}

void HnswGraph::add() {
  const auto id = static_cast<std::uint32_t>(size());
  const int level = random_level();
  levels_.push_back(level);
  links_.emplace_back(static_cast<std::size_t>(level) + 1);
  const float* q = row_(id);
  if (max_level_ < 0) {
    entry_ = id;
    max_level_ = level;
    return;
  }
  std::vector<Candidate> ep{{distance(q, entry_), entry_}};
  for (int layer = max_level_; layer > level; --layer) ep = {search_layer(q, ep, 1, layer).front()};
  for (int layer = std::min(level, max_level_); layer >= 0; --layer) {
    const auto found = search_layer(q, ep, params_.ef_construction, layer);
    const auto neighbors = select_neighbors(found, params_.m);
    links_[id][static_cast<std::size_t>(layer)] = neighbors;
    for (std::uint32_t nb : neighbors) {
      auto& back = links_[nb][static_cast<std::size_t>(layer)];
      back.push_back(id);
      if (back.size() > max_links(layer)) {
        std::vector<Candidate> cands;
        cands.reserve(back.size());
        const float* nb_row = row_(nb);
        for (std::uint32_t x : back) cands.push_back({distance(nb_row, x), x});
        std::sort(cands.begin(), cands.end());
        back = select_neighbors(cands, max_links(layer));
      }
    }
    ep = found;
  }
  if (level > max_level_) {
    entry_ = id;
    max_level_ = level;
  }
}

std::vector<std::pair<std::uint32_t, float>> HnswGraph::search(const float* query, std::size_t k,
                                                               std::size_t ef) const {
  std::vector<std::pair<std::uint32_t, float>> out;
  if (size() == 0 || k == 0) return out;
  std::vector<Candidate> ep{{distance(query, entry_), entry_}};
  for (int layer = max_level_; layer > 0; --layer) ep = {search_layer(query, ep, 1, layer).front()};
  const auto found = search_layer(query, ep, std::max(ef, k), 0);
  for (std::size_t i = 0; i < found.size() && i < k; ++i) out.emplace_back(found[i].second, found[i].first);
  return out;
}

}  // namespace vistr
