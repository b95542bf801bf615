#include "vistr/refstore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "vistr/errors.hpp"

namespace vistr {

nlohmann::json RefMeta::to_json() const {
  return {{"ref_id", ref_id},
          {"table_id", table_id},
          {"variable", variable},
          {"start_idx", span.start},
          {"end_idx", span.end},
          {"start_ts", format_timestamp(start_time)},
          {"end_ts", format_timestamp(end_time)},
          {"chart_type", std::string(vistr::to_string(chart_type))},
          {"trend_category", trend_category},
          {"trend_confidence", trend_confidence}};
}

RefMeta RefMeta::from_json(const nlohmann::json& j) {
  try {
    RefMeta m;
    m.ref_id = j.at("ref_id").get<std::string>();
    m.table_id = j.at("table_id").get<std::string>();
    m.variable = j.at("variable").get<std::string>();
    m.span = {j.at("start_idx").get<std::size_t>(), j.at("end_idx").get<std::size_t>()};
    const auto start = parse_timestamp(j.at("start_ts").get<std::string>());
    const auto end = parse_timestamp(j.at("end_ts").get<std::string>());
    if (!start || !end) throw FormatError(fmt::format("bad timestamps in record '{}'", m.ref_id));
    m.start_time = *start;
    m.end_time = *end;
    m.chart_type = chart_type_from_string(j.at("chart_type").get<std::string>());
    m.trend_category = j.value("trend_category", "");
    m.trend_confidence = j.value("trend_confidence", 0.0);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("malformed reference record: {}", e.what()));
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
}

std::string make_ref_id(const std::string& table_id, std::size_t variable_index, RowSpan span, ChartType type) {
  return fmt::format("{}.v{}.{}-{}.{}", table_id, variable_index, span.start, span.end, to_string(type));
}

void PruneConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 2.0)) {
    throw ConfigError(fmt::format("prune threshold must lie in (0, 2), got {}", threshold));
  }
}

double euclidean_distance(const Embedding& a, const Embedding& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
    const double d = a.values[i] - b.values[i];
    s += d * d;
  }
  return std::sqrt(s);
}

PruneResult prune(const std::vector<VisualizationReference>& refs, const PruneConfig& cfg) {
  cfg.validate();
  PruneResult out;
  if (refs.empty()) return out;
  for (const auto& r : refs) {
    if (r.meta.table_id != refs.front().meta.table_id) {
      throw StoreError(fmt::format("cannot prune across tables '{}' and '{}'", refs.front().meta.table_id,
                                   r.meta.table_id));
    }
  }
  std::vector<std::size_t> order(refs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ma = refs[a].meta;
    const auto& mb = refs[b].meta;
    const auto sa = ma.end_time - ma.start_time, sb = mb.end_time - mb.start_time;
    if (sa != sb) return sa > sb;
    if (ma.start_time != mb.start_time) return ma.start_time < mb.start_time;
    return ma.ref_id < mb.ref_id;
  });

  const double t2 = cfg.threshold * cfg.threshold;
  std::map<std::pair<std::string, ChartType>, std::vector<std::size_t>> kept;
  for (std::size_t idx : order) {
    auto& group = kept[{refs[idx].meta.variable, refs[idx].meta.chart_type}];
    const auto& e = refs[idx].embedding.values;
    std::optional<std::size_t> cover;
    for (std::size_t k : group) {
      const auto& f = refs[k].embedding.values;
      double s = 0.0;
      std::size_t i = 0;
      // Partial sums only grow, so the scan can stop once past threshold.
      for (; i < kEmbeddingDim && s < t2; i += 64) {
        for (std::size_t j = i; j < i + 64; ++j) {
          const double d = e[j] - f[j];
          s += d * d;
        }
      }
      if (s < t2) {
        cover = k;
        break;
      }
    }
    if (cover) {
      out.pruned.push_back(idx);
      out.pruned_by.push_back(*cover);
    } else {
      group.push_back(idx);
      out.retained.push_back(idx);
    }
  }
  return out;
}

std::string_view to_string(IndexMode mode) { return mode == IndexMode::kExact ? "exact" : "approximate"; }

IndexMode index_mode_from_string(std::string_view name) {
  if (name == "exact") return IndexMode::kExact;
  if (name == "approximate" || name == "ann") return IndexMode::kApproximate;
  throw ConfigError(fmt::format("unknown index mode '{}'", name));
}

namespace {

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace

bool KnnFilter::accepts(const RefMeta& m) const {
  if (variable && !iequals(*variable, m.variable)) return false;
  if (chart_type && *chart_type != m.chart_type) return false;
  if (from && m.start_time < *from) return false;
  if (to && m.end_time > *to) return false;
  return true;
}

VectorIndex::VectorIndex(IndexMode mode, HnswParams params) : mode_(mode), params_(params) {
  if (mode_ == IndexMode::kApproximate) {
    graph_ = std::make_unique<HnswGraph>(kEmbeddingDim, params_, [this](std::size_t s) { return row(s); });
  }
}

std::size_t VectorIndex::size() const {
  std::shared_lock lock(mutex_);
  return meta_.size();
}

void VectorIndex::insert(const std::vector<VisualizationReference>& refs) {
  std::unique_lock lock(mutex_);
  std::unordered_map<std::string, std::size_t> fresh;
  for (const auto& r : refs) {
    if (r.meta.ref_id.empty()) throw StoreError("reference has an empty ref_id");
    if (by_id_.count(r.meta.ref_id) || !fresh.emplace(r.meta.ref_id, 0).second) {
      throw StoreError(fmt::format("duplicate ref_id '{}'", r.meta.ref_id), {{"ref_id", r.meta.ref_id}});
    }
    if (std::abs(r.embedding.norm() - 1.0) > 1e-6) {
      throw ConfigError(fmt::format("embedding of '{}' is not unit-norm", r.meta.ref_id));
    }
  }
  vectors_.reserve(vectors_.size() + refs.size() * kEmbeddingDim);
  for (const auto& r : refs) {
    by_id_.emplace(r.meta.ref_id, meta_.size());
    meta_.push_back(r.meta);
    for (double v : r.embedding.values) vectors_.push_back(static_cast<float>(v));
    if (graph_) graph_->add();
  }
}

RefMeta VectorIndex::meta(std::size_t slot) const {
  std::shared_lock lock(mutex_);
  return meta_.at(slot);
}

std::vector<RefMeta> VectorIndex::all_meta() const {
  std::shared_lock lock(mutex_);
  return meta_;
}

std::optional<std::size_t> VectorIndex::find(const std::string& ref_id) const {
  std::shared_lock lock(mutex_);
  if (auto it = by_id_.find(ref_id); it != by_id_.end()) return it->second;
  return std::nullopt;
}

std::vector<float> VectorIndex::vector(std::size_t slot) const {
  std::shared_lock lock(mutex_);
  if (slot >= meta_.size()) throw StoreError(fmt::format("no slot {}", slot));
  return {row(slot), row(slot) + kEmbeddingDim};
}

void VectorIndex::set_trend(std::size_t slot, const std::string& category, double confidence) {
  std::unique_lock lock(mutex_);
  auto& m = meta_.at(slot);
  m.trend_category = category;
  m.trend_confidence = confidence;
}

namespace {

double dot_query(const float* row, const Embedding& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < kEmbeddingDim; ++i) s += static_cast<double>(row[i]) * q.values[i];
  return s;
}

}  // namespace

std::vector<KnnHit> VectorIndex::query_knn(const Embedding& query, std::size_t k, const KnnFilter& filter,
                                           bool exact) const {
  if (k == 0) throw ConfigError("k must be at least 1");
  std::shared_lock lock(mutex_);
  if (meta_.empty()) throw EmptyResult("the index is empty");

  std::vector<KnnHit> hits;
  auto better = [](const KnnHit& a, const KnnHit& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.ref_id < b.ref_id;
  };
  if (graph_ && !exact && filter.empty()) {
    std::vector<float> qf(query.values.begin(), query.values.end());
    for (const auto& [node, dist] : graph_->search(qf.data(), k, params_.ef_search)) {
      hits.push_back({node, meta_[node].ref_id, dot_query(row(node), query)});
    }
    std::sort(hits.begin(), hits.end(), better);
    return hits;
  }

  // Bounded heap: hits.front() is the worst kept hit.
  for (std::size_t s = 0; s < meta_.size(); ++s) {
    if (!filter.empty() && !filter.accepts(meta_[s])) continue;
    KnnHit h{s, {}, dot_query(row(s), query)};
    if (hits.size() == k) {
      const KnnHit& worst = hits.front();
      if (h.similarity < worst.similarity) continue;
      if (h.similarity == worst.similarity && meta_[s].ref_id >= worst.ref_id) continue;
    }
    h.ref_id = meta_[s].ref_id;
    hits.push_back(std::move(h));
    std::push_heap(hits.begin(), hits.end(), better);
    if (hits.size() > k) {
      std::pop_heap(hits.begin(), hits.end(), better);
      hits.pop_back();
    }
  }
  if (hits.empty()) throw EmptyResult("no reference passes the filter");
  std::sort(hits.begin(), hits.end(), better);
  return hits;
}

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kVectors = "vectors.bin";
constexpr const char* kMeta = "meta.jsonl";

}  // namespace

void VectorIndex::save(const std::filesystem::path& dir, const nlohmann::json& attributes) const {
  std::shared_lock lock(mutex_);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));

  {
    std::ofstream out(dir / kVectors, std::ios::binary);
    if (!out) throw IoError(fmt::format("cannot write '{}'", (dir / kVectors).string()));
    std::vector<unsigned char> buf(vectors_.size() * 4);
    for (std::size_t i = 0; i < vectors_.size(); ++i) {
      const auto bits = std::bit_cast<std::uint32_t>(vectors_[i]);
      for (int b = 0; b < 4; ++b) buf[4 * i + static_cast<std::size_t>(b)] = static_cast<unsigned char>(bits >> (8 * b));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("failed writing vectors");
  }
  {
    std::ofstream out(dir / kMeta);
    if (!out) throw IoError(fmt::format("cannot write '{}'", (dir / kMeta).string()));
    for (const auto& m : meta_) out << m.to_json().dump() << '\n';
  }
  nlohmann::json manifest = attributes.is_object() ? attributes : nlohmann::json::object();
  manifest["version"] = kFormatVersion;
  manifest["dim"] = kEmbeddingDim;
  manifest["mode"] = std::string(to_string(mode_));
  manifest["hnsw"] = {{"m", params_.m},
                      {"ef_construction", params_.ef_construction},
                      {"ef_search", params_.ef_search},
                      {"seed", params_.seed}};
  manifest["counts"]["entries"] = meta_.size();
  std::ofstream out(dir / kManifest);
  if (!out) throw IoError(fmt::format("cannot write '{}'", (dir / kManifest).string()));
  out << manifest.dump(2) << '\n';
}

std::unique_ptr<VectorIndex> VectorIndex::load(const std::filesystem::path& dir, nlohmann::json* attributes) {
  std::ifstream mf(dir / kManifest);
  if (!mf) throw IoError(fmt::format("no manifest in '{}'", dir.string()));
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("manifest is not JSON: {}", e.what()));
  }
  try {
    const int version = manifest.at("version").get<int>();
    if (version != kFormatVersion) {
      throw FormatError(fmt::format("index version {} is not supported (expected {})", version, kFormatVersion));
    }
    if (manifest.at("dim").get<std::size_t>() != kEmbeddingDim) throw FormatError("index dimension mismatch");
    HnswParams params;
    if (manifest.contains("hnsw")) {
      const auto& h = manifest["hnsw"];
      params = {h.at("m").get<std::size_t>(), h.at("ef_construction").get<std::size_t>(),
                h.at("ef_search").get<std::size_t>(), h.at("seed").get<std::uint64_t>()};
    }
    const IndexMode mode = index_mode_from_string(manifest.at("mode").get<std::string>());
    const auto entries = manifest.at("counts").at("entries").get<std::size_t>();

    std::vector<RefMeta> metas;
    {
      std::ifstream in(dir / kMeta);
      if (!in) throw FormatError("meta.jsonl is missing");
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
          metas.push_back(RefMeta::from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
          throw FormatError(fmt::format("corrupt meta record: {}", e.what()));
        }
      }
    }
    if (metas.size() != entries) {
      throw FormatError(fmt::format("meta.jsonl has {} records, manifest says {}", metas.size(), entries));
    }
    std::ifstream vin(dir / kVectors, std::ios::binary);
    if (!vin) throw FormatError("vectors.bin is missing");
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(vin)), std::istreambuf_iterator<char>());
    if (buf.size() != entries * kEmbeddingDim * 4) {
      throw FormatError(fmt::format("vectors.bin holds {} bytes, expected {}", buf.size(),
                                    entries * kEmbeddingDim * 4));
    }

    auto idx = std::make_unique<VectorIndex>(mode, params);
    idx->vectors_.resize(entries * kEmbeddingDim);
    for (std::size_t i = 0; i < idx->vectors_.size(); ++i) {
      std::uint32_t bits = 0;
      for (int b = 3; b >= 0; --b) bits = bits << 8 | buf[4 * i + static_cast<std::size_t>(b)];
      idx->vectors_[i] = std::bit_cast<float>(bits);
    }
    for (std::size_t s = 0; s < metas.size(); ++s) {
      if (!idx->by_id_.emplace(metas[s].ref_id, s).second) {
        throw FormatError(fmt::format("duplicate ref_id '{}' in meta.jsonl", metas[s].ref_id));
      }
    }
    idx->meta_ = std::move(metas);
    if (idx->graph_) {
      for (std::size_t s = 0; s < entries; ++s) idx->graph_->add();
    }
    if (attributes) *attributes = manifest;
    return idx;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("malformed manifest: {}", e.what()));
  }
}

}  // namespace vistr
