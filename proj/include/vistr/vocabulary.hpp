#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "vistr/embedding.hpp"

namespace vistr {

struct TrendCategory {
  std::string name;
  std::vector<std::string> synonyms;
  std::vector<double> prototype;  // 64 points, min-max normalized (flat = all 0.5)
};

/// Lowercases and strips common English suffixes so that inflections share
/// a key: "rising" and "rise" -> "ris", "dropped" -> "drop", "valleys" ->
/// "valley".
std::string stem(std::string_view word);

/// Lowercase alphanumeric tokens; everything else separates.
std::vector<std::string> tokenize(std::string_view text);

/// The trend-word dictionary. Each synonym is matched as a sequence of
/// stemmed tokens, and every synonym key belongs to exactly one category.
class TrendVocabulary {
 public:
  static constexpr std::size_t kCategoryCount = 23;

  /// Validates count, prototype length and range, and synonym uniqueness;
  /// throws ConfigError.
  explicit TrendVocabulary(std::vector<TrendCategory> categories, int version = 1);

  static TrendVocabulary default_vocabulary();
  static TrendVocabulary from_json(const nlohmann::json& doc);
  static TrendVocabulary load(const std::filesystem::path& path);  // throws IoError, ConfigError
  nlohmann::json to_json() const;
  void save(const std::filesystem::path& path) const;

  int version() const { return version_; }
  std::size_t size() const { return categories_.size(); }
  const std::vector<TrendCategory>& categories() const { return categories_; }
  const TrendCategory& at(std::size_t i) const { return categories_.at(i); }
  std::size_t index_of(std::string_view name) const;  // throws UnknownTrendError

  /// Distinct categories whose synonyms occur in `text`, in order of first
  /// occurrence. Scans left to right and takes the longest synonym at each
  /// position, so "two peaks" is two-peak rather than peak.
  std::vector<std::size_t> find_categories(std::string_view text) const;

  /// Exactly one category for a trend phrase. Throws UnknownTrendError with
  /// the nearest lexicon entries when nothing matches and
  /// AmbiguousTrendError when several categories do.
  std::size_t resolve(std::string_view phrase) const;

  /// Up to `limit` synonyms closest to `phrase` by edit distance.
  std::vector<std::string> nearest_entries(std::string_view phrase, std::size_t limit = 3) const;

 private:
  int version_;
  std::vector<TrendCategory> categories_;
  std::unordered_map<std::string, std::size_t> synonym_index_;  // stemmed key -> category
  std::size_t longest_synonym_ = 1;                             // in tokens
};

struct TrendMatch {
  std::size_t category = 0;
  double confidence = 0.0;
};

/// Prototype embeddings of a vocabulary under one embedder. Immutable after
/// construction and safe to share between threads.
class TrendRecognizer {
 public:
  TrendRecognizer(TrendVocabulary vocab, std::shared_ptr<const Embedder> embedder);

  const TrendVocabulary& vocabulary() const { return vocab_; }
  const Embedder& embedder() const { return *embedder_; }
  std::shared_ptr<const Embedder> embedder_ptr() const { return embedder_; }
  const Embedding& prototype_embedding(std::size_t category) const { return prototypes_.at(category); }

  /// Nearest prototype by dot product; the earlier category wins ties.
  TrendMatch recognize(const Embedding& e) const;

  /// The resolved category's prototype rendered as a line chart and
  /// embedded.
  Embedding embed_text(std::string_view phrase) const;

 private:
  TrendVocabulary vocab_;
  std::shared_ptr<const Embedder> embedder_;
  std::vector<Embedding> prototypes_;
};

/// Renders a prototype as a line chart and embeds it.
Embedding embed_prototype(const TrendCategory& category, const Embedder& embedder);

Embedding embed_text(std::string_view phrase, const TrendVocabulary& vocab, const Embedder& embedder);

}  // namespace vistr
