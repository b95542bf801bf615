#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vistr/embedding.hpp"
#include "vistr/image.hpp"
#include "vistr/period.hpp"
#include "vistr/pipeline.hpp"
#include "vistr/vocabulary.hpp"

namespace vistr {

enum class Intent { kDescribe, kTrendOf, kLocatePattern, kSimilarToImage, kCorrelation };

std::string_view to_string(Intent intent);
Intent intent_from_string(std::string_view name);  // throws ConfigError

/// A parsed request. Serializes to the JSON contract that an external
/// decomposer would also have to produce (the embedding is rebuilt from
/// `pattern` or supplied with the image, never serialized).
struct QueryPlan {
  Intent intent = Intent::kDescribe;
  std::vector<std::string> variables;  // schema spelling
  std::optional<Period> window;
  std::optional<std::string> pattern;    // trend phrase for LocatePattern
  std::optional<std::string> qualifier;  // "price" in "the price trend of"
  std::optional<Embedding> embedding;
  std::size_t k = 3;
  std::string fill_template;

  /// Required slots per intent; throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
  /// Rebuilds the embedding from `pattern` when the intent needs one.
  static QueryPlan from_json(const nlohmann::json& j, const TimeSeriesTable& table, const TrendRecognizer& recognizer);
};

struct Match {
  std::string ref_id;
  std::string variable;
  RowSpan span;
  Timestamp start_time;
  Timestamp end_time;
  std::string chart_type;
  double similarity = 0.0;  // dot product; window IoU for TrendOf
  std::string trend_category;
  double trend_confidence = 0.0;
  bool ephemeral = false;  // rendered on demand, not stored

  nlohmann::json to_json() const;
};

struct VariableTrend {
  std::string variable;
  std::string trend_category;
  double confidence = 0.0;
};

struct RetrievalResult {
  std::vector<Match> matches;  // similarity descending, at most k; kNN intents give distinct intervals
  std::optional<bool> similar;  // Correlation verdict
  std::optional<double> score;  // Correlation dot product
  std::optional<std::string> recognized;  // category of the query embedding
  std::vector<VariableTrend> trends;      // Describe

  nlohmann::json to_json() const;
};

/// The single prior-answer slot used to resolve follow-ups such as "give
/// me more details about this pattern".
struct QueryContext {
  std::optional<std::string> variable;
  std::optional<std::string> trend;
  std::optional<Period> window;
};

struct Answer {
  QueryPlan plan;
  RetrievalResult result;
  std::string text;

  /// {answer, plan, matches, similar?, score?, recognized?, trends?}; the
  /// body of the query endpoint and of `vistr query --json`.
  nlohmann::json to_json() const;
};

/// Decompose, execute and fill over one immutable table snapshot. All
/// members are const and safe to call concurrently.
class QueryEngine {
 public:
  static constexpr double kSimilarityThreshold = 0.8;  // Correlation verdict
  static constexpr double kCoverIou = 0.8;              // below this TrendOf renders the window

  QueryEngine(std::shared_ptr<const TableStore> store, std::shared_ptr<const TrendRecognizer> recognizer);

  /// Template grammar over the intents. `sketch` must already be
  /// normalized. Throws UnsupportedQueryError, VariableError, PeriodError,
  /// UnknownTrendError or AmbiguousTrendError.
  QueryPlan decompose(std::string_view text, const ChartImage* sketch = nullptr,
                      const QueryContext* context = nullptr) const;

  /// Throws NoMatchError when retrieval finds nothing.
  RetrievalResult execute(const QueryPlan& plan) const;

  std::string fill(const QueryPlan& plan, const RetrievalResult& result) const;

  /// decompose + execute + fill; `k` overrides the parsed result count.
  /// Updates `context` on success.
  Answer ask(std::string_view text, const ChartImage* sketch = nullptr, QueryContext* context = nullptr,
             std::optional<std::size_t> k = std::nullopt) const;

  const TableStore& store() const { return *store_; }
  const TrendRecognizer& recognizer() const { return *recognizer_; }

 private:
  Match ephemeral_match(std::size_t variable, RowSpan span) const;
  Embedding embed_window(std::size_t variable, RowSpan span) const;

  std::shared_ptr<const TableStore> store_;
  std::shared_ptr<const TrendRecognizer> recognizer_;
};

struct PatternGroup {
  std::string category;
  std::size_t count = 0;
  std::vector<Match> top;  // up to 3, confidence descending, ties by ref_id

  nlohmann::json to_json() const;
};

/// Every reference of `variable` grouped by stored trend category, largest
/// group first (ties alphabetical). Throws VariableError.
std::vector<PatternGroup> pattern_groups(const TableStore& store, std::string_view variable);

/// "8-Feb-21 to 16-Mar-21, 3-May-21 to 9-Jun-21, and ..." style list.
std::string join_with_and(const std::vector<std::string>& items);

/// "a" or "an" for a category name ("an increasing", "a u-shape").
std::string_view article_for(std::string_view word);

}  // namespace vistr
