#include "vistr/query.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <regex>
#include <set>

#include <fmt/format.h>

#include "vistr/errors.hpp"
#include "vistr/render.hpp"

namespace vistr {

namespace {

constexpr std::array<std::string_view, 5> kIntentNames = {"Describe", "TrendOf", "LocatePattern", "SimilarToImage",
                                                          "Correlation"};

const nlohmann::json& supported_forms() {
  static const nlohmann::json forms = {
      "describe the data",
      "what is the <qualifier> trend of <variable> [during <period>]",
      "how did <variable> change [during <period>]",
      "<trend words> in <variable> [during <period>]",
      "give me more details about <trend words | this pattern>",
      "are there patterns similar to my sketch [in <variable>] (with a sketch attached)",
      "do <variable> and <variable> have similar change patterns [during <period>]",
  };
  return forms;
}

[[noreturn]] void unsupported(std::string_view text, std::string_view why) {
  throw UnsupportedQueryError(fmt::format("unsupported query '{}': {}", text, why),
                              {{"query", std::string(text)}, {"supported", supported_forms()}});
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Collapses whitespace and drops trailing sentence punctuation.
std::string clean(std::string_view text) {
  std::string out;
  bool space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += c;
  }
  while (!out.empty() && (out.back() == '?' || out.back() == '.' || out.back() == '!')) out.pop_back();
  return trim(out);
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

constexpr auto kFlags = std::regex::ECMAScript | std::regex::icase;

const std::regex& re_causal() {
  static const std::regex r(R"(^(?:why\b|what (?:caused|made|drove)\b|how come\b)|\bbecause\b|\bcaused? by\b)", kFlags);
  return r;
}
const std::regex& re_lead_period() {
  static const std::regex r(R"(^(?:during|in|over) (?:the period of )?(.+?), (.+)$)", kFlags);
  return r;
}
const std::regex& re_correlation() {
  static const std::regex r(
      R"(^(?:do|does|did|are|is) (.+?) and (.+?) (?:have|has|show|share) (?:a )?similar (?:change )?(?:patterns?|trends?)(?: (?:during|in|over|for|from|between) (.+))?$)",
      kFlags);
  return r;
}
const std::regex& re_correlated() {
  static const std::regex r(R"(^(?:are|is) (.+?) and (.+?) correlated(?: (?:during|in|over|for|from|between) (.+))?$)",
                            kFlags);
  return r;
}
const std::regex& re_similar_words() {
  static const std::regex r(R"(\b(?:similar|resembl\w*|(?:look\w* )?like (?:this|that|it|mine|my)|match\w*|same shape)\b)", kFlags);
  return r;
}
const std::regex& re_describe() {
  static const std::regex r(
      R"(^(?:please )?(?:describe|summari[sz]e|give me an? (?:overview|summary) of|what does) (?:the |this )?(?:data|table|dataset|data set)(?: look like)?$)",
      kFlags);
  return r;
}
const std::regex& re_trend_of() {
  static const std::regex r(
      R"(^(?:what|how) (?:is|was|are|were) the (?:(\w+) )?(?:trend|pattern)s? (?:of|in|for) (.+?)(?: (?:during|in|over|for|from|between) (.+))?$)",
      kFlags);
  return r;
}
const std::regex& re_trend_of_short() {
  static const std::regex r(R"(^what's the (?:(\w+) )?(?:trend|pattern) (?:of|in|for) (.+?)(?: (?:during|in|over|for|from|between) (.+))?$)",
                            kFlags);
  return r;
}
const std::regex& re_how_change() {
  static const std::regex r(R"(^how did (.+?) (?:change|move|evolve|behave)(?: (?:during|in|over|for|from|between) (.+))?$)",
                            kFlags);
  return r;
}
const std::regex& re_details() {
  static const std::regex r(R"(^(?:please )?(?:give|tell|show) me (?:more )?(?:details|information|info) (?:about|on) (.+)$)",
                            kFlags);
  return r;
}
const std::regex& re_deictic() {
  static const std::regex r(R"(^(?:it|this|that|this pattern|that pattern|this trend|that trend|the pattern|the trend)$)",
                            kFlags);
  return r;
}
const std::regex& re_tail_period() {
  static const std::regex r(R"(\b(?:during|from|between|over) (.+)$)", kFlags);
  return r;
}
const std::regex& re_in_tail() {
  static const std::regex r(R"(\bin ([^,]+)$)", kFlags);
  return r;
}
const std::regex& re_top_k() {
  static const std::regex r(R"(\btop[ -](\d{1,2})\b|\b(\d{1,2}) (?:most )?similar\b)", kFlags);
  return r;
}

std::string number_word(std::size_t n) {
  static constexpr std::array<std::string_view, 11> kWords = {"zero", "one", "two", "three", "four", "five",
                                                              "six",  "seven", "eight", "nine", "ten"};
  return n < kWords.size() ? std::string(kWords[n]) : std::to_string(n);
}

std::string interval_text(const Match& m) {
  return fmt::format("{} to {}", format_short(m.start_time), format_short(m.end_time));
}

// Distinct intervals in match order; matches of several chart types over
// one span are one interval.
std::vector<const Match*> distinct_intervals(const std::vector<Match>& matches) {
  std::vector<const Match*> out;
  for (const auto& m : matches) {
    const bool seen = std::any_of(out.begin(), out.end(), [&](const Match* o) {
      return o->variable == m.variable && o->span == m.span;
    });
    if (!seen) out.push_back(&m);
  }
  return out;
}

Match match_from_meta(const RefMeta& meta, double similarity) {
  return {meta.ref_id,    meta.variable,   meta.span,
          meta.start_time, meta.end_time,  std::string(to_string(meta.chart_type)),
          similarity,      meta.trend_category, meta.trend_confidence, false};
}

double span_iou(RowSpan a, RowSpan b) {
  const std::size_t lo = std::max(a.start, b.start);
  const std::size_t hi = std::min(a.end, b.end);
  if (lo > hi) return 0.0;
  const double inter = static_cast<double>(hi - lo + 1);
  return inter / (static_cast<double>(a.length() + b.length()) - inter);
}

}  // namespace

std::string_view to_string(Intent intent) { return kIntentNames.at(static_cast<std::size_t>(intent)); }

Intent intent_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kIntentNames.size(); ++i) {
    if (kIntentNames[i] == name) return static_cast<Intent>(i);
  }
  throw ConfigError(fmt::format("unknown intent '{}'", name), {{"intent", std::string(name)}});
}

std::string join_with_and(const std::vector<std::string>& items) {
  if (items.empty()) return "";
  if (items.size() == 1) return items[0];
  if (items.size() == 2) return items[0] + " and " + items[1];
  std::string out;
  for (std::size_t i = 0; i + 1 < items.size(); ++i) out += items[i] + ", ";
  return out + "and " + items.back();
}

std::string_view article_for(std::string_view word) {
  if (word.empty()) return "a";
  const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(word[0])));
  // "u-shape" is read "you-shape".
  if (c == 'u' && word.size() > 1 && word[1] == '-') return "a";
  return (c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u') ? "an" : "a";
}

void QueryPlan::validate() const {
  if (k == 0 || k > 100) throw ConfigError("k must be in [1, 100]", {{"k", k}});
  switch (intent) {
    case Intent::kDescribe:
      break;
    case Intent::kTrendOf:
      if (variables.size() != 1) throw ConfigError("TrendOf needs exactly one variable");
      break;
    case Intent::kCorrelation:
      if (variables.size() != 2) throw ConfigError("Correlation needs exactly two variables");
      break;
    case Intent::kLocatePattern:
      if (!pattern) throw ConfigError("LocatePattern needs a trend pattern");
      [[fallthrough]];
    case Intent::kSimilarToImage:
      if (!embedding) throw ConfigError(fmt::format("{} needs a query embedding", to_string(intent)));
      if (variables.size() > 1) throw ConfigError("retrieval takes at most one variable filter");
      break;
  }
}

nlohmann::json QueryPlan::to_json() const {
  nlohmann::json j = {{"intent", std::string(to_string(intent))},
                      {"variables", variables},
                      {"window", window ? window->to_json() : nlohmann::json(nullptr)},
                      {"pattern", pattern ? nlohmann::json(*pattern) : nlohmann::json(nullptr)},
                      {"qualifier", qualifier ? nlohmann::json(*qualifier) : nlohmann::json(nullptr)},
                      {"k", k},
                      {"fill_template", fill_template}};
  if (intent == Intent::kSimilarToImage) {
    j["embedding_source"] = "image";
  } else if (intent == Intent::kLocatePattern) {
    j["embedding_source"] = "text";
  } else {
    j["embedding_source"] = nullptr;
  }
  return j;
}

QueryPlan QueryPlan::from_json(const nlohmann::json& j, const TimeSeriesTable& table,
                               const TrendRecognizer& recognizer) {
  QueryPlan p;
  try {
    p.intent = intent_from_string(j.at("intent").get<std::string>());
    for (const auto& v : j.value("variables", nlohmann::json::array())) {
      p.variables.push_back(table.variable(v.get<std::string>()).name);
    }
    if (j.contains("window") && !j["window"].is_null()) p.window = Period::from_json(j["window"]);
    if (j.contains("pattern") && !j["pattern"].is_null()) p.pattern = j["pattern"].get<std::string>();
    if (j.contains("qualifier") && !j["qualifier"].is_null()) p.qualifier = j["qualifier"].get<std::string>();
    p.k = j.value("k", std::size_t{3});
    p.fill_template = j.value("fill_template", std::string(lower(to_string(p.intent))));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(fmt::format("malformed query plan: {}", e.what()));
  }
  if (p.pattern) {
    const auto c = recognizer.vocabulary().resolve(*p.pattern);
    p.pattern = recognizer.vocabulary().at(c).name;
    p.embedding = recognizer.prototype_embedding(c);
  }
  return p;
}

nlohmann::json Match::to_json() const {
  return {{"ref_id", ref_id},
          {"variable", variable},
          {"start_idx", span.start},
          {"end_idx", span.end},
          {"start", format_timestamp(start_time)},
          {"end", format_timestamp(end_time)},
          {"chart_type", chart_type},
          {"similarity", similarity},
          {"trend", trend_category},
          {"trend_confidence", trend_confidence},
          {"ephemeral", ephemeral}};
}

nlohmann::json RetrievalResult::to_json() const {
  nlohmann::json m = nlohmann::json::array();
  for (const auto& x : matches) m.push_back(x.to_json());
  nlohmann::json j = {{"matches", m}};
  if (similar) j["similar"] = *similar;
  if (score) j["score"] = *score;
  if (recognized) j["recognized"] = *recognized;
  if (!trends.empty()) {
    nlohmann::json t = nlohmann::json::array();
    for (const auto& v : trends) {
      t.push_back({{"variable", v.variable}, {"trend", v.trend_category}, {"confidence", v.confidence}});
    }
    j["trends"] = t;
  }
  return j;
}

nlohmann::json Answer::to_json() const {
  nlohmann::json j = result.to_json();
  j["answer"] = text;
  j["plan"] = plan.to_json();
  return j;
}

nlohmann::json PatternGroup::to_json() const {
  nlohmann::json t = nlohmann::json::array();
  for (const auto& m : top) t.push_back(m.to_json());
  return {{"category", category}, {"count", count}, {"top", t}};
}

QueryEngine::QueryEngine(std::shared_ptr<const TableStore> store, std::shared_ptr<const TrendRecognizer> recognizer)
    : store_(std::move(store)), recognizer_(std::move(recognizer)) {
  if (!store_ || !store_->index) throw StoreError("query engine needs an ingested table");
  if (!recognizer_) throw ConfigError("query engine needs a trend recognizer");
}

QueryPlan QueryEngine::decompose(std::string_view raw, const ChartImage* sketch, const QueryContext* context) const {
  const TimeSeriesTable& table = store_->table;
  const std::string text = clean(raw);
  if (text.empty() && !sketch) throw UnsupportedQueryError("empty query", {{"supported", supported_forms()}});

  auto resolve_variable = [&](const std::string& name) {
    const std::string n = trim(name);
    const auto idx = table.find_variable(n);
    if (!idx) {
      std::vector<std::string> names;
      for (const auto& v : table.variables) names.push_back(v.name);
      throw VariableError(fmt::format("unknown variable '{}'", n), {{"variable", n}, {"available", names}});
    }
    return table.variables[*idx].name;
  };
  // Schema variables named as whole words, in order of first mention.
  auto mentioned = [&](const std::string& s) {
    const std::string ls = lower(s);
    std::vector<std::pair<std::size_t, std::string>> found;
    for (const auto& v : table.variables) {
      const std::string lv = lower(v.name);
      for (std::size_t pos = ls.find(lv); pos != std::string::npos; pos = ls.find(lv, pos + 1)) {
        const bool left_ok = pos == 0 || !is_word_char(ls[pos - 1]);
        const bool right_ok = pos + lv.size() == ls.size() || !is_word_char(ls[pos + lv.size()]);
        if (left_ok && right_ok) {
          found.emplace_back(pos, v.name);
          break;
        }
      }
    }
    std::sort(found.begin(), found.end());
    std::vector<std::string> names;
    for (auto& f : found) names.push_back(std::move(f.second));
    return names;
  };
  auto period_of = [&](const std::string& phrase) -> std::optional<Period> {
    if (trim(phrase).empty()) return std::nullopt;
    return parse_period(phrase, table);
  };
  // "... during <period>" anywhere at the end, then "... in <period>" when
  // the tail parses as one (the tail may be a variable instead).
  auto tail_period = [&](const std::string& s) -> std::optional<Period> {
    std::smatch m;
    if (std::regex_search(s, m, re_tail_period())) return period_of(m[1].str());
    if (std::regex_search(s, m, re_in_tail())) {
      const std::string tail = m[1].str();
      if (table.find_variable(trim(tail))) return std::nullopt;
      try {
        return parse_period(tail, table);
      } catch (const PeriodError&) {
        return std::nullopt;
      }
    }
    return std::nullopt;
  };
  auto top_k = [&](const std::string& s) {
    std::smatch m;
    if (!std::regex_search(s, m, re_top_k())) return std::size_t{3};
    const std::string n = m[1].matched ? m[1].str() : m[2].str();
    return std::clamp<std::size_t>(std::stoul(n), 1, 100);
  };

  QueryPlan plan;
  std::smatch m;
  if (std::regex_search(text, m, re_causal())) unsupported(text, "causal questions are out of scope");

  // A leading "During <period>, <question>" applies to the question.
  std::string body = text;
  std::optional<Period> lead;
  if (std::regex_match(text, m, re_lead_period())) {
    lead = period_of(m[1].str());
    body = m[2].str();
  }

  if (std::regex_match(body, m, re_correlation()) || std::regex_match(body, m, re_correlated())) {
    plan.intent = Intent::kCorrelation;
    plan.variables = {resolve_variable(m[1].str()), resolve_variable(m[2].str())};
    plan.window = lead ? lead : period_of(m[3].matched ? m[3].str() : "");
    plan.fill_template = "correlation";
  } else if (std::regex_match(body, m, re_describe())) {
    plan.intent = Intent::kDescribe;
    plan.fill_template = "describe";
  } else if (std::regex_match(body, m, re_trend_of()) || std::regex_match(body, m, re_trend_of_short())) {
    plan.intent = Intent::kTrendOf;
    if (m[1].matched) {
      const std::string q = lower(m[1].str());
      if (q != "overall" && q != "general" && q != "main") plan.qualifier = q;
    }
    plan.variables = {resolve_variable(m[2].str())};
    plan.window = lead ? lead : period_of(m[3].matched ? m[3].str() : "");
    plan.fill_template = plan.qualifier ? "trend_of_qualified" : "trend_of";
  } else if (std::regex_match(body, m, re_how_change())) {
    plan.intent = Intent::kTrendOf;
    plan.variables = {resolve_variable(m[1].str())};
    plan.window = lead ? lead : period_of(m[2].matched ? m[2].str() : "");
    plan.fill_template = "trend_of";
  } else if (sketch && (body.empty() || std::regex_search(body, re_similar_words()))) {
    plan.intent = Intent::kSimilarToImage;
    plan.embedding = recognizer_->embedder().embed_image(*sketch);
    const auto vars = mentioned(body);
    if (vars.size() == 1) plan.variables = vars;
    plan.window = lead ? lead : tail_period(body);
    plan.k = top_k(body);
    plan.fill_template = "similar_to_image";
  } else {
    // Trend words: "two peaks in Apple", "give me more details about ...".
    std::string phrase = body;
    bool follow_up = false;
    if (std::regex_match(body, m, re_details())) {
      phrase = m[1].str();
      follow_up = std::regex_match(trim(phrase), re_deictic());
    }
    const auto& vocab = recognizer_->vocabulary();
    std::size_t category = 0;
    if (follow_up) {
      if (!context || !context->trend) unsupported(text, "no earlier pattern to refer to");
      category = vocab.index_of(*context->trend);
    } else if (!vocab.find_categories(phrase).empty()) {
      category = vocab.resolve(phrase);
    } else if (std::regex_match(body, re_details())) {
      category = vocab.resolve(phrase);  // names the nearest lexicon entries
    } else if (sketch) {
      unsupported(text, "a sketch query must ask for similar patterns");
    } else {
      unsupported(text, "no supported intent matched");
    }
    plan.intent = Intent::kLocatePattern;
    plan.pattern = vocab.at(category).name;
    plan.embedding = recognizer_->prototype_embedding(category);
    auto vars = mentioned(body);
    if (vars.size() > 1) vars.resize(1);
    if (vars.empty() && context && context->variable) vars = {*context->variable};
    plan.variables = vars;
    plan.window = lead ? lead : tail_period(body);
    if (!plan.window && follow_up && context) plan.window = context->window;
    plan.k = top_k(body);
    plan.fill_template = "locate_pattern";
  }
  plan.validate();
  return plan;
}

Embedding QueryEngine::embed_window(std::size_t variable, RowSpan span) const {
  const auto& series = store_->smoothed.at(variable);
  const std::span<const double> slice(series.data() + span.start, span.length());
  return recognizer_->embedder().embed_image(render_chart(slice, ChartType::kLine, store_->options.render));
}

Match QueryEngine::ephemeral_match(std::size_t variable, RowSpan span) const {
  const TimeSeriesTable& table = store_->table;
  const Embedding e = embed_window(variable, span);
  const TrendMatch tm = recognizer_->recognize(e);
  Match m;
  m.ref_id = fmt::format("ephemeral:{}.v{}.{}-{}.line", table.table_id, variable, span.start, span.end);
  m.variable = table.variables[variable].name;
  m.span = span;
  m.start_time = table.timestamps[span.start];
  m.end_time = table.timestamps[span.end];
  m.chart_type = "line";
  m.similarity = 1.0;
  m.trend_category = recognizer_->vocabulary().at(tm.category).name;
  m.trend_confidence = tm.confidence;
  m.ephemeral = true;
  return m;
}

RetrievalResult QueryEngine::execute(const QueryPlan& plan) const {
  plan.validate();
  const TimeSeriesTable& table = store_->table;
  const RowSpan all{0, table.rows() - 1};
  RetrievalResult r;
  switch (plan.intent) {
    case Intent::kDescribe: {
      for (std::size_t v = 0; v < table.variables.size(); ++v) {
        const Match m = ephemeral_match(v, all);
        r.trends.push_back({m.variable, m.trend_category, m.trend_confidence});
      }
      break;
    }
    case Intent::kTrendOf: {
      const std::size_t v = *table.find_variable(plan.variables[0]);
      const RowSpan window = plan.window ? period_rows(*plan.window, table) : all;
      const std::string& name = table.variables[v].name;
      std::optional<RefMeta> best;
      double best_iou = 0.0;
      for (const auto& meta : store_->index->all_meta()) {
        if (meta.variable != name) continue;
        const double iou = span_iou(meta.span, window);
        // Ties go to the longer span, then to the lower ref_id.
        const bool better = !best || iou > best_iou ||
                            (iou == best_iou && (meta.span.length() > best->span.length() ||
                                                 (meta.span.length() == best->span.length() && meta.ref_id < best->ref_id)));
        if (better) {
          best = meta;
          best_iou = iou;
        }
      }
      if (best && best_iou >= kCoverIou) {
        r.matches.push_back(match_from_meta(*best, best_iou));
      } else {
        r.matches.push_back(ephemeral_match(v, window));
      }
      break;
    }
    case Intent::kLocatePattern:
    case Intent::kSimilarToImage: {
      KnnFilter filter;
      if (!plan.variables.empty()) filter.variable = plan.variables[0];
      if (plan.window) {
        filter.from = plan.window->from;
        filter.to = plan.window->to;
      }
      // One interval can be stored once per chart type; matches are
      // intervals, so fetch enough hits to collapse those to k distinct ones.
      const std::size_t per_interval = std::max<std::size_t>(1, store_->options.chart_types.size());
      std::vector<KnnHit> hits;
      try {
        hits = store_->index->query_knn(*plan.embedding, plan.k * per_interval, filter);
      } catch (const EmptyResult& e) {
        throw NoMatchError(fmt::format("no stored chart matches the query: {}", e.what()), e.detail());
      }
      std::set<std::pair<std::string, std::pair<std::size_t, std::size_t>>> seen;
      for (const auto& h : hits) {
        if (r.matches.size() == plan.k) break;
        const RefMeta meta = store_->index->meta(h.slot);
        if (!seen.insert({meta.variable, {meta.span.start, meta.span.end}}).second) continue;
        r.matches.push_back(match_from_meta(meta, h.similarity));
      }
      r.recognized = recognizer_->vocabulary().at(recognizer_->recognize(*plan.embedding).category).name;
      break;
    }
    case Intent::kCorrelation: {
      const std::size_t a = *table.find_variable(plan.variables[0]);
      const std::size_t b = *table.find_variable(plan.variables[1]);
      const RowSpan window = plan.window ? period_rows(*plan.window, table) : all;
      Match ma = ephemeral_match(a, window);
      Match mb = ephemeral_match(b, window);
      const double dot = similarity(embed_window(a, window), embed_window(b, window));
      ma.similarity = mb.similarity = dot;
      r.matches = {ma, mb};
      r.score = dot;
      r.similar = dot >= kSimilarityThreshold;
      break;
    }
  }
  return r;
}

std::string QueryEngine::fill(const QueryPlan& plan, const RetrievalResult& r) const {
  const TimeSeriesTable& table = store_->table;
  const std::string period = plan.window ? plan.window->label : "";
  switch (plan.intent) {
    case Intent::kDescribe: {
      std::vector<std::string> parts;
      for (const auto& t : r.trends) {
        parts.push_back(fmt::format("{} shows {} {} pattern", t.variable, article_for(t.trend_category), t.trend_category));
      }
      return fmt::format("The table has {} rows from {} to {}. Overall, {}.", table.rows(),
                         format_short(table.timestamps.front()), format_short(table.timestamps.back()),
                         join_with_and(parts));
    }
    case Intent::kTrendOf: {
      const Match& m = r.matches.at(0);
      const std::string when = plan.window ? "during " + period : "over the whole period";
      if (plan.qualifier) {
        return fmt::format("There is {} {} {} trend in {} {}.", article_for(m.trend_category), m.trend_category,
                           *plan.qualifier, plan.variables[0], when);
      }
      return fmt::format("There is {} {} pattern in {} {}.", article_for(m.trend_category), m.trend_category,
                         plan.variables[0], when);
    }
    case Intent::kSimilarToImage: {
      const auto intervals = distinct_intervals(r.matches);
      std::vector<std::string> items;
      for (const Match* m : intervals) items.push_back(interval_text(*m));
      std::string out;
      if (items.size() == 1) {
        out = fmt::format("The interval with a similar pattern is from {}.", items[0]);
      } else {
        out = fmt::format("The {} intervals with similar patterns are from {}.", number_word(items.size()),
                          join_with_and(items));
      }
      const std::string& cat = *r.recognized;
      return out + fmt::format(" This pattern is recognized as {} {} pattern.", article_for(cat), cat);
    }
    case Intent::kLocatePattern: {
      const auto intervals = distinct_intervals(r.matches);
      const bool one_variable = std::all_of(intervals.begin(), intervals.end(),
                                            [&](const Match* m) { return m->variable == intervals[0]->variable; });
      std::vector<std::string> items;
      for (const Match* m : intervals) {
        items.push_back(one_variable ? interval_text(*m) : fmt::format("{} in {}", interval_text(*m), m->variable));
      }
      if (one_variable) {
        return fmt::format("The {} pattern in {} appears from {}.", *plan.pattern, intervals[0]->variable,
                           join_with_and(items));
      }
      return fmt::format("The {} pattern appears from {}.", *plan.pattern, join_with_and(items));
    }
    case Intent::kCorrelation: {
      const std::string verdict = *r.similar ? "similar" : "different";
      const std::string when = plan.window ? "During the period of " + period : "Over the whole period";
      return fmt::format("{}, {} and {} have {} change patterns.", when, plan.variables[0], plan.variables[1], verdict);
    }
  }
  return {};
}

Answer QueryEngine::ask(std::string_view text, const ChartImage* sketch, QueryContext* context,
                        std::optional<std::size_t> k) const {
  Answer a;
  a.plan = decompose(text, sketch, context);
  if (k) {
    a.plan.k = *k;
    a.plan.validate();
  }
  a.result = execute(a.plan);
  a.text = fill(a.plan, a.result);
  if (context) {
    QueryContext next;
    if (a.plan.variables.size() == 1) next.variable = a.plan.variables[0];
    next.window = a.plan.window;
    if (a.plan.intent == Intent::kTrendOf) {
      next.trend = a.result.matches.at(0).trend_category;
    } else if (a.plan.pattern) {
      next.trend = a.plan.pattern;
    } else if (a.result.recognized) {
      next.trend = a.result.recognized;
    } else {
      next.trend = context->trend;
    }
    *context = std::move(next);
  }
  return a;
}

std::vector<PatternGroup> pattern_groups(const TableStore& store, std::string_view variable) {
  const std::string name = store.table.variable(variable).name;
  std::map<std::string, PatternGroup> groups;
  for (const auto& meta : store.index->all_meta()) {
    if (meta.variable != name) continue;
    auto& g = groups[meta.trend_category];
    g.category = meta.trend_category;
    ++g.count;
    g.top.push_back(match_from_meta(meta, meta.trend_confidence));
  }
  std::vector<PatternGroup> out;
  for (auto& [_, g] : groups) {
    std::sort(g.top.begin(), g.top.end(), [](const Match& a, const Match& b) {
      if (a.trend_confidence != b.trend_confidence) return a.trend_confidence > b.trend_confidence;
      return a.ref_id < b.ref_id;
    });
    if (g.top.size() > 3) g.top.resize(3);
    out.push_back(std::move(g));
  }
  // std::map iteration is alphabetical, so a stable sort keeps that for ties.
  std::stable_sort(out.begin(), out.end(), [](const PatternGroup& a, const PatternGroup& b) { return a.count > b.count; });
  return out;
}

}  // namespace vistr
