#include "vistr/vocabulary.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "vistr/errors.hpp"
#include "vistr/render.hpp"

namespace vistr {
namespace {

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && std::string_view(s).substr(s.size() - suffix.size()) == suffix;
}

std::string synonym_key(std::string_view synonym) {
  std::string key;
  for (const auto& t : tokenize(synonym)) {
    if (!key.empty()) key += ' ';
    key += stem(t);
  }
  return key;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

std::vector<double> make_prototype(const std::function<double(double)>& shape) {
  std::vector<double> p(kTracePoints);
  for (std::size_t k = 0; k < kTracePoints; ++k) p[k] = shape(static_cast<double>(k) / (kTracePoints - 1));
  const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
  const double a = *lo, range = *hi - *lo;
  for (double& v : p) v = range > 0.0 ? (v - a) / range : 0.5;
  return p;
}

double bump(double x, double center, double width) {
  const double z = (x - center) / width;
  return std::exp(-0.5 * z * z);
}

double triangle_wave(double x, double periods) {
  const double f = x * periods - std::floor(x * periods);
  return 1.0 - std::abs(2.0 * f - 1.0);
}

}  // namespace

std::string stem(std::string_view word) {
  std::string w;
  w.reserve(word.size());
  for (char c : word) w += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (w.size() > 4 && ends_with(w, "ies")) {
    w.resize(w.size() - 3);
    w += 'y';
  } else if (w.size() > 5 && ends_with(w, "ing")) {
    w.resize(w.size() - 3);
  } else if (w.size() > 4 && ends_with(w, "ed")) {
    w.resize(w.size() - 2);
  } else if (w.size() > 4 && (ends_with(w, "ches") || ends_with(w, "shes") || ends_with(w, "xes"))) {
    w.resize(w.size() - 2);
  } else if (w.size() > 3 && ends_with(w, "s") && !ends_with(w, "ss") && !ends_with(w, "us")) {
    w.resize(w.size() - 1);
  }
  const std::size_t n = w.size();
  if (n > 3 && w[n - 1] == w[n - 2] && !is_vowel(w[n - 1]) && w[n - 1] != 'l' && w[n - 1] != 's' &&
      w[n - 1] != 'z') {
    w.pop_back();
  }
  if (w.size() > 3 && w.back() == 'e') w.pop_back();
  return w;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

TrendVocabulary::TrendVocabulary(std::vector<TrendCategory> categories, int version)
    : version_(version), categories_(std::move(categories)) {
  if (categories_.size() != kCategoryCount) {
    throw ConfigError(fmt::format("vocabulary needs {} categories, got {}", kCategoryCount, categories_.size()));
  }
  std::set<std::string> names;
  for (std::size_t c = 0; c < categories_.size(); ++c) {
    const auto& cat = categories_[c];
    if (cat.name.empty() || !names.insert(cat.name).second) {
      throw ConfigError(fmt::format("duplicate or empty category name '{}'", cat.name));
    }
    if (cat.prototype.size() != kTracePoints) {
      throw ConfigError(fmt::format("prototype of '{}' has {} points, expected {}", cat.name, cat.prototype.size(),
                                    kTracePoints));
    }
    const auto [lo, hi] = std::minmax_element(cat.prototype.begin(), cat.prototype.end());
    const bool constant = *lo == *hi && *lo == 0.5;
    if (!constant && (*lo != 0.0 || *hi != 1.0)) {
      throw ConfigError(fmt::format("prototype of '{}' is not min-max normalized", cat.name));
    }
    std::vector<std::string> keys{cat.name};
    keys.insert(keys.end(), cat.synonyms.begin(), cat.synonyms.end());
    for (const auto& s : keys) {
      const std::string key = synonym_key(s);
      if (key.empty()) throw ConfigError(fmt::format("synonym '{}' of '{}' has no tokens", s, cat.name));
      const auto [it, inserted] = synonym_index_.emplace(key, c);
      if (!inserted && it->second != c) {
        throw ConfigError(fmt::format("synonym '{}' maps to both '{}' and '{}'", s, categories_[it->second].name,
                                      cat.name));
      }
      longest_synonym_ = std::max<std::size_t>(longest_synonym_, std::count(key.begin(), key.end(), ' ') + 1);
    }
  }
}

std::size_t TrendVocabulary::index_of(std::string_view name) const {
  for (std::size_t c = 0; c < categories_.size(); ++c) {
    if (categories_[c].name == name) return c;
  }
  throw UnknownTrendError(fmt::format("unknown trend category '{}'", name));
}

std::vector<std::size_t> TrendVocabulary::find_categories(std::string_view text) const {
  std::vector<std::string> stems;
  for (const auto& t : tokenize(text)) stems.push_back(stem(t));
  std::vector<std::size_t> found;
  std::size_t i = 0;
  while (i < stems.size()) {
    std::size_t matched = 0;
    for (std::size_t len = std::min(longest_synonym_, stems.size() - i); len >= 1; --len) {
      std::string key = stems[i];
      for (std::size_t j = 1; j < len; ++j) key += ' ' + stems[i + j];
      if (auto it = synonym_index_.find(key); it != synonym_index_.end()) {
        if (std::find(found.begin(), found.end(), it->second) == found.end()) found.push_back(it->second);
        matched = len;
        break;
      }
    }
    i += matched > 0 ? matched : 1;
  }
  return found;
}

std::size_t TrendVocabulary::resolve(std::string_view phrase) const {
  const auto found = find_categories(phrase);
  if (found.empty()) {
    const auto nearest = nearest_entries(phrase);
    throw UnknownTrendError(fmt::format("no trend word in '{}'; nearest entries: {}", phrase, fmt::join(nearest, ", ")),
                            {{"nearest", nearest}});
  }
  if (found.size() > 1) {
    std::vector<std::string> names;
    for (auto c : found) names.push_back(categories_[c].name);
    throw AmbiguousTrendError(fmt::format("'{}' matches several trends: {}", phrase, fmt::join(names, ", ")),
                              {{"candidates", names}});
  }
  return found.front();
}

std::vector<std::string> TrendVocabulary::nearest_entries(std::string_view phrase, std::size_t limit) const {
  std::string lowered;
  for (const auto& t : tokenize(phrase)) {
    if (!lowered.empty()) lowered += ' ';
    lowered += t;
  }
  std::vector<std::pair<std::size_t, std::string>> scored;
  for (const auto& cat : categories_) {
    scored.emplace_back(edit_distance(lowered, cat.name), cat.name);
    for (const auto& s : cat.synonyms) scored.emplace_back(edit_distance(lowered, s), s);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::string> out;
  for (const auto& [d, s] : scored) {
    if (out.size() == limit) break;
    if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  }
  return out;
}

TrendVocabulary TrendVocabulary::default_vocabulary() {
  using Shape = std::function<double(double)>;
  const auto cat = [](std::string name, std::vector<std::string> synonyms, const Shape& shape) {
    return TrendCategory{std::move(name), std::move(synonyms), make_prototype(shape)};
  };
  const Shape two_peak = [](double x) { return bump(x, 0.28, 0.09) + bump(x, 0.72, 0.09); };
  const Shape sharp_rise = [](double x) { return x < 0.8 ? 0.1 * x / 0.8 : 0.1 + 0.9 * (x - 0.8) / 0.2; };
  const Shape u_shape = [](double x) { return std::pow(2.0 * (x - 0.5), 4); };

  std::vector<TrendCategory> cats;
  cats.push_back(cat("increasing",
                     {"upward", "rising", "rise", "rose", "growth", "grow", "climbing", "uptrend", "going up",
                      "ascending", "increase"},
                     [](double x) { return x; }));
  cats.push_back(cat("decreasing",
                     {"downward", "declining", "decline", "falling", "fall", "drop", "downtrend", "going down",
                      "descending", "decrease"},
                     [](double x) { return 1.0 - x; }));
  cats.push_back(cat("flat", {"stable", "steady", "constant", "unchanged", "stagnant", "sideways", "no change"},
                     [](double) { return 0.0; }));
  cats.push_back(cat("peak", {"single peak", "one peak", "hump", "bump", "mountain"},
                     [](double x) { return bump(x, 0.5, 0.12); }));
  cats.push_back(cat("two-peak", {"two peaks", "double peak", "twin peaks", "double top", "two humps", "m shape"},
                     two_peak));
  cats.push_back(cat("valley", {"trough", "single valley", "one valley"},
                     [](double x) { return -bump(x, 0.5, 0.12); }));
  cats.push_back(cat("double-bottom",
                     {"two valleys", "double valley", "twin valleys", "two troughs", "double dip", "w shape"},
                     [two_peak](double x) { return -two_peak(x); }));
  cats.push_back(cat("sharp rise",
                     {"sharp increase", "rapid rise", "steep rise", "surge", "soar", "skyrocket", "sharp climb"},
                     sharp_rise));
  cats.push_back(cat("sharp drop",
                     {"sharp fall", "sharp decline", "steep drop", "rapid drop", "crash", "plunge", "plummet",
                      "collapse"},
                     [sharp_rise](double x) { return -sharp_rise(x); }));
  cats.push_back(cat("zigzag",
                     {"zig zag", "fluctuating", "fluctuation", "oscillating", "oscillation", "volatile", "choppy",
                      "up and down"},
                     [](double x) { return triangle_wave(x, 4.0); }));
  cats.push_back(cat("v-shape", {"v shape", "v shaped", "sharp rebound"}, [](double x) { return std::abs(x - 0.5); }));
  cats.push_back(cat("inverted-v", {"inverted v", "upside down v", "inverted v shape"},
                     [](double x) { return -std::abs(x - 0.5); }));
  cats.push_back(cat("u-shape", {"u shape", "u shaped", "rounded bottom", "bowl", "saucer"}, u_shape));
  cats.push_back(cat("inverted-u", {"inverted u", "upside down u", "rounded top", "dome", "arch"},
                     [u_shape](double x) { return -u_shape(x); }));
  cats.push_back(cat("step up", {"stepped up", "jump", "jump up", "level shift up"},
                     [](double x) { return x < 0.5 ? 0.0 : 1.0; }));
  cats.push_back(cat("step down", {"stepped down", "cliff", "level shift down", "drop off"},
                     [](double x) { return x < 0.5 ? 1.0 : 0.0; }));
  cats.push_back(cat("rise then plateau", {"rise and plateau", "rise then flat", "rise then level off", "level off"},
                     [](double x) { return std::min(x / 0.5, 1.0); }));
  cats.push_back(cat("plateau then rise", {"flat then rise", "plateau and rise", "flat then increase", "breakout"},
                     [](double x) { return std::max(0.0, (x - 0.5) / 0.5); }));
  cats.push_back(cat("fall then plateau", {"fall and plateau", "fall then flat", "drop then flat", "bottom out"},
                     [](double x) { return -std::min(x / 0.5, 1.0); }));
  cats.push_back(cat("plateau then fall", {"flat then fall", "plateau and fall", "flat then drop", "plateau then drop"},
                     [](double x) { return -std::max(0.0, (x - 0.5) / 0.5); }));
  cats.push_back(cat("spike", {"sudden spike", "blip", "burst", "sharp peak"},
                     [](double x) { return bump(x, 0.5, 0.025); }));
  cats.push_back(cat("dip", {"sudden dip", "sharp dip", "brief dip", "momentary drop"},
                     [](double x) { return -bump(x, 0.5, 0.025); }));
  cats.push_back(cat("gradual recovery", {"recovery", "recover", "rebound", "slow recovery", "bounce back"},
                     [](double x) { return x < 0.15 ? 1.0 - x / 0.15 : 0.85 * (x - 0.15) / 0.85; }));
  return TrendVocabulary(std::move(cats), 1);
}

TrendVocabulary TrendVocabulary::from_json(const nlohmann::json& doc) {
  try {
    std::vector<TrendCategory> cats;
    for (const auto& c : doc.at("categories")) {
      cats.push_back({c.at("name").get<std::string>(), c.value("synonyms", std::vector<std::string>{}),
                      c.at("prototype").get<std::vector<double>>()});
    }
    return TrendVocabulary(std::move(cats), doc.value("version", 1));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("malformed vocabulary document: {}", e.what()));
  }
}

TrendVocabulary TrendVocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open vocabulary file '{}'", path.string()));
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("vocabulary file '{}' is not JSON: {}", path.string(), e.what()));
  }
  return from_json(doc);
}

nlohmann::json TrendVocabulary::to_json() const {
  nlohmann::json cats = nlohmann::json::array();
  for (const auto& c : categories_) {
    cats.push_back({{"name", c.name}, {"synonyms", c.synonyms}, {"prototype", c.prototype}});
  }
  return {{"version", version_}, {"categories", cats}};
}

void TrendVocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write vocabulary file '{}'", path.string()));
  out << to_json().dump(2) << '\n';
}

Embedding embed_prototype(const TrendCategory& category, const Embedder& embedder) {
  return embedder.embed_image(render_chart(category.prototype, ChartType::kLine));
}

Embedding embed_text(std::string_view phrase, const TrendVocabulary& vocab, const Embedder& embedder) {
  return embed_prototype(vocab.at(vocab.resolve(phrase)), embedder);
}

TrendRecognizer::TrendRecognizer(TrendVocabulary vocab, std::shared_ptr<const Embedder> embedder)
    : vocab_(std::move(vocab)), embedder_(std::move(embedder)) {
  if (!embedder_) throw ConfigError("trend recognizer needs an embedder");
  prototypes_.reserve(vocab_.size());
  for (const auto& c : vocab_.categories()) prototypes_.push_back(embed_prototype(c, *embedder_));
}

TrendMatch TrendRecognizer::recognize(const Embedding& e) const {
  TrendMatch best{0, -2.0};
  for (std::size_t c = 0; c < prototypes_.size(); ++c) {
    const double s = similarity(e, prototypes_[c]);
    if (s > best.confidence) best = {c, s};
  }
  return best;
}

Embedding TrendRecognizer::embed_text(std::string_view phrase) const {
  return prototypes_.at(vocab_.resolve(phrase));
}

}  // namespace vistr
