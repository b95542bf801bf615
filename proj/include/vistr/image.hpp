#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace vistr {

enum class ChartType { kLine, kBar, kArea, kSketch };

std::string_view to_string(ChartType type);
ChartType chart_type_from_string(std::string_view name);  // throws ConfigError

struct Rgb {
  std::uint8_t r = 255, g = 255, b = 255;
  bool operator==(const Rgb&) const = default;
};

inline constexpr Rgb kWhite{255, 255, 255};

/// 8-bit RGB raster, row-major, white background. Any non-white pixel is ink.
class ChartImage {
 public:
  ChartImage() = default;
  ChartImage(int width, int height, ChartType type);

  int width() const { return width_; }
  int height() const { return height_; }
  ChartType chart_type() const { return type_; }
  void set_chart_type(ChartType type) { type_ = type; }

  Rgb at(int x, int y) const;
  void set(int x, int y, Rgb color);
  bool is_ink(int x, int y) const { return !(at(x, y) == kWhite); }
  bool has_ink() const;

  std::span<const std::uint8_t> bytes() const { return pixels_; }

  bool operator==(const ChartImage&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  ChartType type_ = ChartType::kLine;
  std::vector<std::uint8_t> pixels_;
};

/// 8-bit RGB PNG without alpha.
std::vector<std::uint8_t> encode_png(const ChartImage& image);

/// Decodes any PNG; alpha is composited over white and the result is
/// tagged as a sketch. Throws FormatError on malformed input.
ChartImage decode_png(std::span<const std::uint8_t> data);

}  // namespace vistr
