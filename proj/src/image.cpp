#include "vistr/image.hpp"

#include <png.h>

#include <cstring>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

#include "vistr/errors.hpp"

namespace vistr {

std::string_view to_string(ChartType type) {
  switch (type) {
    case ChartType::kLine: return "line";
    case ChartType::kBar: return "bar";
    case ChartType::kArea: return "area";
    case ChartType::kSketch: return "sketch";
  }
  return "line";
}

ChartType chart_type_from_string(std::string_view name) {
  if (name == "line") return ChartType::kLine;
  if (name == "bar") return ChartType::kBar;
  if (name == "area") return ChartType::kArea;
  if (name == "sketch") return ChartType::kSketch;
  throw ConfigError(fmt::format("unknown chart type '{}'", name));
}

ChartImage::ChartImage(int width, int height, ChartType type)
    : width_(width), height_(height), type_(type), pixels_(static_cast<std::size_t>(width) * height * 3, 255) {
  if (width <= 0 || height <= 0) throw ConfigError(fmt::format("invalid image size {}x{}", width, height));
}

Rgb ChartImage::at(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
}

void ChartImage::set(int x, int y, Rgb color) {
  if (x < 0 || y < 0 || x >= width_ || y >= height_) return;
  const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  pixels_[i] = color.r;
  pixels_[i + 1] = color.g;
  pixels_[i + 2] = color.b;
}

bool ChartImage::has_ink() const {
  for (std::uint8_t v : pixels_) {
    if (v != 255) return true;
  }
  return false;
}

namespace {

struct ReadCursor {
  std::span<const std::uint8_t> data;
  std::size_t offset = 0;
};

void png_error_fn(png_structp png, png_const_charp message) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  *what = message;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

void write_fn(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void flush_fn(png_structp) {}

void read_fn(png_structp png, png_bytep data, png_size_t length) {
  auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cursor->offset + length > cursor->data.size()) png_error(png, "unexpected end of PNG data");
  std::memcpy(data, cursor->data.data() + cursor->offset, length);
  cursor->offset += length;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const ChartImage& image) {
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_error_fn, png_warning_fn);
  if (!png) throw FormatError("cannot create PNG writer");
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> out;
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height()));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("PNG encode failed: " + error);
  }
  png_set_write_fn(png, &out, write_fn, flush_fn);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()), static_cast<png_uint_32>(image.height()), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  auto* base = const_cast<std::uint8_t*>(image.bytes().data());
  for (int y = 0; y < image.height(); ++y) rows[static_cast<std::size_t>(y)] = base + static_cast<std::size_t>(y) * image.width() * 3;
  png_set_rows(png, info, rows.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

ChartImage decode_png(std::span<const std::uint8_t> data) {
  if (data.size() < 8 || png_sig_cmp(data.data(), 0, 8) != 0) throw FormatError("not a PNG image");
  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_error_fn, png_warning_fn);
  if (!png) throw FormatError("cannot create PNG reader");
  png_infop info = png_create_info_struct(png);
  ReadCursor cursor{data, 0};
  std::vector<std::uint8_t> buffer;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("PNG decode failed: " + error);
  }
  png_set_read_fn(png, &cursor, read_fn);
  png_read_info(png, info);
  const auto width = png_get_image_width(png, info);
  const auto height = png_get_image_height(png, info);
  if (width == 0 || height == 0 || width > 8192 || height > 8192) png_error(png, "unsupported image dimensions");
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_gray_to_rgb(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  const auto channels = png_get_channels(png, info);
  buffer.resize(static_cast<std::size_t>(width) * height * channels);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = buffer.data() + static_cast<std::size_t>(y) * width * channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  ChartImage image(static_cast<int>(width), static_cast<int>(height), ChartType::kSketch);
  for (png_uint_32 y = 0; y < height; ++y) {
    for (png_uint_32 x = 0; x < width; ++x) {
      const std::uint8_t* p = rows[y] + static_cast<std::size_t>(x) * channels;
      Rgb c{p[0], p[1], p[2]};
      if (channels == 4) {
        const unsigned a = p[3];
        auto blend = [a](unsigned v) { return static_cast<std::uint8_t>((v * a + 255 * (255 - a) + 127) / 255); };
        c = {blend(p[0]), blend(p[1]), blend(p[2])};
      }
      image.set(static_cast<int>(x), static_cast<int>(y), c);
    }
  }
  return image;
}

}  // namespace vistr
