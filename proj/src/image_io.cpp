#include "aait/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>

#include "aait/common.hpp"

namespace aait {

Tensor quantize_8bit(const Tensor& t) {
  Tensor out(t.shape());
  for (long i = 0; i < t.size(); ++i)
    out[i] = float(std::lround(std::fmin(std::fmax(t[i], 0.f), 1.f) * 255.f)) / 255.f;
  return out;
}

Tensor read_png(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw IoError("cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw ParseError("bad PNG: " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const int w = int(png_get_image_width(png, info));
  const int h = int(png_get_image_height(png, info));
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  std::vector<png_byte> row(size_t(w) * 3);
  Tensor out(Shape(1, 3, h, w));
  for (int y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) out.at(0, c, y, x) = float(row[size_t(x) * 3 + c]) / 255.f;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return out;
}

void write_png(const std::string& path, const Tensor& image) {
  const Shape& s = image.shape();
  if (s.n != 1 || s.c != 3) throw DomainError("write_png: expected a (1,3,H,W) image");
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw IoError("cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("PNG write failed: " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, png_uint_32(s.w), png_uint_32(s.h), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(size_t(s.w) * 3);
  for (int y = 0; y < s.h; ++y) {
    for (int x = 0; x < s.w; ++x)
      for (int c = 0; c < 3; ++c) {
        const float v = std::fmin(std::fmax(image.at(0, c, y, x), 0.f), 1.f);
        row[size_t(x) * 3 + c] = png_byte(std::lround(v * 255.f));
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

namespace {

// 5x7 glyphs for chart labels; each glyph is 5 column bytes, LSB = top row
const uint8_t* glyph(char c) {
  static const uint8_t digits[10][5] = {
      {0x3e, 0x51, 0x49, 0x45, 0x3e}, {0x00, 0x42, 0x7f, 0x40, 0x00},
      {0x42, 0x61, 0x51, 0x49, 0x46}, {0x21, 0x41, 0x45, 0x4b, 0x31},
      {0x18, 0x14, 0x12, 0x7f, 0x10}, {0x27, 0x45, 0x45, 0x45, 0x39},
      {0x3c, 0x4a, 0x49, 0x49, 0x30}, {0x01, 0x71, 0x09, 0x05, 0x03},
      {0x36, 0x49, 0x49, 0x49, 0x36}, {0x06, 0x49, 0x49, 0x29, 0x1e}};
  static const uint8_t letters[26][5] = {
      {0x7e, 0x11, 0x11, 0x11, 0x7e}, {0x7f, 0x49, 0x49, 0x49, 0x36},
      {0x3e, 0x41, 0x41, 0x41, 0x22}, {0x7f, 0x41, 0x41, 0x22, 0x1c},
      {0x7f, 0x49, 0x49, 0x49, 0x41}, {0x7f, 0x09, 0x09, 0x09, 0x01},
      {0x3e, 0x41, 0x49, 0x49, 0x7a}, {0x7f, 0x08, 0x08, 0x08, 0x7f},
      {0x00, 0x41, 0x7f, 0x41, 0x00}, {0x20, 0x40, 0x41, 0x3f, 0x01},
      {0x7f, 0x08, 0x14, 0x22, 0x41}, {0x7f, 0x40, 0x40, 0x40, 0x40},
      {0x7f, 0x02, 0x0c, 0x02, 0x7f}, {0x7f, 0x04, 0x08, 0x10, 0x7f},
      {0x3e, 0x41, 0x41, 0x41, 0x3e}, {0x7f, 0x09, 0x09, 0x09, 0x06},
      {0x3e, 0x41, 0x51, 0x21, 0x5e}, {0x7f, 0x09, 0x19, 0x29, 0x46},
      {0x46, 0x49, 0x49, 0x49, 0x31}, {0x01, 0x01, 0x7f, 0x01, 0x01},
      {0x3f, 0x40, 0x40, 0x40, 0x3f}, {0x1f, 0x20, 0x40, 0x20, 0x1f},
      {0x3f, 0x40, 0x38, 0x40, 0x3f}, {0x63, 0x14, 0x08, 0x14, 0x63},
      {0x07, 0x08, 0x70, 0x08, 0x07}, {0x61, 0x51, 0x49, 0x45, 0x43}};
  static const uint8_t dash[5] = {0x08, 0x08, 0x08, 0x08, 0x08};
  static const uint8_t dot[5] = {0x00, 0x60, 0x60, 0x00, 0x00};
  static const uint8_t space[5] = {0, 0, 0, 0, 0};
  if (c >= '0' && c <= '9') return digits[c - '0'];
  if (c >= 'a' && c <= 'z') return letters[c - 'a'];
  if (c >= 'A' && c <= 'Z') return letters[c - 'A'];
  if (c == '-') return dash;
  if (c == '.') return dot;
  return space;
}

struct Canvas {
  int w, h;
  std::vector<uint8_t> px;  // RGB
  Canvas(int w_, int h_) : w(w_), h(h_), px(size_t(w_) * h_ * 3, 255) {}
  void set(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    uint8_t* p = &px[(size_t(y) * w + x) * 3];
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }
  void rect(int x0, int y0, int x1, int y1, uint8_t r, uint8_t g, uint8_t b) {
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) set(x, y, r, g, b);
  }
  void text(int x, int y, const std::string& s) {
    for (char c : s) {
      const uint8_t* g = glyph(c);
      for (int cx = 0; cx < 5; ++cx)
        for (int cy = 0; cy < 7; ++cy)
          if (g[cx] & (1 << cy)) set(x + cx, y + cy, 20, 20, 20);
      x += 6;
    }
  }
};

}  // namespace

void write_bar_chart(const std::string& path, const BarChart& chart, int width, int height) {
  if (chart.labels.size() != chart.values.size())
    throw DomainError("write_bar_chart: label/value count mismatch");
  Canvas cv(width, height);
  const int left = 50, bottom = height - 40, top = 30;
  float vmax = 1e-6f, vmin = 0.f;
  for (float v : chart.values) {
    vmax = std::max(vmax, v);
    vmin = std::min(vmin, v);
  }
  const float span = vmax - vmin;
  cv.text(left, 10, chart.title);
  // axes
  cv.rect(left - 1, top, left, bottom, 0, 0, 0);
  cv.rect(left - 1, bottom, width - 20, bottom + 1, 0, 0, 0);
  const int n = int(chart.values.size());
  const int slot = (width - left - 30) / std::max(1, n);
  const int bar_w = std::max(4, slot * 2 / 3);
  auto y_of = [&](float v) { return bottom - int((v - vmin) / span * float(bottom - top - 10)); };
  const int zero_y = y_of(std::max(0.f, vmin));
  char num[32];
  for (int i = 0; i < n; ++i) {
    const float v = chart.values[size_t(i)];
    const int x0 = left + 10 + i * slot;
    const int vy = y_of(v);
    cv.rect(x0, std::min(vy, zero_y), x0 + bar_w, std::max(vy, zero_y) + 1, 70, 110, 180);
    cv.text(x0, bottom + 6, chart.labels[size_t(i)].substr(0, size_t(std::max(1, slot / 6))));
    std::snprintf(num, sizeof(num), "%.3g", double(v));
    cv.text(x0, std::min(vy, zero_y) - 10, num);
  }
  Tensor img(Shape(1, 3, height, width));
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(0, c, y, x) = float(cv.px[(size_t(y) * width + x) * 3 + c]) / 255.f;
  write_png(path, img);
}

}  // namespace aait
