// Copyright Contributors to the splatkit project
// SPDX-License-Identifier: Apache-2.0
#include "splatkit/plot.hpp"

#include "splatkit/png_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace splat {

namespace {

// 3x5 glyphs for 0-9, '.', '-', 'e'; row-major bitmasks.
const std::uint8_t* glyph_rows(char c) {
  static const std::uint8_t digits[13][5] = {
      {0b111, 0b101, 0b101, 0b101, 0b111},  // 0
      {0b010, 0b110, 0b010, 0b010, 0b111},  // 1
      {0b111, 0b001, 0b111, 0b100, 0b111},  // 2
      {0b111, 0b001, 0b111, 0b001, 0b111},  // 3
      {0b101, 0b101, 0b111, 0b001, 0b001},  // 4
      {0b111, 0b100, 0b111, 0b001, 0b111},  // 5
      {0b111, 0b100, 0b111, 0b101, 0b111},  // 6
      {0b111, 0b001, 0b010, 0b010, 0b010},  // 7
      {0b111, 0b101, 0b111, 0b101, 0b111},  // 8
      {0b111, 0b101, 0b111, 0b001, 0b111},  // 9
      {0b000, 0b000, 0b000, 0b000, 0b010},  // .
      {0b000, 0b000, 0b111, 0b000, 0b000},  // -
      {0b111, 0b100, 0b110, 0b100, 0b111},  // e
  };
  if (c >= '0' && c <= '9') return digits[c - '0'];
  if (c == '.') return digits[10];
  if (c == '-') return digits[11];
  if (c == 'e' || c == 'E' || c == '+') return digits[12];
  return nullptr;
}

void draw_text(Image<float>& img, int x, int y, const std::string& text, const Vec3<float>& col) {
  for (const char c : text) {
    const std::uint8_t* rows = glyph_rows(c);
    if (rows) {
      for (int ry = 0; ry < 5; ++ry)
        for (int rx = 0; rx < 3; ++rx)
          if (rows[ry] & (0b100 >> rx)) {
            const int px = x + rx, py = y + ry;
            if (px >= 0 && px < img.width && py >= 0 && py < img.height) img.at(px, py) = col;
          }
    }
    x += 4;
  }
}

void draw_line(Image<float>& img, int x0, int y0, int x1, int y1, const Vec3<float>& col) {
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    if (x0 >= 0 && x0 < img.width && y0 >= 0 && y0 < img.height) img.at(x0, y0) = col;
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

std::string format_tick(double v) {
  char buf[32];
  if (v != 0 && (std::abs(v) >= 1e5 || std::abs(v) < 1e-2))
    std::snprintf(buf, sizeof(buf), "%.1e", v);
  else if (std::abs(v - std::round(v)) < 1e-9)
    std::snprintf(buf, sizeof(buf), "%.0f", v);
  else
    std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

void write_line_chart_png(const std::string& path, const std::vector<double>& xs,
                          const std::vector<double>& ys, int width, int height) {
  require(xs.size() == ys.size() && !xs.empty(), "plot: series must be non-empty and aligned");
  Image<float> img(width, height);
  for (auto& p : img.pixels) p = Vec3<float>(1, 1, 1);

  const int mx = 56, my = 24;  // margins
  const int x0 = mx, x1 = width - 16, y0 = height - my, y1 = 16;
  double lo_x = *std::min_element(xs.begin(), xs.end());
  double hi_x = *std::max_element(xs.begin(), xs.end());
  double lo_y = *std::min_element(ys.begin(), ys.end());
  double hi_y = *std::max_element(ys.begin(), ys.end());
  if (hi_x == lo_x) hi_x = lo_x + 1;
  if (hi_y == lo_y) hi_y = lo_y + 1;
  lo_y -= 0.05 * (hi_y - lo_y);
  hi_y += 0.05 * (hi_y - lo_y);

  const Vec3<float> axis_col(0.25f, 0.25f, 0.25f);
  const Vec3<float> line_col(0.10f, 0.35f, 0.75f);
  draw_line(img, x0, y0, x1, y0, axis_col);
  draw_line(img, x0, y0, x0, y1, axis_col);

  const auto to_px = [&](double x) {
    return x0 + static_cast<int>(std::lround((x - lo_x) / (hi_x - lo_x) * (x1 - x0)));
  };
  const auto to_py = [&](double y) {
    return y0 - static_cast<int>(std::lround((y - lo_y) / (hi_y - lo_y) * (y0 - y1)));
  };

  for (int t = 0; t <= 4; ++t) {
    const double vx = lo_x + (hi_x - lo_x) * t / 4;
    const double vy = lo_y + (hi_y - lo_y) * t / 4;
    draw_line(img, to_px(vx), y0, to_px(vx), y0 + 4, axis_col);
    draw_text(img, to_px(vx) - 8, y0 + 7, format_tick(vx), axis_col);
    draw_line(img, x0 - 4, to_py(vy), x0, to_py(vy), axis_col);
    draw_text(img, 4, to_py(vy) - 2, format_tick(vy), axis_col);
  }

  for (size_t i = 1; i < xs.size(); ++i)
    draw_line(img, to_px(xs[i - 1]), to_py(ys[i - 1]), to_px(xs[i]), to_py(ys[i]), line_col);

  write_png(path, img);
}

}  // namespace splat
