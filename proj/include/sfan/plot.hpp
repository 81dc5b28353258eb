#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "sfan/errors.hpp"
#include "sfan/evaluation.hpp"
#include "sfan/volume_io.hpp"

namespace sfan {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

namespace detail {

// 5x7 bitmap glyphs; each byte is one row, bit 4 = leftmost column.
struct Glyph {
  char ch;
  std::uint8_t rows[7];
};

inline const Glyph* find_glyph(char c) {
  static const Glyph table[] = {
      {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
      {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
      {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
      {'D', {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E}},
      {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
      {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
      {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
      {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
      {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
      {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
      {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
      {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
      {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
      {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
      {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
      {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
      {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
      {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
      {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
      {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
      {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
      {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x1B, 0x11}},
      {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
      {'Y', {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}},
      {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
      {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
      {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
      {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
      {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
      {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
      {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
      {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
      {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
      {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
      {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
      {'%', {0x19, 0x19, 0x02, 0x04, 0x08, 0x13, 0x13}},
      {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
      {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
  };
  if (c >= 'a' && c <= 'z') c = char(c - 'a' + 'A');
  for (const auto& g : table)
    if (g.ch == c) return &g;
  return nullptr;
}

}  // namespace detail

class Canvas {
 public:
  Canvas(int w, int h, Rgb background) : w_(w), h_(h), rgb_(std::size_t(w) * h * 3) {
    fill_rect(0, 0, w, h, background);
  }

  int width() const { return w_; }
  int height() const { return h_; }
  const std::uint8_t* data() const { return rgb_.data(); }

  void set(int x, int y, Rgb c) {
    if (x < 0 || x >= w_ || y < 0 || y >= h_) return;
    std::size_t i = (std::size_t(y) * w_ + x) * 3;
    rgb_[i] = c.r;
    rgb_[i + 1] = c.g;
    rgb_[i + 2] = c.b;
  }

  void fill_rect(int x, int y, int rw, int rh, Rgb c) {
    for (int yy = y; yy < y + rh; ++yy)
      for (int xx = x; xx < x + rw; ++xx) set(xx, yy, c);
  }

  void hline(int x0, int x1, int y, Rgb c) {
    for (int x = x0; x <= x1; ++x) set(x, y, c);
  }
  void vline(int x, int y0, int y1, Rgb c) {
    for (int y = y0; y <= y1; ++y) set(x, y, c);
  }

  static int text_width(const std::string& s, int scale = 1) {
    return int(s.size()) * 6 * scale - (s.empty() ? 0 : scale);
  }

  void text(int x, int y, const std::string& s, Rgb c, int scale = 1) {
    int cx = x;
    for (char ch : s) {
      if (const auto* g = detail::find_glyph(ch)) {
        for (int row = 0; row < 7; ++row)
          for (int col = 0; col < 5; ++col)
            if (g->rows[row] & (1 << (4 - col)))
              fill_rect(cx + col * scale, y + row * scale, scale, scale, c);
      }
      cx += 6 * scale;
    }
  }

 private:
  int w_, h_;
  std::vector<std::uint8_t> rgb_;
};

namespace detail {

inline void png_chunk(std::vector<std::uint8_t>& out, const char type[4],
                      const std::vector<std::uint8_t>& data) {
  auto be32 = [&](std::uint32_t v) {
    out.push_back(std::uint8_t(v >> 24));
    out.push_back(std::uint8_t(v >> 16));
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v));
  };
  be32(std::uint32_t(data.size()));
  std::size_t type_pos = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  std::uint32_t crc =
      std::uint32_t(::crc32(0, out.data() + type_pos, uInt(4 + data.size())));
  be32(crc);
}

}  // namespace detail

// Truecolor 8-bit PNG, filter 0 scanlines, fixed compression settings so the
// byte stream is reproducible.
inline void write_png(const fs::path& path, const Canvas& canvas) {
  std::vector<std::uint8_t> raw;
  raw.reserve(std::size_t(canvas.height()) * (std::size_t(canvas.width()) * 3 + 1));
  for (int y = 0; y < canvas.height(); ++y) {
    raw.push_back(0);  // per-scanline filter byte
    const std::uint8_t* row = canvas.data() + std::size_t(y) * canvas.width() * 3;
    raw.insert(raw.end(), row, row + std::size_t(canvas.width()) * 3);
  }
  uLongf bound = compressBound(uLong(raw.size()));
  std::vector<std::uint8_t> compressed(bound);
  int rc = compress2(compressed.data(), &bound, raw.data(), uLong(raw.size()), 6);
  require(rc == Z_OK, Errc::unwritable_path, "image compression failed");
  compressed.resize(bound);

  std::vector<std::uint8_t> out = {137, 80, 78, 71, 13, 10, 26, 10};
  std::vector<std::uint8_t> ihdr;
  auto be32 = [&](std::uint32_t v) {
    ihdr.push_back(std::uint8_t(v >> 24));
    ihdr.push_back(std::uint8_t(v >> 16));
    ihdr.push_back(std::uint8_t(v >> 8));
    ihdr.push_back(std::uint8_t(v));
  };
  be32(std::uint32_t(canvas.width()));
  be32(std::uint32_t(canvas.height()));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // truecolor
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // interlace
  detail::png_chunk(out, "IHDR", ihdr);
  detail::png_chunk(out, "IDAT", compressed);
  detail::png_chunk(out, "IEND", {});
  detail::write_file_bytes(path, out.data(), out.size());
}

// Two-panel bar chart: mean Dice by tumor-size group and by contrast phase.
inline void write_report_chart(const fs::path& path, const EvalReport& report) {
  const Rgb white{255, 255, 255}, black{20, 20, 20}, bar{70, 114, 196}, grid{210, 210, 210};
  const int W = 760, H = 300;
  Canvas canvas(W, H, white);

  char buf[64];
  std::snprintf(buf, sizeof(buf), "MEAN DICE %.3f", report.mean_dice);
  canvas.text((W - Canvas::text_width(buf, 2)) / 2, 12, buf, black, 2);

  struct Panel {
    std::string title;
    std::vector<std::pair<std::string, double>> bars;
  };
  Panel panels[2];
  panels[0].title = "DICE BY TUMOR SIZE";
  for (const char* name : {"small", "middle", "large", "none"}) {
    auto it = report.by_size.find(name);
    if (it != report.by_size.end()) panels[0].bars.emplace_back(name, it->second);
  }
  panels[1].title = "DICE BY CONTRAST PHASE";
  for (const char* name : {"arterial", "venous", "unknown"}) {
    auto it = report.by_phase.find(name);
    if (it != report.by_phase.end()) panels[1].bars.emplace_back(name, it->second);
  }

  const int panel_w = 340, panel_x[2] = {30, 30 + panel_w + 20};
  const int plot_top = 64, plot_bottom = H - 44, plot_h = plot_bottom - plot_top;
  for (int pi = 0; pi < 2; ++pi) {
    const Panel& panel = panels[pi];
    int x0 = panel_x[pi];
    canvas.text(x0 + (panel_w - Canvas::text_width(panel.title)) / 2, 44, panel.title, black);
    for (int tick = 0; tick <= 4; ++tick) {
      int y = plot_bottom - tick * plot_h / 4;
      canvas.hline(x0, x0 + panel_w, y, grid);
      std::snprintf(buf, sizeof(buf), "%.2f", tick * 0.25);
      canvas.text(x0 - 26, y - 3, buf, black);
    }
    canvas.vline(x0, plot_top, plot_bottom, black);
    canvas.hline(x0, x0 + panel_w, plot_bottom, black);
    if (panel.bars.empty()) continue;
    int n = int(panel.bars.size());
    int slot = panel_w / n;
    int bar_w = std::max(12, slot * 3 / 5);
    for (int i = 0; i < n; ++i) {
      double v = std::min(1.0, std::max(0.0, panel.bars[std::size_t(i)].second));
      int bh = int(v * plot_h + 0.5);
      int bx = x0 + i * slot + (slot - bar_w) / 2;
      canvas.fill_rect(bx, plot_bottom - bh, bar_w, bh, bar);
      std::snprintf(buf, sizeof(buf), "%.2f", panel.bars[std::size_t(i)].second);
      canvas.text(bx + (bar_w - Canvas::text_width(buf)) / 2, plot_bottom - bh - 12, buf, black);
      const std::string& label = panel.bars[std::size_t(i)].first;
      canvas.text(bx + (bar_w - Canvas::text_width(label)) / 2, plot_bottom + 8, label, black);
    }
  }
  write_png(path, canvas);
}

}  // namespace sfan
