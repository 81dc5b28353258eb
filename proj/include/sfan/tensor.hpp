#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sfan/errors.hpp"
#include "sfan/rng.hpp"

namespace sfan {

// Dense 4D tensor indexed (batch, channel, row, column), row-major with the
// column axis fastest.
template <typename T>
class Tensor4 {
 public:
  Tensor4() = default;
  Tensor4(int n, int c, int h, int w, T fill = T{}) : n_(n), c_(c), h_(h), w_(w) {
    require(n >= 1 && c >= 1 && h >= 1 && w >= 1, Errc::bad_arguments,
            "tensor dimensions must be positive, got " + shape_str());
    data_.assign(count(), fill);
  }
  Tensor4(int n, int c, int h, int w, std::vector<T> data)
      : n_(n), c_(c), h_(h), w_(w), data_(std::move(data)) {
    require(data_.size() == count(), Errc::shape_mismatch,
            "tensor payload does not match shape " + shape_str());
  }

  static Tensor4 full(int n, int c, int h, int w, T v) { return Tensor4(n, c, h, w, v); }
  static Tensor4 zeros_like(const Tensor4& o) { return Tensor4(o.n_, o.c_, o.h_, o.w_); }

  int n() const { return n_; }
  int c() const { return c_; }
  int h() const { return h_; }
  int w() const { return w_; }
  bool empty() const { return data_.empty(); }
  std::size_t count() const {
    return std::size_t(n_) * std::size_t(c_) * std::size_t(h_) * std::size_t(w_);
  }
  bool same_shape(const Tensor4& o) const {
    return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }
  std::string shape_str() const {
    return "(" + std::to_string(n_) + ", " + std::to_string(c_) + ", " + std::to_string(h_) +
           ", " + std::to_string(w_) + ")";
  }

  T& at(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
  const T& at(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }

  T* row(int n, int c, int y) { return data_.data() + index(n, c, y, 0); }
  const T* row(int n, int c, int y) const { return data_.data() + index(n, c, y, 0); }

  T* plane(int n, int c) { return data_.data() + index(n, c, 0, 0); }
  const T* plane(int n, int c) const { return data_.data() + index(n, c, 0, 0); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }

  bool operator==(const Tensor4&) const = default;

  template <typename U>
  Tensor4<U> cast() const {
    std::vector<U> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return Tensor4<U>(n_, c_, h_, w_, std::move(out));
  }

 private:
  std::size_t index(int n, int c, int y, int x) const {
    return ((std::size_t(n) * c_ + c) * h_ + y) * w_ + x;
  }

  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  std::vector<T> data_;
};

// I.i.d. normal(0, std^2) draws in index order from an existing stream.
template <typename T>
Tensor4<T> gaussian_tensor(int n, int c, int h, int w, double stddev, Rng& rng) {
  Tensor4<T> t(n, c, h, w);
  for (auto& v : t.raw()) v = static_cast<T>(stddev * rng.normal());
  return t;
}

// Deterministic for a fixed seed.
template <typename T>
Tensor4<T> gaussian_init(int n, int c, int h, int w, double stddev, std::uint64_t seed) {
  Rng rng(seed);
  return gaussian_tensor<T>(n, c, h, w, stddev, rng);
}

// Corner-aligned bilinear sample positions: endpoints map to endpoints.
inline double bilinear_source_pos(int out_index, int out_size, int in_size) {
  if (out_size <= 1 || in_size <= 1) return 0.0;
  return double(out_index) * double(in_size - 1) / double(out_size - 1);
}

// General bilinear resize of one (H, W) plane; handles both up- and
// down-scaling. Used by the graph upsample op and by inference-side image
// pyramid construction.
template <typename T>
void bilinear_resize_plane(const T* src, int sh, int sw, T* dst, int th, int tw) {
  for (int y = 0; y < th; ++y) {
    double fy = bilinear_source_pos(y, th, sh);
    int y0 = int(fy);
    int y1 = y0 + 1 < sh ? y0 + 1 : y0;
    double wy = fy - y0;
    for (int x = 0; x < tw; ++x) {
      double fx = bilinear_source_pos(x, tw, sw);
      int x0 = int(fx);
      int x1 = x0 + 1 < sw ? x0 + 1 : x0;
      double wx = fx - x0;
      double top = double(src[y0 * sw + x0]) * (1.0 - wx) + double(src[y0 * sw + x1]) * wx;
      double bot = double(src[y1 * sw + x0]) * (1.0 - wx) + double(src[y1 * sw + x1]) * wx;
      dst[y * tw + x] = static_cast<T>(top * (1.0 - wy) + bot * wy);
    }
  }
}

template <typename T>
Tensor4<T> bilinear_resize(const Tensor4<T>& src, int th, int tw) {
  if (th == src.h() && tw == src.w()) return src;
  Tensor4<T> out(src.n(), src.c(), th, tw);
  for (int n = 0; n < src.n(); ++n)
    for (int c = 0; c < src.c(); ++c)
      bilinear_resize_plane(src.plane(n, c), src.h(), src.w(), out.plane(n, c), th, tw);
  return out;
}

}  // namespace sfan
