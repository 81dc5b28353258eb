#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "sfan/errors.hpp"
#include "sfan/tensor.hpp"

namespace sfan {

// Probability floor applied inside the cross-entropy log.
constexpr double kProbFloor = 1e-7;

template <typename T>
struct Node {
  Tensor4<T> value;
  Tensor4<T> grad;  // allocated lazily; empty means "no gradient flowed here yet"
  bool requires_grad = false;
};

// Dynamically built computation graph. Forward values are computed eagerly as
// ops are added; each op that participates in differentiation pushes a closure
// onto a tape which backward() replays in reverse. All loops run in a fixed
// sequential order, so results are bit-reproducible run to run.
template <typename T>
class Graph {
 public:
  Node<T>* input(Tensor4<T> value, bool requires_grad = false) {
    return make(std::move(value), requires_grad);
  }

  // kernel shape (C_out, C_in, k, k) with k in {1, 3}; 3x3 uses same-padding
  // 1; bias shape (1, C_out, 1, 1).
  Node<T>* conv2d(Node<T>* x, Node<T>* kernel, Node<T>* bias) {
    const auto& xv = x->value;
    const auto& wv = kernel->value;
    const auto& bv = bias->value;
    int k = wv.h();
    require(k == wv.w() && (k == 1 || k == 3), Errc::bad_arguments,
            "convolution kernel must be 1x1 or 3x3, got " + wv.shape_str());
    require(wv.c() == xv.c(), Errc::channel_mismatch,
            "kernel expects " + std::to_string(wv.c()) + " input channels, tensor has " +
                std::to_string(xv.c()));
    require(bv.n() == 1 && bv.c() == wv.n() && bv.h() == 1 && bv.w() == 1, Errc::channel_mismatch,
            "bias shape " + bv.shape_str() + " does not match " + std::to_string(wv.n()) +
                " output channels");
    int pad = (k - 1) / 2;
    int N = xv.n(), ci_n = xv.c(), co_n = wv.n(), H = xv.h(), W = xv.w();
    Tensor4<T> out(N, co_n, H, W);
    for (int n = 0; n < N; ++n)
      for (int co = 0; co < co_n; ++co) {
        T* op = out.plane(n, co);
        T bval = bv.at(0, co, 0, 0);
        for (int i = 0; i < H * W; ++i) op[i] = bval;
        for (int ci = 0; ci < ci_n; ++ci) {
          const T* ip = xv.plane(n, ci);
          for (int ky = 0; ky < k; ++ky) {
            int dy = ky - pad;
            for (int kx = 0; kx < k; ++kx) {
              int dx = kx - pad;
              T wval = wv.at(co, ci, ky, kx);
              int ylo = std::max(0, -dy), yhi = std::min(H, H - dy);
              int xlo = std::max(0, -dx), xhi = std::min(W, W - dx);
              for (int y = ylo; y < yhi; ++y) {
                const T* src = ip + std::size_t(y + dy) * W + dx;
                T* dst = op + std::size_t(y) * W;
                for (int xx = xlo; xx < xhi; ++xx) dst[xx] += wval * src[xx];
              }
            }
          }
        }
      }
    Node<T>* node = make(std::move(out), x->requires_grad || kernel->requires_grad ||
                                             bias->requires_grad);
    if (node->requires_grad)
      tape_.push_back([this, x, kernel, bias, node, k, pad, N, ci_n, co_n, H, W]() {
        if (node->grad.empty()) return;
        const auto& g = node->grad;
        const auto& xv = x->value;
        const auto& wv = kernel->value;
        if (bias->requires_grad) {
          auto& gb = grad(bias);
          for (int co = 0; co < co_n; ++co) {
            T acc{};
            for (int n = 0; n < N; ++n) {
              const T* gp = g.plane(n, co);
              for (int i = 0; i < H * W; ++i) acc += gp[i];
            }
            gb.at(0, co, 0, 0) += acc;
          }
        }
        if (kernel->requires_grad) {
          auto& gw = grad(kernel);
          for (int co = 0; co < co_n; ++co)
            for (int ci = 0; ci < ci_n; ++ci)
              for (int ky = 0; ky < k; ++ky) {
                int dy = ky - pad;
                for (int kx = 0; kx < k; ++kx) {
                  int dx = kx - pad;
                  int ylo = std::max(0, -dy), yhi = std::min(H, H - dy);
                  int xlo = std::max(0, -dx), xhi = std::min(W, W - dx);
                  T acc{};
                  for (int n = 0; n < N; ++n) {
                    const T* gp = g.plane(n, co);
                    const T* ip = xv.plane(n, ci);
                    for (int y = ylo; y < yhi; ++y) {
                      const T* srow = ip + std::size_t(y + dy) * W + dx;
                      const T* grow = gp + std::size_t(y) * W;
                      for (int xx = xlo; xx < xhi; ++xx) acc += grow[xx] * srow[xx];
                    }
                  }
                  gw.at(co, ci, ky, kx) += acc;
                }
              }
        }
        if (x->requires_grad) {
          auto& gx = grad(x);
          for (int n = 0; n < N; ++n)
            for (int co = 0; co < co_n; ++co) {
              const T* gp = g.plane(n, co);
              for (int ci = 0; ci < ci_n; ++ci) {
                T* gxp = gx.plane(n, ci);
                for (int ky = 0; ky < k; ++ky) {
                  int dy = ky - pad;
                  for (int kx = 0; kx < k; ++kx) {
                    int dx = kx - pad;
                    T wval = wv.at(co, ci, ky, kx);
                    int ylo = std::max(0, -dy), yhi = std::min(H, H - dy);
                    int xlo = std::max(0, -dx), xhi = std::min(W, W - dx);
                    for (int y = ylo; y < yhi; ++y) {
                      T* dst = gxp + std::size_t(y + dy) * W + dx;
                      const T* grow = gp + std::size_t(y) * W;
                      for (int xx = xlo; xx < xhi; ++xx) dst[xx] += wval * grow[xx];
                    }
                  }
                }
              }
            }
        }
      });
    return node;
  }

  Node<T>* relu(Node<T>* x) {
    Tensor4<T> out = x->value;
    for (auto& v : out.raw())
      if (v < T{}) v = T{};
    Node<T>* node = make(std::move(out), x->requires_grad);
    if (node->requires_grad)
      tape_.push_back([this, x, node]() {
        if (node->grad.empty() || !x->requires_grad) return;
        auto& gx = grad(x);
        const auto& g = node->grad.raw();
        const auto& xv = x->value.raw();
        for (std::size_t i = 0; i < g.size(); ++i)
          if (xv[i] > T{}) gx.raw()[i] += g[i];
      });
    return node;
  }

  Node<T>* sigmoid(Node<T>* x) {
    Tensor4<T> out = x->value;
    for (auto& v : out.raw()) v = stable_sigmoid(v);
    Node<T>* node = make(std::move(out), x->requires_grad);
    if (node->requires_grad)
      tape_.push_back([this, x, node]() {
        if (node->grad.empty() || !x->requires_grad) return;
        auto& gx = grad(x);
        const auto& g = node->grad.raw();
        const auto& s = node->value.raw();
        for (std::size_t i = 0; i < g.size(); ++i) gx.raw()[i] += g[i] * s[i] * (T(1) - s[i]);
      });
    return node;
  }

  // Softmax over the channel axis, per (batch, y, x) position.
  Node<T>* softmax_channels(Node<T>* x) {
    const auto& xv = x->value;
    int N = xv.n(), C = xv.c(), H = xv.h(), W = xv.w();
    Tensor4<T> out(N, C, H, W);
    std::size_t plane = std::size_t(H) * W;
    for (int n = 0; n < N; ++n)
      for (std::size_t i = 0; i < plane; ++i) {
        T mx = xv.plane(n, 0)[i];
        for (int c = 1; c < C; ++c) mx = std::max(mx, xv.plane(n, c)[i]);
        double sum = 0.0;
        for (int c = 0; c < C; ++c) {
          double e = std::exp(double(xv.plane(n, c)[i]) - double(mx));
          out.plane(n, c)[i] = T(e);
          sum += e;
        }
        double inv = 1.0 / sum;
        for (int c = 0; c < C; ++c) out.plane(n, c)[i] = T(double(out.plane(n, c)[i]) * inv);
      }
    Node<T>* node = make(std::move(out), x->requires_grad);
    if (node->requires_grad)
      tape_.push_back([this, x, node, N, C, plane]() {
        if (node->grad.empty() || !x->requires_grad) return;
        auto& gx = grad(x);
        const auto& g = node->grad;
        const auto& s = node->value;
        for (int n = 0; n < N; ++n)
          for (std::size_t i = 0; i < plane; ++i) {
            double dot = 0.0;
            for (int c = 0; c < C; ++c)
              dot += double(g.plane(n, c)[i]) * double(s.plane(n, c)[i]);
            for (int c = 0; c < C; ++c)
              gx.plane(n, c)[i] +=
                  T(double(s.plane(n, c)[i]) * (double(g.plane(n, c)[i]) - dot));
          }
      });
    return node;
  }

  Node<T>* maxpool2(Node<T>* x) {
    const auto& xv = x->value;
    int N = xv.n(), C = xv.c(), H = xv.h(), W = xv.w();
    require(H % 2 == 0 && W % 2 == 0, Errc::bad_arguments,
            "max-pooling requires even spatial dimensions, got " + xv.shape_str());
    int oh = H / 2, ow = W / 2;
    Tensor4<T> out(N, C, oh, ow);
    auto argmax = std::make_shared<std::vector<std::int32_t>>(out.count());
    std::size_t cell = 0;
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) {
        const T* ip = xv.plane(n, c);
        T* op = out.plane(n, c);
        for (int y = 0; y < oh; ++y)
          for (int xx = 0; xx < ow; ++xx, ++cell) {
            int base = 2 * y * W + 2 * xx;
            int best = base;
            T bv = ip[base];
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx) {
                int idx = base + dy * W + dx;
                if (ip[idx] > bv) {
                  bv = ip[idx];
                  best = idx;
                }
              }
            op[std::size_t(y) * ow + xx] = bv;
            (*argmax)[cell] = best;
          }
      }
    Node<T>* node = make(std::move(out), x->requires_grad);
    if (node->requires_grad)
      tape_.push_back([this, x, node, argmax, N, C, oh, ow]() {
        if (node->grad.empty() || !x->requires_grad) return;
        auto& gx = grad(x);
        std::size_t cell = 0;
        for (int n = 0; n < N; ++n)
          for (int c = 0; c < C; ++c) {
            T* gxp = gx.plane(n, c);
            const T* gp = node->grad.plane(n, c);
            for (int i = 0; i < oh * ow; ++i, ++cell) gxp[(*argmax)[cell]] += gp[i];
          }
      });
    return node;
  }

  Node<T>* global_avg_pool(Node<T>* x) {
    const auto& xv = x->value;
    int N = xv.n(), C = xv.c(), H = xv.h(), W = xv.w();
    Tensor4<T> out(N, C, 1, 1);
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) {
        const T* ip = xv.plane(n, c);
        double acc = 0.0;
        for (int i = 0; i < H * W; ++i) acc += double(ip[i]);
        out.at(n, c, 0, 0) = T(acc / (double(H) * double(W)));
      }
    Node<T>* node = make(std::move(out), x->requires_grad);
    if (node->requires_grad)
      tape_.push_back([this, x, node, N, C, H, W]() {
        if (node->grad.empty() || !x->requires_grad) return;
        auto& gx = grad(x);
        T inv = T(1.0 / (double(H) * double(W)));
        for (int n = 0; n < N; ++n)
          for (int c = 0; c < C; ++c) {
            T g = node->grad.at(n, c, 0, 0) * inv;
            T* gxp = gx.plane(n, c);
            for (int i = 0; i < H * W; ++i) gxp[i] += g;
          }
      });
    return node;
  }

  // Corner-aligned bilinear upsampling; target must not shrink either axis.
  Node<T>* upsample_bilinear(Node<T>* x, int th, int tw) {
    const auto& xv = x->value;
    int N = xv.n(), C = xv.c(), H = xv.h(), W = xv.w();
    require(th >= H && tw >= W, Errc::bad_arguments,
            "upsample target " + std::to_string(th) + "x" + std::to_string(tw) +
                " is smaller than source " + std::to_string(H) + "x" + std::to_string(W));
    if (th == H && tw == W) return x;
    Tensor4<T> out(N, C, th, tw);
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c)
        bilinear_resize_plane(xv.plane(n, c), H, W, out.plane(n, c), th, tw);
    Node<T>* node = make(std::move(out), x->requires_grad);
    if (node->requires_grad)
      tape_.push_back([this, x, node, N, C, H, W, th, tw]() {
        if (node->grad.empty() || !x->requires_grad) return;
        auto& gx = grad(x);
        for (int n = 0; n < N; ++n)
          for (int c = 0; c < C; ++c) {
            T* gxp = gx.plane(n, c);
            const T* gp = node->grad.plane(n, c);
            for (int y = 0; y < th; ++y) {
              double fy = bilinear_source_pos(y, th, H);
              int y0 = int(fy);
              int y1 = y0 + 1 < H ? y0 + 1 : y0;
              double wy = fy - y0;
              for (int xx = 0; xx < tw; ++xx) {
                double fx = bilinear_source_pos(xx, tw, W);
                int x0 = int(fx);
                int x1 = x0 + 1 < W ? x0 + 1 : x0;
                double wx = fx - x0;
                double g = double(gp[std::size_t(y) * tw + xx]);
                gxp[std::size_t(y0) * W + x0] += T(g * (1.0 - wy) * (1.0 - wx));
                gxp[std::size_t(y0) * W + x1] += T(g * (1.0 - wy) * wx);
                gxp[std::size_t(y1) * W + x0] += T(g * wy * (1.0 - wx));
                gxp[std::size_t(y1) * W + x1] += T(g * wy * wx);
              }
            }
          }
      });
    return node;
  }

  Node<T>* concat_channels(const std::vector<Node<T>*>& xs) {
    require(!xs.empty(), Errc::bad_arguments, "channel concatenation of an empty list");
    int N = xs[0]->value.n(), H = xs[0]->value.h(), W = xs[0]->value.w();
    int C = 0;
    bool needs_grad = false;
    for (auto* x : xs) {
      require(x->value.n() == N && x->value.h() == H && x->value.w() == W, Errc::shape_mismatch,
              "channel concatenation inputs disagree on batch or spatial shape");
      C += x->value.c();
      needs_grad = needs_grad || x->requires_grad;
    }
    Tensor4<T> out(N, C, H, W);
    std::size_t plane = std::size_t(H) * W;
    for (int n = 0; n < N; ++n) {
      int co = 0;
      for (auto* x : xs)
        for (int c = 0; c < x->value.c(); ++c, ++co)
          std::copy_n(x->value.plane(n, c), plane, out.plane(n, co));
    }
    Node<T>* node = make(std::move(out), needs_grad);
    if (needs_grad) {
      auto inputs = std::make_shared<std::vector<Node<T>*>>(xs);
      tape_.push_back([this, inputs, node, N, plane]() {
        if (node->grad.empty()) return;
        for (int n = 0; n < N; ++n) {
          int co = 0;
          for (auto* x : *inputs) {
            for (int c = 0; c < x->value.c(); ++c, ++co) {
              if (!x->requires_grad) continue;
              const T* gp = node->grad.plane(n, co);
              T* gxp = grad(x).plane(n, c);
              for (std::size_t i = 0; i < plane; ++i) gxp[i] += gp[i];
            }
          }
        }
      });
    }
    return node;
  }

  // Multiplies every spatial position of channel c by v[n, c]; v has shape
  // (N, C, 1, 1).
  Node<T>* mul_broadcast(Node<T>* x, Node<T>* v) {
    const auto& xv = x->value;
    const auto& vv = v->value;
    require(vv.n() == xv.n() && vv.c() == xv.c() && vv.h() == 1 && vv.w() == 1,
            Errc::channel_mismatch, "broadcast vector shape " + vv.shape_str() +
                                        " does not match tensor " + xv.shape_str());
    int N = xv.n(), C = xv.c();
    std::size_t plane = std::size_t(xv.h()) * xv.w();
    Tensor4<T> out(N, C, xv.h(), xv.w());
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) {
        T s = vv.at(n, c, 0, 0);
        const T* ip = xv.plane(n, c);
        T* op = out.plane(n, c);
        for (std::size_t i = 0; i < plane; ++i) op[i] = ip[i] * s;
      }
    Node<T>* node = make(std::move(out), x->requires_grad || v->requires_grad);
    if (node->requires_grad)
      tape_.push_back([this, x, v, node, N, C, plane]() {
        if (node->grad.empty()) return;
        if (x->requires_grad) {
          auto& gx = grad(x);
          for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c) {
              T s = v->value.at(n, c, 0, 0);
              const T* gp = node->grad.plane(n, c);
              T* gxp = gx.plane(n, c);
              for (std::size_t i = 0; i < plane; ++i) gxp[i] += gp[i] * s;
            }
        }
        if (v->requires_grad) {
          auto& gv = grad(v);
          for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c) {
              const T* gp = node->grad.plane(n, c);
              const T* ip = x->value.plane(n, c);
              T acc{};
              for (std::size_t i = 0; i < plane; ++i) acc += gp[i] * ip[i];
              gv.at(n, c, 0, 0) += acc;
            }
        }
      });
    return node;
  }

  // Mean over all pixels of -weight[target] * log(max(p_target, floor)).
  // targets holds one class index per (batch, y, x) position, x fastest.
  Node<T>* weighted_cross_entropy(Node<T>* probs, const std::vector<std::int32_t>& targets,
                                  const std::vector<double>& class_weights) {
    const auto& pv = probs->value;
    int N = pv.n(), C = pv.c(), H = pv.h(), W = pv.w();
    std::size_t plane = std::size_t(H) * W;
    require(targets.size() == std::size_t(N) * plane, Errc::shape_mismatch,
            "target count " + std::to_string(targets.size()) + " does not match " +
                std::to_string(std::size_t(N) * plane) + " pixels");
    require(class_weights.size() == std::size_t(C), Errc::shape_mismatch,
            "class weight count does not match " + std::to_string(C) + " classes");
    for (double w : class_weights)
      require(w > 0.0, Errc::bad_arguments, "class weights must be positive");
    double acc = 0.0;
    for (int n = 0; n < N; ++n)
      for (std::size_t i = 0; i < plane; ++i) {
        std::int32_t t = targets[std::size_t(n) * plane + i];
        require(t >= 0 && t < C, Errc::label_range,
                "target class " + std::to_string(t) + " outside [0, " + std::to_string(C) + ")");
        double p = std::max(double(pv.plane(n, t)[i]), kProbFloor);
        acc -= class_weights[std::size_t(t)] * std::log(p);
      }
    double denom = double(N) * double(plane);
    Tensor4<T> out(1, 1, 1, 1, T(acc / denom));
    Node<T>* node = make(std::move(out), probs->requires_grad);
    if (node->requires_grad) {
      auto tgt = std::make_shared<std::vector<std::int32_t>>(targets);
      auto wts = std::make_shared<std::vector<double>>(class_weights);
      tape_.push_back([this, probs, node, tgt, wts, N, plane, denom]() {
        if (node->grad.empty() || !probs->requires_grad) return;
        double g = double(node->grad.at(0, 0, 0, 0));
        auto& gp = grad(probs);
        for (int n = 0; n < N; ++n)
          for (std::size_t i = 0; i < plane; ++i) {
            std::int32_t t = (*tgt)[std::size_t(n) * plane + i];
            double p = double(probs->value.plane(n, t)[i]);
            if (p >= kProbFloor)
              gp.plane(n, t)[i] += T(-g * (*wts)[std::size_t(t)] / (p * denom));
          }
      });
    }
    return node;
  }

  // Scalar projection sum_i coeffs_i * x_i; reduces any tensor to a (1,1,1,1)
  // loss so finite-difference probes can target a single primitive.
  Node<T>* weighted_sum(Node<T>* x, const Tensor4<T>& coeffs) {
    require(x->value.same_shape(coeffs), Errc::shape_mismatch,
            "projection coefficients shape " + coeffs.shape_str() + " does not match " +
                x->value.shape_str());
    double acc = 0.0;
    const auto& xv = x->value.raw();
    for (std::size_t i = 0; i < xv.size(); ++i) acc += double(xv[i]) * double(coeffs.raw()[i]);
    Node<T>* node = make(Tensor4<T>(1, 1, 1, 1, T(acc)), x->requires_grad);
    if (node->requires_grad) {
      auto cf = std::make_shared<Tensor4<T>>(coeffs);
      tape_.push_back([this, x, node, cf]() {
        if (node->grad.empty() || !x->requires_grad) return;
        T g = node->grad.at(0, 0, 0, 0);
        auto& gx = grad(x).raw();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * cf->raw()[i];
      });
    }
    return node;
  }

  // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. loss must be
  // scalar-shaped (1,1,1,1).
  void backward(Node<T>* loss) {
    require(loss->value.count() == 1, Errc::bad_arguments,
            "backward expects a scalar loss, got " + loss->value.shape_str());
    grad(loss).at(0, 0, 0, 0) = T(1);
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
  }

  // Gradient tensor of a node, allocated (zero-filled) on first access.
  Tensor4<T>& grad(Node<T>* node) {
    if (node->grad.empty()) node->grad = Tensor4<T>::zeros_like(node->value);
    return node->grad;
  }

  static T stable_sigmoid(T z) {
    if (z >= T{}) return T(1) / (T(1) + T(std::exp(-double(z))));
    double e = std::exp(double(z));
    return T(e / (1.0 + e));
  }

 private:
  Node<T>* make(Tensor4<T> value, bool requires_grad) {
    nodes_.push_back(std::make_unique<Node<T>>());
    Node<T>* n = nodes_.back().get();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return n;
  }

  std::vector<std::unique_ptr<Node<T>>> nodes_;
  std::vector<std::function<void()>> tape_;
};

}  // namespace sfan
