#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfan/errors.hpp"
#include "sfan/nn.hpp"
#include "sfan/params.hpp"
#include "sfan/rng.hpp"

namespace sfan {

constexpr double kInitStd = 0.01;

// Architecture hyperparameters for both the attention model ("sfan") and the
// encoder-decoder baseline ("unet").
struct ModelConfig {
  std::string kind = "sfan";
  int levels = 5;
  std::vector<int> encoder_channels = {32, 64, 128, 256, 512};
  int aligned_channels = 64;
  int num_classes = 2;
  bool sat_enabled = true;
  bool gca_enabled = true;

  int pool_factor() const { return 1 << (levels - 1); }

  void validate() const {
    require(kind == "sfan" || kind == "unet", Errc::bad_arguments,
            "model kind must be 'sfan' or 'unet', got '" + kind + "'");
    require(levels >= 2, Errc::bad_arguments, "model needs at least 2 levels");
    require(int(encoder_channels.size()) == levels, Errc::bad_arguments,
            "encoder_channels must list one width per level");
    for (int c : encoder_channels)
      require(c >= 1, Errc::bad_arguments, "encoder channel widths must be positive");
    require(aligned_channels >= 1, Errc::bad_arguments, "aligned_channels must be positive");
    require(num_classes >= 2, Errc::bad_arguments, "num_classes must be at least 2");
  }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"kind", c.kind},
                     {"levels", c.levels},
                     {"encoder_channels", c.encoder_channels},
                     {"aligned_channels", c.aligned_channels},
                     {"num_classes", c.num_classes},
                     {"sat_enabled", c.sat_enabled},
                     {"gca_enabled", c.gca_enabled}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  try {
    c.kind = j.value("kind", c.kind);
    c.levels = j.value("levels", c.levels);
    if (j.contains("encoder_channels"))
      c.encoder_channels = j.at("encoder_channels").get<std::vector<int>>();
    c.aligned_channels = j.value("aligned_channels", c.aligned_channels);
    c.num_classes = j.value("num_classes", c.num_classes);
    c.sat_enabled = j.value("sat_enabled", c.sat_enabled);
    c.gca_enabled = j.value("gca_enabled", c.gca_enabled);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::bad_arguments, std::string("bad model config: ") + e.what());
  }
}

// Channel width of the squeeze layer inside both attention branches.
inline int squeeze_channels(int out_channels) { return (out_channels + 3) / 4; }

struct ParamShape {
  int n, c, h, w;
  bool is_kernel;  // kernels draw Gaussian values; biases start at zero
};

// Single source of truth for parameter names, shapes, and order.
inline void for_each_param(const ModelConfig& cfg,
                           const std::function<void(const std::string&, ParamShape)>& fn) {
  cfg.validate();
  auto conv = [&](const std::string& base, int c_out, int c_in, int k) {
    fn(base + ".w", ParamShape{c_out, c_in, k, k, true});
    fn(base + ".b", ParamShape{1, c_out, 1, 1, false});
  };
  const auto& ch = cfg.encoder_channels;
  int L = cfg.levels;
  for (int l = 0; l < L; ++l) {
    int c_in = l == 0 ? 1 : ch[std::size_t(l - 1)];
    conv("enc" + std::to_string(l) + ".conv1", ch[std::size_t(l)], c_in, 3);
    conv("enc" + std::to_string(l) + ".conv2", ch[std::size_t(l)], ch[std::size_t(l)], 3);
  }
  if (cfg.kind == "sfan") {
    if (cfg.sat_enabled)
      for (int t = 0; t < L - 1; ++t) {
        int c_t = ch[std::size_t(t)];
        int sq = squeeze_channels(c_t);
        conv("sat" + std::to_string(t) + ".conv1", sq, ch[std::size_t(t + 1)], 1);
        conv("sat" + std::to_string(t) + ".conv2", c_t, sq, 1);
      }
    for (int l = 0; l < L; ++l)
      conv("align" + std::to_string(l) + ".proj", cfg.aligned_channels, ch[std::size_t(l)], 1);
    int pyramid = L * cfg.aligned_channels;
    if (cfg.gca_enabled) {
      int sq = squeeze_channels(pyramid);
      conv("gca.conv1", sq, ch[std::size_t(L - 1)], 1);
      conv("gca.conv2", pyramid, sq, 1);
    }
    conv("head.conv3x3", cfg.aligned_channels, pyramid, 3);
    conv("head.conv1x1", cfg.num_classes, cfg.aligned_channels, 1);
  } else {
    for (int l = L - 2; l >= 0; --l) {
      int c_in = ch[std::size_t(l)] + ch[std::size_t(l + 1)];
      conv("dec" + std::to_string(l) + ".conv1", ch[std::size_t(l)], c_in, 3);
      conv("dec" + std::to_string(l) + ".conv2", ch[std::size_t(l)], ch[std::size_t(l)], 3);
    }
    conv("head.conv1x1", cfg.num_classes, ch[0], 1);
  }
}

// Gaussian(0, kInitStd^2) kernels drawn from one seeded stream in enumeration
// order; biases zero. Deterministic per seed.
inline ParamStore<float> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ParamStore<float> store;
  Rng rng(seed);
  for_each_param(cfg, [&](const std::string& name, ParamShape s) {
    if (s.is_kernel)
      store.add(name, gaussian_tensor<float>(s.n, s.c, s.h, s.w, kInitStd, rng));
    else
      store.add(name, Tensor4<float>(s.n, s.c, s.h, s.w));
  });
  return store;
}

// Lazily mirrors store tensors into graph inputs, one node per name, so a
// forward pass touches exactly the parameters it uses and gradient readers
// can enumerate what was bound.
template <typename T>
class ParamBinder {
 public:
  ParamBinder(Graph<T>& g, const ParamStore<T>& store, bool trainable = true)
      : g_(g), store_(store), trainable_(trainable) {}

  Node<T>* operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    Node<T>* n = g_.input(store_.at(name), trainable_);
    bound_.emplace(name, n);
    order_.push_back(name);
    return n;
  }

  const std::vector<std::string>& bound_names() const { return order_; }
  Node<T>* node(const std::string& name) const {
    auto it = bound_.find(name);
    require(it != bound_.end(), Errc::bad_arguments, "parameter '" + name + "' was not bound");
    return it->second;
  }

 private:
  Graph<T>& g_;
  const ParamStore<T>& store_;
  bool trainable_;
  std::map<std::string, Node<T>*> bound_;
  std::vector<std::string> order_;
};

// ---- model pieces ---------------------------------------------------------

// Feature maps H_0..H_{L-1}; level l is captured after its two convolutions
// and before the pooling that feeds level l+1, so H_0 has input resolution.
template <typename T>
std::vector<Node<T>*> encode(Graph<T>& g, Node<T>* image, const ModelConfig& cfg,
                             ParamBinder<T>& p) {
  int m = cfg.pool_factor();
  require(image->value.h() % m == 0 && image->value.w() % m == 0, Errc::bad_arguments,
          "input spatial size " + image->value.shape_str() + " is not divisible by " +
              std::to_string(m));
  std::vector<Node<T>*> features;
  Node<T>* x = image;
  for (int l = 0; l < cfg.levels; ++l) {
    std::string base = "enc" + std::to_string(l);
    x = g.relu(g.conv2d(x, p(base + ".conv1.w"), p(base + ".conv1.b")));
    x = g.relu(g.conv2d(x, p(base + ".conv2.w"), p(base + ".conv2.b")));
    features.push_back(x);
    if (l < cfg.levels - 1) x = g.maxpool2(x);
  }
  return features;
}

// Channel attention vector for level t computed from the level-t+1 features:
// squeeze via global pooling, two 1x1 convolutions with an inner ReLU, outer
// sigmoid. Output shape (N, C_t, 1, 1), entries in (0, 1).
template <typename T>
Node<T>* sat_attention(Graph<T>& g, Node<T>* h_next, int t, ParamBinder<T>& p) {
  std::string base = "sat" + std::to_string(t);
  Node<T>* squeeze = g.global_avg_pool(h_next);
  Node<T>* hidden = g.relu(g.conv2d(squeeze, p(base + ".conv1.w"), p(base + ".conv1.b")));
  return g.sigmoid(g.conv2d(hidden, p(base + ".conv2.w"), p(base + ".conv2.b")));
}

// S_t = V_t (.) H_t; the top level passes through unchanged (v == nullptr).
template <typename T>
Node<T>* sat_apply(Graph<T>& g, Node<T>* h_t, Node<T>* v) {
  return v ? g.mul_broadcast(h_t, v) : h_t;
}

// 1x1 projection to the shared aligned width followed by upsampling to the
// level-0 resolution.
template <typename T>
Node<T>* align(Graph<T>& g, Node<T>* s_l, int l, int th, int tw, ParamBinder<T>& p) {
  std::string base = "align" + std::to_string(l);
  Node<T>* proj = g.conv2d(s_l, p(base + ".proj.w"), p(base + ".proj.b"));
  return g.upsample_bilinear(proj, th, tw);
}

// Channel concatenation of the aligned per-level maps, in level order.
template <typename T>
Node<T>* build_pyramid(Graph<T>& g, const std::vector<Node<T>*>& s, const ModelConfig& cfg,
                       ParamBinder<T>& p) {
  int th = s[0]->value.h(), tw = s[0]->value.w();
  std::vector<Node<T>*> aligned;
  for (int l = 0; l < cfg.levels; ++l) aligned.push_back(align(g, s[std::size_t(l)], l, th, tw, p));
  return g.concat_channels(aligned);
}

// Global context vector from the deepest features; same squeeze structure as
// sat_attention, output channels L * C'.
template <typename T>
Node<T>* gca_attention(Graph<T>& g, Node<T>* h_top, const ModelConfig& cfg, ParamBinder<T>& p) {
  Node<T>* squeeze = g.global_avg_pool(h_top);
  Node<T>* hidden = g.relu(g.conv2d(squeeze, p("gca.conv1.w"), p("gca.conv1.b")));
  return g.sigmoid(g.conv2d(hidden, p("gca.conv2.w"), p("gca.conv2.b")));
}

// O = G (.) P; without a context vector the pyramid passes through.
template <typename T>
Node<T>* gca_apply(Graph<T>& g, Node<T>* pyramid, Node<T>* context) {
  return context ? g.mul_broadcast(pyramid, context) : pyramid;
}

// 3x3 convolution + ReLU, 1x1 convolution to class logits, channel softmax.
template <typename T>
Node<T>* head(Graph<T>& g, Node<T>* o, ParamBinder<T>& p) {
  Node<T>* x = g.relu(g.conv2d(o, p("head.conv3x3.w"), p("head.conv3x3.b")));
  Node<T>* logits = g.conv2d(x, p("head.conv1x1.w"), p("head.conv1x1.b"));
  return g.softmax_channels(logits);
}

template <typename T>
struct SfanOutputs {
  Node<T>* probs = nullptr;
  std::vector<Node<T>*> features;   // encoder maps H_0..H_{L-1}
  std::vector<Node<T>*> attention;  // V_0..V_{L-2}, nullptr when disabled
  Node<T>* global_attention = nullptr;  // G, nullptr when disabled
};

template <typename T>
SfanOutputs<T> sfan_forward(Graph<T>& g, Node<T>* image, const ModelConfig& cfg,
                            ParamBinder<T>& p) {
  SfanOutputs<T> out;
  out.features = encode(g, image, cfg, p);
  std::vector<Node<T>*> s;
  for (int t = 0; t < cfg.levels - 1; ++t) {
    Node<T>* v = cfg.sat_enabled
                     ? sat_attention(g, out.features[std::size_t(t + 1)], t, p)
                     : nullptr;
    out.attention.push_back(v);
    s.push_back(sat_apply(g, out.features[std::size_t(t)], v));
  }
  s.push_back(out.features.back());
  Node<T>* pyramid = build_pyramid(g, s, cfg, p);
  if (cfg.gca_enabled) out.global_attention = gca_attention(g, out.features.back(), cfg, p);
  Node<T>* weighted = gca_apply(g, pyramid, out.global_attention);
  out.probs = head(g, weighted, p);
  return out;
}

// Symmetric encoder-decoder baseline: skip concatenation of the same-level
// encoder map with the upsampled deeper path, two 3x3 conv + ReLU per block,
// 1x1 softmax head.
template <typename T>
Node<T>* unet_forward(Graph<T>& g, Node<T>* image, const ModelConfig& cfg, ParamBinder<T>& p) {
  std::vector<Node<T>*> features = encode(g, image, cfg, p);
  Node<T>* x = features.back();
  for (int l = cfg.levels - 2; l >= 0; --l) {
    Node<T>* skip = features[std::size_t(l)];
    Node<T>* up = g.upsample_bilinear(x, skip->value.h(), skip->value.w());
    Node<T>* cat = g.concat_channels({skip, up});
    std::string base = "dec" + std::to_string(l);
    x = g.relu(g.conv2d(cat, p(base + ".conv1.w"), p(base + ".conv1.b")));
    x = g.relu(g.conv2d(x, p(base + ".conv2.w"), p(base + ".conv2.b")));
  }
  Node<T>* logits = g.conv2d(x, p("head.conv1x1.w"), p("head.conv1x1.b"));
  return g.softmax_channels(logits);
}

// Dispatch on cfg.kind; returns the per-pixel class distribution node.
template <typename T>
Node<T>* model_forward(Graph<T>& g, Node<T>* image, const ModelConfig& cfg, ParamBinder<T>& p) {
  if (cfg.kind == "unet") return unet_forward(g, image, cfg, p);
  return sfan_forward(g, image, cfg, p).probs;
}

}  // namespace sfan
