#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfan/checkpoint.hpp"
#include "sfan/dataset.hpp"
#include "sfan/model.hpp"
#include "sfan/nn.hpp"
#include "sfan/rng.hpp"

namespace sfan {

struct TrainConfig {
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 4;
  int max_steps = 100;
  std::vector<double> class_weights;  // empty means derive from class frequencies
  std::uint64_t seed = 0;
  int checkpoint_every = 100;

  void validate() const {
    require(learning_rate > 0, Errc::bad_arguments, "learning_rate must be positive");
    require(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1,
            Errc::bad_arguments, "Adam betas must lie in [0, 1)");
    require(adam_eps > 0, Errc::bad_arguments, "adam_eps must be positive");
    require(batch_size >= 1, Errc::bad_arguments, "batch_size must be at least 1");
    require(max_steps >= 0, Errc::bad_arguments, "max_steps must be non-negative");
    require(checkpoint_every >= 1, Errc::bad_arguments, "checkpoint_every must be positive");
    for (double w : class_weights)
      require(w > 0, Errc::bad_arguments, "class weights must be positive");
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"learning_rate", c.learning_rate},
                     {"adam_beta1", c.adam_beta1},
                     {"adam_beta2", c.adam_beta2},
                     {"adam_eps", c.adam_eps},
                     {"batch_size", c.batch_size},
                     {"max_steps", c.max_steps},
                     {"seed", c.seed},
                     {"checkpoint_every", c.checkpoint_every}};
  if (c.class_weights.empty())
    j["class_weights"] = "auto";
  else
    j["class_weights"] = c.class_weights;
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  try {
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.seed = j.value("seed", c.seed);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    if (j.contains("class_weights")) {
      const auto& w = j.at("class_weights");
      if (w.is_string()) {
        require(w.get<std::string>() == "auto", Errc::bad_arguments,
                "class_weights must be an array or \"auto\"");
        c.class_weights.clear();
      } else {
        c.class_weights = w.get<std::vector<double>>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::bad_arguments, std::string("bad train config: ") + e.what());
  }
}

// Inverse-frequency weights total / (num_classes * count_c), clamped to
// [0.1, 10]; an absent class takes the upper clamp.
inline std::vector<double> auto_class_weights(const std::vector<std::int64_t>& class_counts) {
  require(!class_counts.empty(), Errc::empty_input, "no class counts");
  double total = 0;
  for (auto c : class_counts) total += double(c);
  require(total > 0, Errc::empty_input, "no labeled pixels");
  std::vector<double> weights;
  for (auto c : class_counts) {
    double w = c > 0 ? total / (double(class_counts.size()) * double(c)) : 10.0;
    weights.push_back(std::min(10.0, std::max(0.1, w)));
  }
  return weights;
}

// ---- Adam -----------------------------------------------------------------

struct AdamState {
  int step = 0;
  std::vector<Tensor4<float>> m;
  std::vector<Tensor4<float>> v;

  void init(const ParamStore<float>& params) {
    step = 0;
    m.clear();
    v.clear();
    for (std::size_t i = 0; i < params.size(); ++i) {
      m.push_back(Tensor4<float>::zeros_like(params.tensor(i)));
      v.push_back(Tensor4<float>::zeros_like(params.tensor(i)));
    }
  }
};

// Standard bias-corrected Adam update; gradients are aligned with the store's
// parameter order.
inline void adam_step(ParamStore<float>& params, const std::vector<Tensor4<float>>& grads,
                      AdamState& state, const TrainConfig& cfg) {
  require(grads.size() == params.size() && state.m.size() == params.size(), Errc::shape_mismatch,
          "gradient list does not match parameter store");
  ++state.step;
  double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  double corr1 = 1.0 - std::pow(b1, state.step);
  double corr2 = 1.0 - std::pow(b2, state.step);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params.tensor(i).raw();
    const auto& g = grads[i].raw();
    require(g.size() == p.size(), Errc::shape_mismatch,
            "gradient shape does not match parameter '" + params.name(i) + "'");
    auto& m = state.m[i].raw();
    auto& v = state.v[i].raw();
    for (std::size_t k = 0; k < p.size(); ++k) {
      double gk = double(g[k]);
      double mk = b1 * double(m[k]) + (1.0 - b1) * gk;
      double vk = b2 * double(v[k]) + (1.0 - b2) * gk * gk;
      m[k] = float(mk);
      v[k] = float(vk);
      double update = cfg.learning_rate * (mk / corr1) / (std::sqrt(vk / corr2) + cfg.adam_eps);
      p[k] = float(double(p[k]) - update);
    }
  }
}

// ---- batching -------------------------------------------------------------

struct Batch {
  Tensor4<float> images;              // (B, 1, H, W)
  std::vector<std::int32_t> targets;  // B * H * W, x fastest
};

// Uniform draws with replacement over all dataset slices.
inline Batch sample_batch(const SliceDataset& ds, int batch_size, Rng& rng) {
  require(!ds.slices.empty(), Errc::empty_input, "dataset has no slices");
  require(batch_size >= 1, Errc::bad_arguments, "batch size must be positive");
  std::size_t plane = std::size_t(ds.height) * ds.width;
  Batch batch;
  batch.images = Tensor4<float>(batch_size, 1, ds.height, ds.width);
  batch.targets.resize(std::size_t(batch_size) * plane);
  for (int b = 0; b < batch_size; ++b) {
    const auto& s = ds.slices[std::size_t(rng.uniform_index(ds.slices.size()))];
    std::copy_n(s.image.data(), plane, batch.images.plane(b, 0));
    for (std::size_t i = 0; i < plane; ++i)
      batch.targets[std::size_t(b) * plane + i] = s.labels[i];
  }
  return batch;
}

// ---- training loop --------------------------------------------------------

struct FitResult {
  std::vector<double> loss_history;
  ParamStore<float> params;
  std::vector<double> class_weights;
};

namespace detail {

inline void write_loss_csv(const fs::path& path, const std::vector<double>& history) {
  std::string text = "step,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < history.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9g\n", i + 1, history[i]);
    text += buf;
  }
  write_file_bytes(path, text.data(), text.size());
}

}  // namespace detail

// Gaussian-initializes the model, then iterates sample -> forward -> loss ->
// backward -> Adam for max_steps. When checkpoint_base is given, a checkpoint
// (<base>.json/.bin) is written every checkpoint_every steps and at the end,
// plus the loss history as <base>.loss.csv. Aborts with a divergence error if
// the loss leaves the finite range.
inline FitResult fit(const SliceDataset& ds, const ModelConfig& mcfg, const TrainConfig& tcfg,
                     const std::optional<fs::path>& checkpoint_base = std::nullopt) {
  mcfg.validate();
  tcfg.validate();
  require(!ds.slices.empty(), Errc::empty_input, "dataset has no slices");
  require(ds.height % mcfg.pool_factor() == 0 && ds.width % mcfg.pool_factor() == 0,
          Errc::bad_arguments, "dataset slice size is not divisible by the model pool factor");

  FitResult result;
  result.params = init_params(mcfg, derive_seed(tcfg.seed, 0));
  result.class_weights = tcfg.class_weights.empty() ? auto_class_weights(ds.class_counts)
                                                    : tcfg.class_weights;
  require(result.class_weights.size() == std::size_t(mcfg.num_classes), Errc::bad_arguments,
          "class weight count does not match num_classes");

  AdamState adam;
  adam.init(result.params);
  Rng sampler(derive_seed(tcfg.seed, 1));

  auto save = [&]() {
    if (checkpoint_base) save_checkpoint(*checkpoint_base, mcfg, result.params);
  };

  for (int step = 1; step <= tcfg.max_steps; ++step) {
    Batch batch = sample_batch(ds, tcfg.batch_size, sampler);
    Graph<float> g;
    ParamBinder<float> binder(g, result.params, /*trainable=*/true);
    Node<float>* image = g.input(std::move(batch.images), /*requires_grad=*/false);
    Node<float>* probs = model_forward(g, image, mcfg, binder);
    Node<float>* loss = g.weighted_cross_entropy(probs, batch.targets, result.class_weights);
    double loss_value = double(loss->value.at(0, 0, 0, 0));
    require(std::isfinite(loss_value), Errc::divergence,
            "loss became non-finite at step " + std::to_string(step));
    g.backward(loss);

    std::vector<Tensor4<float>> grads;
    for (std::size_t i = 0; i < result.params.size(); ++i) {
      Node<float>* node = binder.node(result.params.name(i));
      grads.push_back(node->grad.empty() ? Tensor4<float>::zeros_like(node->value)
                                         : node->grad);
    }
    adam_step(result.params, grads, adam, tcfg);
    result.loss_history.push_back(loss_value);
    if (step % tcfg.checkpoint_every == 0) save();
  }
  save();
  if (checkpoint_base) {
    fs::path csv = *checkpoint_base;
    csv += ".loss.csv";
    detail::write_loss_csv(csv, result.loss_history);
  }
  return result;
}

}  // namespace sfan
