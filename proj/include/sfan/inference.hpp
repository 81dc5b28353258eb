#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "sfan/checkpoint.hpp"
#include "sfan/model.hpp"
#include "sfan/preprocess.hpp"
#include "sfan/volume.hpp"

namespace sfan {

constexpr double kDefaultThreshold = 0.5;
inline const std::vector<double> kDefaultScales = {0.5, 1.0, 1.5};

inline Tensor4<float> slice_to_tensor(const Grid3<float>& voxels, int z) {
  Dims3 d = voxels.dims();
  std::vector<float> data(voxels.slice(z), voxels.slice(z) + std::size_t(d.y) * d.x);
  return Tensor4<float>(1, 1, d.y, d.x, std::move(data));
}

// A loaded model ready for forward evaluation.
struct Predictor {
  ModelConfig config;
  ParamStore<float> params;

  static Predictor from_checkpoint(Checkpoint ckpt) {
    return Predictor{std::move(ckpt.config), std::move(ckpt.params)};
  }
  static Predictor load(const fs::path& path) { return from_checkpoint(load_checkpoint(path)); }

  // Forward pass on an already-divisible input; no gradient bookkeeping.
  Tensor4<float> raw_forward(Tensor4<float> image) const {
    Graph<float> g;
    ParamBinder<float> binder(g, params, /*trainable=*/false);
    Node<float>* in = g.input(std::move(image), /*requires_grad=*/false);
    return model_forward(g, in, config, binder)->value;
  }

  // Per-pixel class distribution for one (1, 1, H, W) slice. Sizes that the
  // encoder cannot halve are zero-padded symmetrically and cropped back.
  Tensor4<float> predict_slice(const Tensor4<float>& slice) const {
    require(slice.n() == 1 && slice.c() == 1, Errc::bad_arguments,
            "predict_slice expects a (1, 1, H, W) tensor, got " + slice.shape_str());
    int m = config.pool_factor();
    int H = slice.h(), W = slice.w();
    if (H % m == 0 && W % m == 0) return raw_forward(slice);
    int ph = (H + m - 1) / m * m;
    int pw = (W + m - 1) / m * m;
    int top = (ph - H) / 2, left = (pw - W) / 2;
    Tensor4<float> padded(1, 1, ph, pw, 0.0f);
    for (int y = 0; y < H; ++y)
      std::copy_n(slice.row(0, 0, y), W, padded.row(0, 0, y + top) + left);
    Tensor4<float> full = raw_forward(std::move(padded));
    Tensor4<float> out(1, full.c(), H, W);
    for (int c = 0; c < full.c(); ++c)
      for (int y = 0; y < H; ++y)
        std::copy_n(full.row(0, c, y + top) + left, W, out.row(0, c, y));
    return out;
  }

  // Average-fusion over per-scale predictions. Each scale resizes the slice
  // to the nearest encoder-compatible size, predicts, and resizes the
  // probability map back; the mean map is renormalized per pixel. Scale 1.0
  // contributes predict_slice itself (pad and crop, no resampling), so a
  // singleton {1.0} reduces to the plain slice prediction for every input
  // size. The scale list is canonicalized (sorted, duplicates removed) so
  // fusion is exactly order-invariant and duplicate-insensitive.
  Tensor4<float> multi_scale_predict(const Tensor4<float>& slice,
                                     const std::vector<double>& scales) const {
    require(!scales.empty(), Errc::bad_arguments, "scale set must not be empty");
    for (double s : scales)
      require(s > 0 && std::isfinite(s), Errc::bad_arguments, "scales must be positive");
    std::vector<double> canon = scales;
    std::sort(canon.begin(), canon.end());
    canon.erase(std::unique(canon.begin(), canon.end()), canon.end());

    int m = config.pool_factor();
    int H = slice.h(), W = slice.w();
    auto snap = [m](double v) {
      long long k = std::llround(v / double(m));
      return int(std::max(1ll, k)) * m;
    };
    std::vector<double> acc;
    int nc = 0;
    for (double s : canon) {
      Tensor4<float> back;
      if (s == 1.0) {
        back = predict_slice(slice);
      } else {
        Tensor4<float> scaled =
            bilinear_resize(slice, snap(double(H) * s), snap(double(W) * s));
        Tensor4<float> prob = raw_forward(std::move(scaled));
        back = bilinear_resize(prob, H, W);
      }
      nc = back.c();
      if (acc.empty()) acc.assign(back.count(), 0.0);
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += double(back.raw()[i]);
    }
    double inv_k = 1.0 / double(canon.size());
    Tensor4<float> out(1, nc, H, W);
    std::size_t plane = std::size_t(H) * W;
    for (std::size_t i = 0; i < plane; ++i) {
      double sum = 0.0;
      for (int c = 0; c < nc; ++c) sum += acc[std::size_t(c) * plane + i] * inv_k;
      for (int c = 0; c < nc; ++c)
        out.raw()[std::size_t(c) * plane + i] =
            float(acc[std::size_t(c) * plane + i] * inv_k / sum);
    }
    return out;
  }
};

// 1 where prob[class] strictly exceeds the threshold (ties go to background).
inline std::vector<std::uint8_t> binarize_slice(const Tensor4<float>& probs, int class_index,
                                                double threshold) {
  require(class_index >= 0 && class_index < probs.c(), Errc::bad_arguments,
          "class index " + std::to_string(class_index) + " outside " + probs.shape_str());
  std::size_t plane = std::size_t(probs.h()) * probs.w();
  std::vector<std::uint8_t> out(plane);
  const float* p = probs.plane(0, class_index);
  for (std::size_t i = 0; i < plane; ++i) out[i] = double(p[i]) > threshold ? 1 : 0;
  return out;
}

struct InferOptions {
  std::vector<double> scales = kDefaultScales;
  bool multi_scale = true;
  double threshold = kDefaultThreshold;
  float roi_margin_mm = kDefaultRoiMarginMm;
};

struct PredictOutcome {
  SegmentationMask mask;       // tumor labels over the full volume extent
  bool liver_found = true;     // false: stage 1 saw no liver, mask is all zero
  RoiBox roi;                  // meaningful only when liver_found
};

// Two-stage cascade over a preprocessed volume: a coarse liver segmentation
// bounds the region of interest, then the tumor model runs per cropped slice
// and the result is re-embedded at full extent. Either a liver predictor or a
// precomputed liver mask (e.g. ground truth, for isolating stage 2) drives
// stage 1.
inline PredictOutcome predict_volume(const Predictor& tumor_model, const Predictor* liver_model,
                                     const CtVolume& vol, const InferOptions& opts,
                                     const SegmentationMask* liver_override = nullptr) {
  vol.validate();
  require(liver_model || liver_override, Errc::bad_arguments,
          "cascade needs a liver model or a liver mask");
  Dims3 dims = vol.dims();

  SegmentationMask liver;
  liver.semantics = MaskSemantics::liver_mask;
  if (liver_override) {
    require(liver_override->dims() == dims, Errc::shape_mismatch,
            "liver mask shape " + liver_override->dims().str() + " does not match volume " +
                dims.str());
    liver = *liver_override;
  } else {
    liver.labels = Grid3<std::uint8_t>(dims);
    for (int z = 0; z < dims.z; ++z) {
      Tensor4<float> prob = liver_model->predict_slice(slice_to_tensor(vol.voxels, z));
      auto labels = binarize_slice(prob, 1, 0.5);
      std::copy_n(labels.data(), labels.size(), liver.labels.slice(z));
    }
  }

  PredictOutcome outcome;
  outcome.mask.semantics = MaskSemantics::tumor_mask;
  if (liver.positive_count() == 0) {
    outcome.mask.labels = Grid3<std::uint8_t>(dims);
    outcome.liver_found = false;
    return outcome;
  }

  RoiBox box = liver_roi(liver, opts.roi_margin_mm, vol.spacing);
  Grid3<float> cropped = crop(vol.voxels, box);
  Dims3 sub_dims = cropped.dims();
  Grid3<std::uint8_t> sub(sub_dims);
  for (int z = 0; z < sub_dims.z; ++z) {
    Tensor4<float> slice = slice_to_tensor(cropped, z);
    Tensor4<float> prob = opts.multi_scale ? tumor_model.multi_scale_predict(slice, opts.scales)
                                           : tumor_model.predict_slice(slice);
    auto labels = binarize_slice(prob, 1, opts.threshold);
    std::copy_n(labels.data(), labels.size(), sub.slice(z));
  }
  outcome.mask.labels = embed(sub, box, dims);
  outcome.liver_found = true;
  outcome.roi = box;
  return outcome;
}

}  // namespace sfan
