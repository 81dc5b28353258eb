#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>

#include "sfan/errors.hpp"
#include "sfan/volume.hpp"

namespace sfan {

// Default CT intensity window in Hounsfield units.
constexpr float kDefaultWindowLo = -75.0f;
constexpr float kDefaultWindowHi = 175.0f;
constexpr float kDefaultRoiMarginMm = 10.0f;

// Half-open voxel index intervals on each axis.
struct RoiBox {
  int z0 = 0, z1 = 0, y0 = 0, y1 = 0, x0 = 0, x1 = 0;

  Dims3 extents() const { return Dims3{z1 - z0, y1 - y0, x1 - x0}; }

  void validate_within(Dims3 dims) const {
    bool ok = 0 <= z0 && z0 < z1 && z1 <= dims.z && 0 <= y0 && y0 < y1 && y1 <= dims.y &&
              0 <= x0 && x0 < x1 && x1 <= dims.x;
    require(ok, Errc::bad_arguments, "roi box out of bounds for volume " + dims.str());
  }

  bool operator==(const RoiBox&) const = default;
};

// ---- orientation canonicalization -----------------------------------------

namespace detail {

// For source data axis i: dst_axis[i] = canonical data axis it lands on,
// flip[i] = whether the index runs backwards.
struct AxisMap {
  int dst_axis[3];
  bool flip[3];
};

inline AxisMap axis_map_to_canonical(const std::string& code) {
  if (!orientation_valid(code))
    fail(Errc::unknown_orientation, "orientation code '" + code + "'");
  AxisMap m{};
  for (int i = 0; i < 3; ++i) {
    int world = 0, sign = 0;
    orientation_letter(code[std::size_t(i)], world, sign);
    m.dst_axis[i] = world;  // canonical stores world axis w along data axis w
    m.flip[i] = sign < 0;
  }
  return m;
}

template <typename T>
Grid3<T> reorient_grid(const Grid3<T>& src, const AxisMap& m) {
  // Extents indexed by data axis (0 = x fastest, 1 = y, 2 = z).
  int se[3] = {src.dims().x, src.dims().y, src.dims().z};
  int de[3];
  for (int i = 0; i < 3; ++i) de[m.dst_axis[i]] = se[i];
  Grid3<T> dst(Dims3{de[2], de[1], de[0]});
  for (int zo = 0; zo < de[2]; ++zo)
    for (int yo = 0; yo < de[1]; ++yo)
      for (int xo = 0; xo < de[0]; ++xo) {
        int out_idx[3] = {xo, yo, zo};
        int src_idx[3];
        for (int i = 0; i < 3; ++i) {
          int along = out_idx[m.dst_axis[i]];
          src_idx[i] = m.flip[i] ? se[i] - 1 - along : along;
        }
        dst.at(zo, yo, xo) = src.at(src_idx[2], src_idx[1], src_idx[0]);
      }
  return dst;
}

}  // namespace detail

inline std::pair<CtVolume, std::optional<SegmentationMask>> normalize_orientation(
    const CtVolume& vol, const std::optional<SegmentationMask>& mask = std::nullopt) {
  if (mask) {
    require(mask->dims() == vol.dims(), Errc::shape_mismatch,
            "mask shape " + mask->dims().str() + " differs from volume " + vol.dims().str());
  }
  auto m = detail::axis_map_to_canonical(vol.orientation);
  CtVolume out;
  out.voxels = detail::reorient_grid(vol.voxels, m);
  for (int i = 0; i < 3; ++i) out.spacing.set_axis(m.dst_axis[i], vol.spacing.axis(i));
  out.orientation = kCanonicalOrientation;
  out.phase = vol.phase;
  out.case_id = vol.case_id;
  std::optional<SegmentationMask> out_mask;
  if (mask) {
    out_mask = SegmentationMask{detail::reorient_grid(mask->labels, m), mask->semantics};
  }
  return {std::move(out), std::move(out_mask)};
}

// ---- intensity ------------------------------------------------------------

inline CtVolume clip_hu(const CtVolume& vol, float lo = kDefaultWindowLo,
                        float hi = kDefaultWindowHi) {
  require(lo < hi, Errc::bad_arguments, "clip window requires lo < hi");
  CtVolume out = vol;
  for (auto& v : out.voxels.raw()) v = std::min(hi, std::max(lo, v));
  return out;
}

inline CtVolume rescale_intensity(const CtVolume& vol, float lo = kDefaultWindowLo,
                                  float hi = kDefaultWindowHi) {
  require(lo < hi, Errc::bad_arguments, "intensity range requires lo < hi");
  CtVolume out = vol;
  float inv = 1.0f / (hi - lo);
  for (auto& v : out.voxels.raw()) v = (v - lo) * inv;
  return out;
}

// ---- region of interest ---------------------------------------------------

inline RoiBox liver_roi(const SegmentationMask& liver_mask, float margin_mm,
                        const Spacing& spacing) {
  require(spacing.valid(), Errc::bad_spacing, "non-positive spacing");
  require(margin_mm >= 0.0f, Errc::bad_arguments, "negative roi margin");
  Dims3 d = liver_mask.dims();
  int zmin = d.z, zmax = -1, ymin = d.y, ymax = -1, xmin = d.x, xmax = -1;
  for (int z = 0; z < d.z; ++z)
    for (int y = 0; y < d.y; ++y)
      for (int x = 0; x < d.x; ++x)
        if (liver_mask.labels.at(z, y, x)) {
          zmin = std::min(zmin, z);
          zmax = std::max(zmax, z);
          ymin = std::min(ymin, y);
          ymax = std::max(ymax, y);
          xmin = std::min(xmin, x);
          xmax = std::max(xmax, x);
        }
  require(zmax >= 0, Errc::empty_input, "liver mask has no positive voxels");
  int mz = int(std::ceil(margin_mm / spacing.z));
  int my = int(std::ceil(margin_mm / spacing.y));
  int mx = int(std::ceil(margin_mm / spacing.x));
  RoiBox box{std::max(0, zmin - mz), std::min(d.z, zmax + 1 + mz),
             std::max(0, ymin - my), std::min(d.y, ymax + 1 + my),
             std::max(0, xmin - mx), std::min(d.x, xmax + 1 + mx)};
  box.validate_within(d);
  return box;
}

template <typename T>
Grid3<T> crop(const Grid3<T>& grid, const RoiBox& box) {
  box.validate_within(grid.dims());
  Grid3<T> out(box.extents());
  for (int z = box.z0; z < box.z1; ++z)
    for (int y = box.y0; y < box.y1; ++y)
      for (int x = box.x0; x < box.x1; ++x)
        out.at(z - box.z0, y - box.y0, x - box.x0) = grid.at(z, y, x);
  return out;
}

template <typename T>
Grid3<T> embed(const Grid3<T>& sub, const RoiBox& box, Dims3 full_shape) {
  box.validate_within(full_shape);
  require(sub.dims() == box.extents(), Errc::shape_mismatch,
          "sub-grid " + sub.dims().str() + " does not fill box " + box.extents().str());
  Grid3<T> out(full_shape, T{});
  for (int z = box.z0; z < box.z1; ++z)
    for (int y = box.y0; y < box.y1; ++y)
      for (int x = box.x0; x < box.x1; ++x)
        out.at(z, y, x) = sub.at(z - box.z0, y - box.y0, x - box.x0);
  return out;
}

inline CtVolume crop_volume(const CtVolume& vol, const RoiBox& box) {
  CtVolume out = vol;
  out.voxels = crop(vol.voxels, box);
  return out;
}

inline SegmentationMask crop_mask(const SegmentationMask& mask, const RoiBox& box) {
  return SegmentationMask{crop(mask.labels, box), mask.semantics};
}

}  // namespace sfan
