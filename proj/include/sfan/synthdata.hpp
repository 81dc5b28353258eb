#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "sfan/dataset.hpp"
#include "sfan/errors.hpp"
#include "sfan/evaluation.hpp"
#include "sfan/rng.hpp"
#include "sfan/volume.hpp"
#include "sfan/volume_io.hpp"

namespace sfan {

constexpr float kDefaultBackgroundHu = -100.0f;
constexpr float kDefaultLiverHu = 100.0f;
constexpr float kDefaultTumorHu = 30.0f;
constexpr float kDefaultNoiseStd = 5.0f;

struct TumorSpec {
  double cz = 0, cy = 0, cx = 0;  // center in voxel coordinates (may be fractional)
  double radius_mm = 1.0;
  float hu = kDefaultTumorHu;
};

struct PhantomSpec {
  Dims3 shape{16, 48, 48};
  Spacing spacing{1.0f, 1.0f, 1.25f};
  double liver_cz = 7.5, liver_cy = 23.5, liver_cx = 23.5;   // ellipsoid center, voxels
  double liver_az = 6.0, liver_ay = 19.0, liver_ax = 19.0;   // semi-axes, voxels
  std::vector<TumorSpec> tumors;
  float background_hu = kDefaultBackgroundHu;
  float liver_hu = kDefaultLiverHu;
  float noise_std = kDefaultNoiseStd;
  std::uint64_t seed = 0;
  Phase phase = Phase::unknown;
  std::string case_id = "phantom";
};

struct Phantom {
  CtVolume volume;
  SegmentationMask tumor;
  SegmentationMask liver;
};

// Voxel membership is evaluated at voxel centers: the liver is an ellipsoid
// in voxel coordinates, tumors are spheres in physical millimeters. Masks are
// noise-free; Gaussian noise (if any) perturbs only the volume, added in
// z, y, x order from the spec seed.
inline Phantom generate_phantom(const PhantomSpec& spec) {
  require(spec.spacing.valid(), Errc::bad_spacing, "phantom spacing must be positive");
  require(spec.liver_az > 0 && spec.liver_ay > 0 && spec.liver_ax > 0, Errc::bad_arguments,
          "liver semi-axes must be positive");
  require(spec.noise_std >= 0, Errc::bad_arguments, "noise level must be non-negative");
  for (const auto& t : spec.tumors)
    require(t.radius_mm > 0, Errc::bad_arguments, "tumor radius must be positive");

  Phantom out;
  out.liver.semantics = MaskSemantics::liver_mask;
  out.tumor.semantics = MaskSemantics::tumor_mask;
  out.liver.labels = Grid3<std::uint8_t>(spec.shape);
  out.tumor.labels = Grid3<std::uint8_t>(spec.shape);
  out.volume.voxels = Grid3<float>(spec.shape);
  out.volume.spacing = spec.spacing;
  out.volume.orientation = kCanonicalOrientation;
  out.volume.phase = spec.phase;
  out.volume.case_id = spec.case_id;

  double sx = spec.spacing.x, sy = spec.spacing.y, sz = spec.spacing.z;
  for (int z = 0; z < spec.shape.z; ++z)
    for (int y = 0; y < spec.shape.y; ++y)
      for (int x = 0; x < spec.shape.x; ++x) {
        double ez = (z - spec.liver_cz) / spec.liver_az;
        double ey = (y - spec.liver_cy) / spec.liver_ay;
        double ex = (x - spec.liver_cx) / spec.liver_ax;
        bool in_liver = ez * ez + ey * ey + ex * ex <= 1.0;
        float value = spec.background_hu;
        if (in_liver) {
          out.liver.labels.at(z, y, x) = 1;
          value = spec.liver_hu;
        }
        for (const auto& t : spec.tumors) {
          double dz = (z - t.cz) * sz, dy = (y - t.cy) * sy, dx = (x - t.cx) * sx;
          if (dz * dz + dy * dy + dx * dx <= t.radius_mm * t.radius_mm) {
            require(in_liver, Errc::bad_arguments,
                    "tumor at radius " + std::to_string(t.radius_mm) +
                        " mm extends outside the liver ellipsoid");
            out.tumor.labels.at(z, y, x) = 1;
            value = t.hu;
          }
        }
        out.volume.voxels.at(z, y, x) = value;
      }

  if (spec.noise_std > 0) {
    Rng rng(spec.seed);
    for (auto& v : out.volume.voxels.raw())
      v = float(double(v) + double(spec.noise_std) * rng.normal());
  }
  return out;
}

// ---- suites ---------------------------------------------------------------

struct SizeMix {
  int small = 1;
  int middle = 1;
  int large = 1;
};

// Tumor radii that land each size group comfortably inside its bounds for
// the default suite spacing, including sub-voxel center jitter.
constexpr double kSmallTumorRadiusMm = 1.4;
constexpr double kMiddleTumorRadiusMm = 3.2;
constexpr double kLargeTumorRadiusMm = 5.7;

// Lesion sites per size group. All cases of a group share one standardized
// set of candidate sites, and each case activates a random subset of them,
// so multifocal disease is the common presentation. Standardized sites keep
// the corpus anatomy comparable across cases — the way physical QA phantoms
// standardize insert positions — while the varying active subset guarantees
// that only the image content at a site, never the site position alone, can
// tell an active lesion from plain liver. Fewer large sites fit at the
// required spacing than small ones.
struct SiteCounts {
  int candidates = 0;
  int active = 0;
};
inline SiteCounts lesion_sites(SizeGroup g) {
  switch (g) {
    case SizeGroup::small: return {12, 6};
    case SizeGroup::middle: return {7, 4};
    default: return {3, 2};
  }
}

// Writes n_cases phantom volumes and masks plus manifest.json into out_dir.
// Cases cycle through the size-mix expansion, phases alternate starting with
// arterial, and every case derives its own seed from base_seed.
inline std::vector<CaseEntry> generate_suite(const fs::path& out_dir, int n_cases,
                                             std::uint64_t base_seed, const SizeMix& mix) {
  require(n_cases >= 1, Errc::bad_arguments, "suite needs at least one case");
  require(mix.small >= 0 && mix.middle >= 0 && mix.large >= 0 &&
              mix.small + mix.middle + mix.large >= 1,
          Errc::bad_arguments, "size mix must include at least one group");
  std::vector<SizeGroup> pattern;
  for (int i = 0; i < mix.small; ++i) pattern.push_back(SizeGroup::small);
  for (int i = 0; i < mix.middle; ++i) pattern.push_back(SizeGroup::middle);
  for (int i = 0; i < mix.large; ++i) pattern.push_back(SizeGroup::large);

  fs::create_directories(out_dir);

  // Standardized liver shared by every case in the suite: one geometry keeps
  // the site layout meaningful across cases and makes liver crops align.
  PhantomSpec proto;
  proto.liver_cz = (proto.shape.z - 1) / 2.0;
  proto.liver_cy = (proto.shape.y - 1) / 2.0;
  proto.liver_cx = (proto.shape.x - 1) / 2.0;
  proto.liver_az = 7.0;
  proto.liver_ay = 19.0;
  proto.liver_ax = 19.0;

  // A site is kept only when every voxel of the lesion sphere lands inside
  // the liver ellipsoid (the same membership tests the voxel generator
  // applies) and the center stays far enough from every other site of the
  // group that connected components can never merge and change the measured
  // size, whichever subset of sites a case activates.
  auto fits_inside = [&](const TumorSpec& t) {
    double r = t.radius_mm;
    int z0 = std::max(0, int(std::ceil(t.cz - r / proto.spacing.z)));
    int z1 = std::min(proto.shape.z - 1, int(std::floor(t.cz + r / proto.spacing.z)));
    int y0 = std::max(0, int(std::ceil(t.cy - r / proto.spacing.y)));
    int y1 = std::min(proto.shape.y - 1, int(std::floor(t.cy + r / proto.spacing.y)));
    int x0 = std::max(0, int(std::ceil(t.cx - r / proto.spacing.x)));
    int x1 = std::min(proto.shape.x - 1, int(std::floor(t.cx + r / proto.spacing.x)));
    for (int z = z0; z <= z1; ++z)
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          double dz = (z - t.cz) * proto.spacing.z;
          double dy = (y - t.cy) * proto.spacing.y;
          double dx = (x - t.cx) * proto.spacing.x;
          if (dz * dz + dy * dy + dx * dx > r * r) continue;
          double ez = (z - proto.liver_cz) / proto.liver_az;
          double ey = (y - proto.liver_cy) / proto.liver_ay;
          double ex = (x - proto.liver_cx) / proto.liver_ax;
          if (ez * ez + ey * ey + ex * ex > 1.0) return false;
        }
    return true;
  };
  auto far_from_all = [&](const std::vector<TumorSpec>& placed, const TumorSpec& t) {
    for (const auto& o : placed) {
      double dz = (t.cz - o.cz) * proto.spacing.z;
      double dy = (t.cy - o.cy) * proto.spacing.y;
      double dx = (t.cx - o.cx) * proto.spacing.x;
      double need = t.radius_mm + o.radius_mm + 4.0;
      if (dz * dz + dy * dy + dx * dx < need * need) return false;
    }
    return true;
  };

  // Lay out the candidate sites once per suite, for each size group the mix
  // asks for. Wide lesions leave little slack along the short liver axis, so
  // axial proposals stay inside the band that can actually contain the
  // sphere. When an early site happens to land where no sufficiently distant
  // spot remains for a later one, the whole layout is re-drawn.
  Rng site_rng(derive_seed(base_seed, 0x517e5ull));
  auto site_uniform = [&](double lo, double hi) { return lo + (hi - lo) * site_rng.uniform(); };
  std::array<std::vector<TumorSpec>, 4> site_sets;  // indexed by SizeGroup
  for (SizeGroup group : {SizeGroup::small, SizeGroup::middle, SizeGroup::large}) {
    if (std::find(pattern.begin(), pattern.end(), group) == pattern.end()) continue;
    TumorSpec tumor;
    tumor.radius_mm = group == SizeGroup::small   ? kSmallTumorRadiusMm
                      : group == SizeGroup::middle ? kMiddleTumorRadiusMm
                                                   : kLargeTumorRadiusMm;
    SiteCounts counts = lesion_sites(group);
    double z_band = std::clamp(proto.liver_az - tumor.radius_mm / proto.spacing.z - 0.2, 0.3, 2.0);
    auto& sites = site_sets[std::size_t(group)];
    bool laid_out = false;
    for (int restart = 0; restart < 400 && !laid_out; ++restart) {
      sites.clear();
      laid_out = true;
      for (int s = 0; s < counts.candidates && laid_out; ++s) {
        bool ok = false;
        for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
          tumor.cz = proto.liver_cz + site_uniform(-z_band, z_band);
          tumor.cy = proto.liver_cy + site_uniform(-13.0, 13.0);
          tumor.cx = proto.liver_cx + site_uniform(-13.0, 13.0);
          ok = fits_inside(tumor) && far_from_all(sites, tumor);
        }
        if (ok)
          sites.push_back(tumor);
        else
          laid_out = false;
      }
    }
    require(laid_out, Errc::bad_arguments,
            "could not lay out " + std::to_string(counts.candidates) + " separated " +
                std::to_string(tumor.radius_mm) + " mm lesion sites inside the liver");
  }

  std::vector<CaseEntry> entries;
  for (int i = 0; i < n_cases; ++i) {
    std::uint64_t case_seed = derive_seed(base_seed, std::uint64_t(i));
    Rng picker(case_seed);
    PhantomSpec spec = proto;
    char name[32];
    std::snprintf(name, sizeof(name), "case_%03d", i);
    spec.case_id = name;
    spec.phase = i % 2 == 0 ? Phase::arterial : Phase::venous;
    spec.seed = derive_seed(case_seed, 1);

    // Activate a per-case subset of the group's sites (partial Fisher-Yates
    // draw without replacement).
    SizeGroup group = pattern[std::size_t(i) % pattern.size()];
    const auto& sites = site_sets[std::size_t(group)];
    SiteCounts counts = lesion_sites(group);
    std::vector<std::size_t> order(sites.size());
    std::iota(order.begin(), order.end(), std::size_t(0));
    for (int k = 0; k < counts.active; ++k) {
      std::size_t j = std::size_t(k) + std::size_t(picker.uniform_index(order.size() - std::size_t(k)));
      std::swap(order[std::size_t(k)], order[j]);
      spec.tumors.push_back(sites[order[std::size_t(k)]]);
    }
    Phantom phantom = generate_phantom(spec);
    double measured = tumor_size_mm(phantom.tumor, spec.spacing);
    require(size_group(measured) == group, Errc::bad_arguments,
            "suite geometry produced a " + std::string(size_group_name(size_group(measured))) +
                " tumor where " + size_group_name(group) + " was requested");

    CaseEntry entry;
    entry.case_id = spec.case_id;
    entry.phase = spec.phase;
    entry.volume_path = out_dir / (spec.case_id + ".json");
    entry.tumor_mask_path = out_dir / (spec.case_id + "_tumor.json");
    entry.liver_mask_path = out_dir / (spec.case_id + "_liver.json");
    save_volume(phantom.volume, entry.volume_path);
    VolumeMeta meta = meta_of(phantom.volume);
    save_mask(phantom.tumor, entry.tumor_mask_path, &meta);
    save_mask(phantom.liver, entry.liver_mask_path, &meta);
    entries.push_back(std::move(entry));
  }
  save_manifest(entries, out_dir / "manifest.json");
  return entries;
}

}  // namespace sfan
