#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "sfan/errors.hpp"
#include "sfan/grid.hpp"

namespace sfan {

enum class Phase { arterial, venous, unknown };

inline const char* phase_name(Phase p) {
  switch (p) {
    case Phase::arterial: return "arterial";
    case Phase::venous: return "venous";
    case Phase::unknown: return "unknown";
  }
  return "unknown";
}

inline Phase phase_from_name(const std::string& s) {
  if (s == "arterial") return Phase::arterial;
  if (s == "venous") return Phase::venous;
  if (s == "unknown") return Phase::unknown;
  fail(Errc::corrupt_header, "unrecognized phase '" + s + "'");
}

// Millimeters per voxel along the data x, y, z axes. Stored as 32-bit floats
// so values survive a NIfTI pixdim round trip bit-exactly.
struct Spacing {
  float x = 1.0f;
  float y = 1.0f;
  float z = 1.0f;

  bool operator==(const Spacing&) const = default;
  bool valid() const {
    return x > 0 && y > 0 && z > 0 && std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
  float axis(int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  void set_axis(int i, float v) { (i == 0 ? x : (i == 1 ? y : z)) = v; }
};

// Orientation codes name the anatomical direction of increasing index along
// each data axis: code[0] for x (fastest), code[1] for y, code[2] for z.
// Letters R/L, A/P, S/I; each of the three letter pairs appears exactly once,
// giving the 48 signed axis permutations. Canonical storage order is "RAS".
inline constexpr const char* kCanonicalOrientation = "RAS";

// World axis (0 = RL, 1 = AP, 2 = SI) and sign for one code letter.
inline bool orientation_letter(char c, int& world_axis, int& sign) {
  switch (c) {
    case 'R': world_axis = 0; sign = +1; return true;
    case 'L': world_axis = 0; sign = -1; return true;
    case 'A': world_axis = 1; sign = +1; return true;
    case 'P': world_axis = 1; sign = -1; return true;
    case 'S': world_axis = 2; sign = +1; return true;
    case 'I': world_axis = 2; sign = -1; return true;
  }
  return false;
}

inline bool orientation_valid(const std::string& code) {
  if (code.size() != 3) return false;
  bool seen[3] = {false, false, false};
  for (char c : code) {
    int axis = 0, sign = 0;
    if (!orientation_letter(c, axis, sign)) return false;
    if (seen[axis]) return false;
    seen[axis] = true;
  }
  return true;
}

inline char orientation_letter_for(int world_axis, int sign) {
  static constexpr char pos[3] = {'R', 'A', 'S'};
  static constexpr char neg[3] = {'L', 'P', 'I'};
  return sign >= 0 ? pos[world_axis] : neg[world_axis];
}

// 3D voxel grid in Hounsfield Units plus acquisition metadata.
struct CtVolume {
  Grid3<float> voxels;
  Spacing spacing;
  std::string orientation = kCanonicalOrientation;
  Phase phase = Phase::unknown;
  std::string case_id;

  Dims3 dims() const { return voxels.dims(); }

  void validate() const {
    require(!voxels.empty(), Errc::non_3d_data, "volume has no voxels");
    require(spacing.valid(), Errc::bad_spacing,
            "spacing components must be strictly positive and finite");
    require(orientation_valid(orientation), Errc::unknown_orientation,
            "orientation code '" + orientation + "' is not a signed axis permutation");
  }
};

enum class MaskSemantics { tumor_mask, liver_mask };

// Integer label grid aligned to a CtVolume; values are 0 or 1.
struct SegmentationMask {
  Grid3<std::uint8_t> labels;
  MaskSemantics semantics = MaskSemantics::tumor_mask;

  Dims3 dims() const { return labels.dims(); }

  std::int64_t positive_count() const {
    std::int64_t n = 0;
    for (auto v : labels.raw()) n += v;
    return n;
  }

  void validate() const {
    require(!labels.empty(), Errc::non_3d_data, "mask has no voxels");
    for (auto v : labels.raw())
      require(v <= 1, Errc::label_range, "mask label " + std::to_string(int(v)) + " outside {0, 1}");
  }
};

}  // namespace sfan
