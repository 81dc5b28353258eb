#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <string>
#include <vector>

#include "sfan/preprocess.hpp"

using namespace sfan;

namespace {

// All 48 valid three-letter orientation codes: each data axis picks a distinct
// world axis and a direction.
std::vector<std::string> all_orientation_codes() {
  const char* letters[3][2] = {{"R", "L"}, {"A", "P"}, {"S", "I"}};
  int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  std::vector<std::string> codes;
  for (auto& p : perms)
    for (int s0 = 0; s0 < 2; ++s0)
      for (int s1 = 0; s1 < 2; ++s1)
        for (int s2 = 0; s2 < 2; ++s2) {
          std::string c;
          c += letters[p[0]][s0];
          c += letters[p[1]][s1];
          c += letters[p[2]][s2];
          codes.push_back(c);
        }
  return codes;
}

// Independent scrambler: given a canonical volume, lay its voxels out as a
// volume whose data axes follow `code`, by direct coordinate arithmetic.
CtVolume scramble_to(const CtVolume& canonical, const std::string& code, const Spacing& sp) {
  int ce[3] = {canonical.dims().x, canonical.dims().y, canonical.dims().z};
  int world[3], sign[3];
  for (int i = 0; i < 3; ++i) orientation_letter(code[std::size_t(i)], world[i], sign[i]);

  int se[3];
  for (int i = 0; i < 3; ++i) se[i] = ce[world[i]];

  CtVolume out;
  out.voxels = Grid3<float>(Dims3{se[2], se[1], se[0]});
  out.spacing = sp;
  out.orientation = code;
  out.phase = canonical.phase;
  out.case_id = canonical.case_id;
  for (int sz = 0; sz < se[2]; ++sz)
    for (int sy = 0; sy < se[1]; ++sy)
      for (int sx = 0; sx < se[0]; ++sx) {
        int s_idx[3] = {sx, sy, sz};
        int c_idx[3];
        for (int i = 0; i < 3; ++i)
          c_idx[world[i]] = sign[i] > 0 ? s_idx[i] : se[i] - 1 - s_idx[i];
        out.voxels.at(sz, sy, sx) = canonical.voxels.at(c_idx[2], c_idx[1], c_idx[0]);
      }
  return out;
}

CtVolume coordinate_tagged_volume(Dims3 d) {
  CtVolume vol;
  vol.voxels = Grid3<float>(d);
  for (int z = 0; z < d.z; ++z)
    for (int y = 0; y < d.y; ++y)
      for (int x = 0; x < d.x; ++x) vol.voxels.at(z, y, x) = float(10000 * z + 100 * y + x);
  vol.spacing = Spacing{0.9f, 1.1f, 3.0f};
  vol.orientation = kCanonicalOrientation;
  vol.phase = Phase::venous;
  vol.case_id = "tagged";
  return vol;
}

}  // namespace

TEST_CASE("canonicalization recovers the reference layout from every orientation") {
  CtVolume canonical = coordinate_tagged_volume({3, 4, 5});
  Spacing scr_sp{0.5f, 1.25f, 2.0f};

  for (const auto& code : all_orientation_codes()) {
    INFO("orientation " << code);
    CtVolume scrambled = scramble_to(canonical, code, scr_sp);
    auto [normalized, no_mask] = normalize_orientation(scrambled);
    CHECK(!no_mask.has_value());
    CHECK(normalized.orientation == kCanonicalOrientation);
    REQUIRE(normalized.dims() == canonical.dims());
    CHECK(normalized.voxels == canonical.voxels);

    // Spacing rides along with its axis.
    int world = 0, sign = 0;
    for (int i = 0; i < 3; ++i) {
      orientation_letter(code[std::size_t(i)], world, sign);
      CHECK(normalized.spacing.axis(world) == scr_sp.axis(i));
    }
    CHECK(normalized.phase == canonical.phase);
    CHECK(normalized.case_id == canonical.case_id);
  }
}

TEST_CASE("canonicalization of an already canonical volume is the identity") {
  CtVolume vol = coordinate_tagged_volume({2, 3, 4});
  auto [once, m1] = normalize_orientation(vol);
  CHECK(once.voxels == vol.voxels);
  CHECK(once.spacing == vol.spacing);
  auto [twice, m2] = normalize_orientation(once);
  CHECK(twice.voxels == once.voxels);
  CHECK(twice.spacing == once.spacing);
}

TEST_CASE("masks are scrambled and recovered alongside the volume") {
  CtVolume canonical = coordinate_tagged_volume({3, 4, 5});
  SegmentationMask mask;
  mask.labels = Grid3<std::uint8_t>(canonical.dims());
  mask.labels.at(1, 2, 3) = 1;
  mask.labels.at(0, 0, 0) = 1;
  mask.labels.at(2, 3, 4) = 1;
  mask.semantics = MaskSemantics::liver_mask;

  for (const std::string code : {"LPI", "SRA", "PIL"}) {
    CtVolume scr_vol = scramble_to(canonical, code, canonical.spacing);
    // Scramble the mask with the same independent arithmetic via a float carrier.
    CtVolume carrier = canonical;
    for (std::size_t i = 0; i < carrier.voxels.raw().size(); ++i)
      carrier.voxels.raw()[i] = float(mask.labels.raw()[i]);
    CtVolume scr_carrier = scramble_to(carrier, code, canonical.spacing);
    SegmentationMask scr_mask;
    scr_mask.labels = Grid3<std::uint8_t>(scr_carrier.dims());
    scr_mask.semantics = MaskSemantics::liver_mask;
    for (std::size_t i = 0; i < scr_mask.labels.raw().size(); ++i)
      scr_mask.labels.raw()[i] = std::uint8_t(scr_carrier.voxels.raw()[i]);

    auto [nv, nm] = normalize_orientation(scr_vol, scr_mask);
    REQUIRE(nm.has_value());
    CHECK(nm->labels == mask.labels);
    CHECK(nm->semantics == MaskSemantics::liver_mask);
    CHECK(nv.voxels == canonical.voxels);
  }
}

TEST_CASE("mask and volume shapes must agree for joint canonicalization") {
  CtVolume vol = coordinate_tagged_volume({2, 3, 4});
  SegmentationMask mask;
  mask.labels = Grid3<std::uint8_t>(Dims3{2, 3, 5});
  try {
    normalize_orientation(vol, mask);
    FAIL("expected shape_mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::shape_mismatch);
  }
}

TEST_CASE("intensity clipping pins values to the window") {
  CtVolume vol;
  vol.voxels = Grid3<float>(Dims3{1, 1, 7},
                            std::vector<float>{-1000.0f, -200.0f, -75.0f, 0.0f, 175.0f, 300.0f, 2000.0f});
  vol.spacing = Spacing{1, 1, 1};
  vol.orientation = "RAS";

  CtVolume clipped = clip_hu(vol, -75.0f, 175.0f);
  const float* v = clipped.voxels.data();
  CHECK(v[0] == -75.0f);
  CHECK(v[1] == -75.0f);   // -200 pins to the lower bound
  CHECK(v[2] == -75.0f);
  CHECK(v[3] == 0.0f);
  CHECK(v[4] == 175.0f);
  CHECK(v[5] == 175.0f);   // 300 pins to the upper bound
  CHECK(v[6] == 175.0f);

  CtVolume again = clip_hu(clipped, -75.0f, 175.0f);
  CHECK(again.voxels == clipped.voxels);  // idempotent

  try {
    clip_hu(vol, 175.0f, -75.0f);
    FAIL("expected bad_arguments");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::bad_arguments);
  }
}

TEST_CASE("intensity rescale maps the window onto the unit interval") {
  CtVolume vol;
  vol.voxels = Grid3<float>(Dims3{1, 1, 5},
                            std::vector<float>{-75.0f, 175.0f, 50.0f, 0.0f, -12.5f});
  vol.spacing = Spacing{1, 1, 1};
  vol.orientation = "RAS";

  CtVolume scaled = rescale_intensity(vol, -75.0f, 175.0f);
  const float* v = scaled.voxels.data();
  CHECK(v[0] == 0.0f);
  CHECK(v[1] == 1.0f);
  CHECK(v[2] == 0.5f);         // midpoint of [-75, 175]
  CHECK(v[3] == 0.3f);         // (0+75)/250
  CHECK(v[4] == 0.25f);        // (-12.5+75)/250

  // A rescaled volume run through a unit window comes back unchanged.
  CtVolume again = rescale_intensity(clip_hu(scaled, 0.0f, 1.0f), 0.0f, 1.0f);
  CHECK(again.voxels == scaled.voxels);
}

TEST_CASE("liver region box hugs positives and grows by the metric margin") {
  SegmentationMask mask;
  mask.labels = Grid3<std::uint8_t>(Dims3{10, 12, 14});
  for (int z = 4; z <= 6; ++z)
    for (int y = 5; y <= 8; ++y)
      for (int x = 6; x <= 9; ++x) mask.labels.at(z, y, x) = 1;

  Spacing sp{1.0f, 2.0f, 2.5f};  // x=1mm, y=2mm, z=2.5mm

  SECTION("zero margin is the tight bounding box") {
    RoiBox box = liver_roi(mask, 0.0f, sp);
    CHECK(box == RoiBox{4, 7, 5, 9, 6, 10});
  }

  SECTION("margin converts to voxels per axis by rounding up") {
    RoiBox box = liver_roi(mask, 5.0f, sp);
    // z: ceil(5/2.5)=2, y: ceil(5/2)=3, x: ceil(5/1)=5
    CHECK(box == RoiBox{2, 9, 2, 12, 1, 14 /* 9+1+5 clamped to 14 */});
  }

  SECTION("large margins clamp to the volume bounds") {
    RoiBox box = liver_roi(mask, 1000.0f, sp);
    CHECK(box == RoiBox{0, 10, 0, 12, 0, 14});
  }

  SECTION("empty mask is reported, not silently boxed") {
    SegmentationMask empty;
    empty.labels = Grid3<std::uint8_t>(Dims3{4, 4, 4});
    try {
      liver_roi(empty, 5.0f, sp);
      FAIL("expected empty_input");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::empty_input);
    }
  }

  SECTION("negative margin is rejected") {
    try {
      liver_roi(mask, -1.0f, sp);
      FAIL("expected bad_arguments");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::bad_arguments);
    }
  }
}

TEST_CASE("crop and embed are inverse over the box") {
  CtVolume vol = coordinate_tagged_volume({6, 7, 8});
  RoiBox box{1, 4, 2, 6, 3, 7};

  Grid3<float> sub = crop(vol.voxels, box);
  REQUIRE(sub.dims() == Dims3{3, 4, 4});
  for (int z = 0; z < 3; ++z)
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x)
        CHECK(sub.at(z, y, x) == vol.voxels.at(z + 1, y + 2, x + 3));

  Grid3<float> full = embed(sub, box, vol.dims());
  for (int z = 0; z < 6; ++z)
    for (int y = 0; y < 7; ++y)
      for (int x = 0; x < 8; ++x) {
        bool inside = z >= 1 && z < 4 && y >= 2 && y < 6 && x >= 3 && x < 7;
        CHECK(full.at(z, y, x) == (inside ? vol.voxels.at(z, y, x) : 0.0f));
      }

  SECTION("embed rejects a sub-grid that does not fill the box") {
    Grid3<float> wrong(Dims3{2, 4, 4});
    try {
      embed(wrong, box, vol.dims());
      FAIL("expected shape_mismatch");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::shape_mismatch);
    }
  }

  SECTION("boxes outside the grid are rejected") {
    RoiBox outside{0, 7, 0, 7, 0, 8};
    try {
      crop(vol.voxels, outside);
      FAIL("expected bad_arguments");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::bad_arguments);
    }
  }
}
