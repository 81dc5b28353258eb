#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <vector>

#include "sfan/evaluation.hpp"
#include "sfan/rng.hpp"

using namespace sfan;

namespace {

SegmentationMask mask_of(Dims3 d, const std::vector<Dims3>& voxels) {
  SegmentationMask m;
  m.semantics = MaskSemantics::tumor_mask;
  m.labels = Grid3<std::uint8_t>(d);
  for (const auto& v : voxels) m.labels.at(v.z, v.y, v.x) = 1;
  return m;
}

SegmentationMask random_mask(Dims3 d, double density, Rng& rng) {
  SegmentationMask m;
  m.semantics = MaskSemantics::tumor_mask;
  m.labels = Grid3<std::uint8_t>(d);
  for (auto& v : m.labels.raw()) v = rng.uniform() < density ? 1 : 0;
  return m;
}

// Reference overlap score built from explicit index sets rather than a fused
// counting pass.
double dice_via_sets(const SegmentationMask& pred, const SegmentationMask& gt) {
  std::vector<std::size_t> p_set, g_set;
  const auto& pv = pred.labels.raw();
  const auto& gv = gt.labels.raw();
  for (std::size_t i = 0; i < pv.size(); ++i) {
    if (pv[i]) p_set.push_back(i);
    if (gv[i]) g_set.push_back(i);
  }
  std::vector<std::size_t> inter;
  std::set_intersection(p_set.begin(), p_set.end(), g_set.begin(), g_set.end(),
                        std::back_inserter(inter));
  if (p_set.empty() && g_set.empty()) return 1.0;
  return 2.0 * double(inter.size()) / double(p_set.size() + g_set.size());
}

// Reference component labelling: propagate the minimum flat index through the
// 26-neighborhood until nothing changes, then measure each component's
// bounding extent. Deliberately a different algorithm from the production
// depth-first flood.
double size_via_fixpoint(const SegmentationMask& mask, const Spacing& spacing) {
  Dims3 d = mask.dims();
  const auto& labels = mask.labels.raw();
  std::vector<std::int64_t> comp(labels.size(), -1);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i]) comp[i] = std::int64_t(i);

  bool changed = true;
  while (changed) {
    changed = false;
    for (int z = 0; z < d.z; ++z)
      for (int y = 0; y < d.y; ++y)
        for (int x = 0; x < d.x; ++x) {
          std::size_t i = (std::size_t(z) * d.y + y) * d.x + x;
          if (comp[i] < 0) continue;
          for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
              for (int dx = -1; dx <= 1; ++dx) {
                int nz = z + dz, ny = y + dy, nx = x + dx;
                if (nz < 0 || nz >= d.z || ny < 0 || ny >= d.y || nx < 0 || nx >= d.x)
                  continue;
                std::size_t j = (std::size_t(nz) * d.y + ny) * d.x + nx;
                if (comp[j] >= 0 && comp[j] < comp[i]) {
                  comp[i] = comp[j];
                  changed = true;
                }
              }
        }
  }

  std::map<std::int64_t, std::array<int, 6>> boxes;  // zmin zmax ymin ymax xmin xmax
  for (int z = 0; z < d.z; ++z)
    for (int y = 0; y < d.y; ++y)
      for (int x = 0; x < d.x; ++x) {
        std::size_t i = (std::size_t(z) * d.y + y) * d.x + x;
        if (comp[i] < 0) continue;
        auto it = boxes.find(comp[i]);
        if (it == boxes.end()) {
          boxes[comp[i]] = {z, z, y, y, x, x};
        } else {
          auto& b = it->second;
          b[0] = std::min(b[0], z);
          b[1] = std::max(b[1], z);
          b[2] = std::min(b[2], y);
          b[3] = std::max(b[3], y);
          b[4] = std::min(b[4], x);
          b[5] = std::max(b[5], x);
        }
      }
  double best = 0.0;
  for (const auto& [id, b] : boxes) {
    best = std::max(best, double(b[1] - b[0] + 1) * spacing.z);
    best = std::max(best, double(b[3] - b[2] + 1) * spacing.y);
    best = std::max(best, double(b[5] - b[4] + 1) * spacing.x);
  }
  return best;
}

}  // namespace

TEST_CASE("overlap score agrees with the set-based reference on random masks") {
  Dims3 d{8, 8, 8};
  Rng rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    double density = 0.05 + 0.5 * rng.uniform();
    SegmentationMask pred = random_mask(d, density, rng);
    SegmentationMask gt = random_mask(d, density, rng);
    double got = dice_per_case(pred, gt);
    double want = dice_via_sets(pred, gt);
    CHECK(got == want);  // both are exact ratios of integers
  }
}

TEST_CASE("overlap score conventions for empty masks") {
  Dims3 d{4, 4, 4};
  SegmentationMask empty = mask_of(d, {});
  SegmentationMask some = mask_of(d, {{1, 1, 1}, {1, 1, 2}});

  CHECK(dice_per_case(empty, empty) == 1.0);
  CHECK(dice_per_case(some, empty) == 0.0);
  CHECK(dice_per_case(empty, some) == 0.0);
  CHECK(dice_per_case(some, some) == 1.0);
}

TEST_CASE("overlap score on a hand-counted pair") {
  Dims3 d{3, 3, 3};
  SegmentationMask pred = mask_of(d, {{0, 0, 0}, {1, 1, 1}, {2, 2, 2}});
  SegmentationMask gt = mask_of(d, {{1, 1, 1}, {2, 2, 2}, {0, 1, 0}, {0, 2, 0}});
  // Overlap 2, sizes 3 and 4.
  CHECK(dice_per_case(pred, gt) == 2.0 * 2 / 7);
}

TEST_CASE("overlap score rejects mismatched shapes") {
  SegmentationMask a = mask_of(Dims3{2, 2, 2}, {});
  SegmentationMask b = mask_of(Dims3{2, 2, 3}, {});
  try {
    dice_per_case(a, b);
    FAIL("expected shape_mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::shape_mismatch);
  }
}

TEST_CASE("lesion extent on hand-built shapes") {
  Dims3 d{6, 6, 6};
  Spacing iso{1.0f, 1.0f, 1.0f};

  SECTION("empty mask has zero extent") {
    CHECK(tumor_size_mm(mask_of(d, {}), iso) == 0.0);
  }

  SECTION("single voxel takes the largest spacing") {
    Spacing aniso{0.8f, 1.2f, 2.5f};
    CHECK(tumor_size_mm(mask_of(d, {{2, 2, 2}}), aniso) == Catch::Approx(2.5));
  }

  SECTION("a straight run measures count times spacing") {
    Spacing sp{0.7f, 1.0f, 1.0f};
    auto m = mask_of(d, {{1, 1, 0}, {1, 1, 1}, {1, 1, 2}, {1, 1, 3}, {1, 1, 4}});
    CHECK(tumor_size_mm(m, sp) == Catch::Approx(5 * 0.7));
  }

  SECTION("corner contact joins voxels into one component") {
    // Touching only diagonally: one component of extent 3 on every axis.
    auto m = mask_of(d, {{0, 0, 0}, {1, 1, 1}, {2, 2, 2}});
    CHECK(tumor_size_mm(m, iso) == Catch::Approx(3.0));
    Spacing aniso{1.0f, 1.0f, 4.0f};
    CHECK(tumor_size_mm(m, aniso) == Catch::Approx(12.0));
  }

  SECTION("separate components report the largest one") {
    auto m = mask_of(d, {{0, 0, 0}, {0, 1, 0},                            // 2 along y
                         {4, 5, 0}, {4, 5, 1}, {4, 5, 2}, {4, 5, 3}});    // 4 along x
    CHECK(tumor_size_mm(m, iso) == Catch::Approx(4.0));
  }

  SECTION("anisotropy can make the shorter run the larger lesion") {
    Spacing sp{0.9f, 1.0f, 3.0f};
    auto m = mask_of(d, {{0, 0, 0}, {1, 0, 0},                            // 2 along z: 6 mm
                         {5, 5, 0}, {5, 5, 1}, {5, 5, 2}, {5, 5, 3}});    // 4 along x: 3.6 mm
    CHECK(tumor_size_mm(m, sp) == Catch::Approx(6.0));
  }

  SECTION("invalid spacing is rejected") {
    try {
      tumor_size_mm(mask_of(d, {{0, 0, 0}}), Spacing{0.0f, 1.0f, 1.0f});
      FAIL("expected bad_spacing");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::bad_spacing);
    }
  }
}

TEST_CASE("lesion extent agrees with the fixpoint reference on random masks") {
  Dims3 d{7, 7, 7};
  Rng rng(515);
  for (int trial = 0; trial < 40; ++trial) {
    double density = 0.02 + 0.25 * rng.uniform();
    SegmentationMask m = random_mask(d, density, rng);
    Spacing sp{float(0.5 + rng.uniform()), float(0.5 + rng.uniform()),
               float(0.5 + rng.uniform())};
    CHECK(tumor_size_mm(m, sp) == Catch::Approx(size_via_fixpoint(m, sp)).epsilon(1e-12));
  }
}

TEST_CASE("size categories use inclusive middle boundaries") {
  CHECK(size_group(0.0) == SizeGroup::none);
  CHECK(size_group(-1.0) == SizeGroup::none);
  CHECK(size_group(0.5) == SizeGroup::small);
  CHECK(size_group(4.999) == SizeGroup::small);
  CHECK(size_group(5.0) == SizeGroup::middle);
  CHECK(size_group(7.5) == SizeGroup::middle);
  CHECK(size_group(10.0) == SizeGroup::middle);
  CHECK(size_group(10.001) == SizeGroup::large);
  CHECK(size_group(50.0) == SizeGroup::large);
}

namespace {

EvalCase make_case(const std::string& id, Dims3 d, const std::vector<Dims3>& pred,
                   const std::vector<Dims3>& gt, Phase phase) {
  EvalCase c;
  c.case_id = id;
  c.pred = mask_of(d, pred);
  c.gt = mask_of(d, gt);
  c.spacing = Spacing{1.0f, 1.0f, 1.0f};
  c.phase = phase;
  return c;
}

}  // namespace

TEST_CASE("per-case results aggregate into grouped means") {
  Dims3 d{8, 8, 8};
  std::vector<EvalCase> cases;
  // Perfect small lesion (extent 2), arterial.
  cases.push_back(make_case("a", d, {{1, 1, 1}, {1, 1, 2}}, {{1, 1, 1}, {1, 1, 2}},
                            Phase::arterial));
  // Missed middle lesion (extent 6 along x), venous. Dice 0.
  cases.push_back(make_case("b", d, {},
                            {{2, 2, 0}, {2, 2, 1}, {2, 2, 2}, {2, 2, 3}, {2, 2, 4}, {2, 2, 5}},
                            Phase::venous));
  // Half-overlapping small lesion, arterial: pred 2, gt 2, overlap 1 -> 0.5.
  cases.push_back(make_case("c", d, {{5, 5, 5}, {5, 5, 6}}, {{5, 5, 5}, {5, 4, 4}},
                            Phase::arterial));

  EvalReport report = evaluate(cases);
  REQUIRE(report.cases.size() == 3);
  CHECK(report.cases[0].dice == 1.0);
  CHECK(report.cases[0].group == SizeGroup::small);
  CHECK(report.cases[1].dice == 0.0);
  CHECK(report.cases[1].size_mm == Catch::Approx(6.0));
  CHECK(report.cases[1].group == SizeGroup::middle);
  CHECK(report.cases[2].dice == 0.5);
  CHECK(report.mean_dice == Catch::Approx(1.5 / 3));

  REQUIRE(report.by_size.count("small") == 1);
  REQUIRE(report.by_size.count("middle") == 1);
  CHECK(report.by_size.at("small") == Catch::Approx(0.75));
  CHECK(report.by_size.at("middle") == Catch::Approx(0.0));

  REQUIRE(report.by_phase.count("arterial") == 1);
  REQUIRE(report.by_phase.count("venous") == 1);
  CHECK(report.by_phase.at("arterial") == Catch::Approx(0.75));
  CHECK(report.by_phase.at("venous") == Catch::Approx(0.0));
}

TEST_CASE("evaluating nothing is an error") {
  try {
    evaluate({});
    FAIL("expected empty_input");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::empty_input);
  }
}

TEST_CASE("the serialized report carries every field") {
  Dims3 d{4, 4, 4};
  std::vector<EvalCase> cases;
  cases.push_back(make_case("only", d, {{1, 1, 1}}, {{1, 1, 1}}, Phase::venous));
  EvalReport report = evaluate(cases);

  nlohmann::json j = report_to_json(report);
  REQUIRE(j.contains("cases"));
  REQUIRE(j["cases"].size() == 1);
  CHECK(j["cases"][0]["case_id"] == "only");
  CHECK(j["cases"][0]["dice"] == 1.0);
  CHECK(j["cases"][0]["tumor_size_mm"] == 1.0);
  CHECK(j["cases"][0]["size_group"] == "small");
  CHECK(j["cases"][0]["phase"] == "venous");
  CHECK(j["mean_dice"] == 1.0);
  CHECK(j["by_size"]["small"] == 1.0);
  CHECK(j["by_phase"]["venous"] == 1.0);

  std::string text = report_to_text(report);
  CHECK(text.find("only") != std::string::npos);
  CHECK(text.find("mean dice: 1.0000") != std::string::npos);
  CHECK(text.find("size small") != std::string::npos);
  CHECK(text.find("phase venous") != std::string::npos);
}
