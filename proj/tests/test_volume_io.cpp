#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <fstream>
#include <vector>

#include "sfan/volume_io.hpp"
#include "support/temp_dir.hpp"

using namespace sfan;
using testutil::TempDir;

namespace {

CtVolume sample_volume(Dims3 d = {3, 4, 5}, const std::string& orientation = "RAS") {
  CtVolume vol;
  std::vector<float> data(std::size_t(d.count()));
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = float(i) * 0.25f - 30.0f;
  vol.voxels = Grid3<float>(d, std::move(data));
  vol.spacing = Spacing{0.75f, 0.82f, 2.5f};
  vol.orientation = orientation;
  vol.phase = Phase::arterial;
  vol.case_id = "case_007";
  return vol;
}

SegmentationMask sample_mask(Dims3 d = {3, 4, 5}) {
  SegmentationMask mask;
  std::vector<std::uint8_t> labels(std::size_t(d.count()));
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = (i % 7 == 0) ? 1 : 0;
  mask.labels = Grid3<std::uint8_t>(d, std::move(labels));
  mask.semantics = MaskSemantics::tumor_mask;
  return mask;
}

void write_bytes(const std::filesystem::path& p, const void* data, std::size_t n) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(static_cast<const char*>(data), std::streamsize(n));
  REQUIRE(out.good());
}

std::vector<unsigned char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("raw pair volume round trip preserves everything") {
  TempDir dir("vio");
  CtVolume vol = sample_volume();
  auto path = dir.file("vol.json");
  save_volume(vol, path);

  REQUIRE(std::filesystem::exists(dir.file("vol.json")));
  REQUIRE(std::filesystem::exists(dir.file("vol.bin")));

  CtVolume back = load_volume(path);
  CHECK(back.voxels == vol.voxels);
  CHECK(back.spacing.x == vol.spacing.x);
  CHECK(back.spacing.y == vol.spacing.y);
  CHECK(back.spacing.z == vol.spacing.z);
  CHECK(back.orientation == vol.orientation);
  CHECK(back.phase == vol.phase);
  CHECK(back.case_id == vol.case_id);
}

TEST_CASE("raw pair mask round trip with metadata") {
  TempDir dir("vio");
  SegmentationMask mask = sample_mask();
  VolumeMeta meta;
  meta.spacing = Spacing{1.0f, 1.5f, 2.0f};
  meta.orientation = "LPS";
  meta.phase = Phase::venous;
  meta.case_id = "m1";
  auto path = dir.file("mask.json");
  save_mask(mask, path, &meta);

  SegmentationMask back = load_mask(path, MaskSemantics::tumor_mask);
  CHECK(back.labels == mask.labels);
  CHECK(back.semantics == MaskSemantics::tumor_mask);
}

TEST_CASE("raw pair payload byte counts are enforced strictly") {
  TempDir dir("vio");
  CtVolume vol = sample_volume();
  auto path = dir.file("vol.json");
  save_volume(vol, path);

  auto payload = slurp(dir.file("vol.bin"));

  SECTION("truncated payload") {
    write_bytes(dir.file("vol.bin"), payload.data(), payload.size() - 4);
    try {
      load_volume(path);
      FAIL("expected corrupt_payload");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::corrupt_payload);
    }
  }
  SECTION("trailing bytes") {
    payload.push_back(0);
    write_bytes(dir.file("vol.bin"), payload.data(), payload.size());
    try {
      load_volume(path);
      FAIL("expected corrupt_payload");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::corrupt_payload);
    }
  }
  SECTION("missing sidecar") {
    std::filesystem::remove(dir.file("vol.bin"));
    try {
      load_volume(path);
      FAIL("expected missing_file");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::missing_file);
    }
  }
}

TEST_CASE("raw pair header errors map to the right categories") {
  TempDir dir("vio");
  CtVolume vol = sample_volume();
  auto path = dir.file("vol.json");
  save_volume(vol, path);
  auto header = slurp(path);
  std::string text(header.begin(), header.end());

  auto rewrite = [&](const std::string& from, const std::string& to) {
    std::string patched = text;
    auto pos = patched.find(from);
    REQUIRE(pos != std::string::npos);
    patched.replace(pos, from.size(), to);
    write_bytes(path, patched.data(), patched.size());
  };

  SECTION("missing file") {
    try {
      load_volume(dir.file("nope.json"));
      FAIL("expected missing_file");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::missing_file);
    }
  }
  SECTION("unparseable JSON") {
    write_bytes(path, "{not json", 9);
    try {
      load_volume(path);
      FAIL("expected corrupt_header");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::corrupt_header);
    }
  }
  SECTION("non-positive spacing") {
    rewrite("0.75", "-0.75");
    try {
      load_volume(path);
      FAIL("expected bad_spacing");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::bad_spacing);
      CHECK(std::string(e.category()) == "non-positive-spacing");
    }
  }
  SECTION("unknown orientation code") {
    rewrite("\"RAS\"", "\"RAX\"");
    try {
      load_volume(path);
      FAIL("expected unknown_orientation");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::unknown_orientation);
    }
  }
  SECTION("duplicate orientation axis") {
    rewrite("\"RAS\"", "\"RRS\"");
    try {
      load_volume(path);
      FAIL("expected unknown_orientation");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::unknown_orientation);
    }
  }
  SECTION("wrong rank shape") {
    rewrite("\"shape\": [\n    3,\n    4,\n    5\n  ]", "\"shape\": [3, 4]");
    try {
      load_volume(path);
      FAIL("expected non_3d_data");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::non_3d_data);
    }
  }
  SECTION("mask dtype rejected as volume") {
    SegmentationMask mask = sample_mask();
    auto mpath = dir.file("m.json");
    save_mask(mask, mpath);
    try {
      load_volume(mpath);
      FAIL("expected corrupt_header");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::corrupt_header);
    }
  }
  SECTION("volume dtype rejected as mask") {
    try {
      load_mask(path);
      FAIL("expected corrupt_header");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::corrupt_header);
    }
  }
}

TEST_CASE("mask shape expectations are checked on load") {
  TempDir dir("vio");
  SegmentationMask mask = sample_mask({3, 4, 5});
  auto path = dir.file("m.json");
  save_mask(mask, path);
  try {
    load_mask(path, MaskSemantics::tumor_mask, Dims3{3, 4, 6});
    FAIL("expected shape_mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::shape_mismatch);
  }
}

TEST_CASE("unsupported extension is rejected before touching the disk") {
  try {
    load_volume("vol.dat");
    FAIL("expected bad_arguments");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::bad_arguments);
  }
}

TEST_CASE("medical volume round trip through both container flavors") {
  TempDir dir("vio");
  CtVolume vol = sample_volume({4, 6, 7}, "LPS");

  for (const char* name : {"vol.nii", "vol.nii.gz"}) {
    auto path = dir.file(name);
    save_volume(vol, path);
    CtVolume back = load_volume(path);
    INFO(name);
    CHECK(back.voxels == vol.voxels);
    CHECK(back.spacing.x == vol.spacing.x);
    CHECK(back.spacing.y == vol.spacing.y);
    CHECK(back.spacing.z == vol.spacing.z);
    CHECK(back.orientation == vol.orientation);
    CHECK(back.case_id == vol.case_id);
    // Contrast phase is carried by the dataset manifest, not this container.
    CHECK(back.phase == Phase::unknown);
  }
}

TEST_CASE("medical mask round trip") {
  TempDir dir("vio");
  SegmentationMask mask = sample_mask({4, 6, 7});
  VolumeMeta meta;
  meta.spacing = Spacing{1.0f, 1.0f, 3.0f};
  meta.orientation = "RAS";
  meta.case_id = "mk";
  auto path = dir.file("m.nii.gz");
  save_mask(mask, path, &meta);
  SegmentationMask back = load_mask(path, MaskSemantics::liver_mask);
  CHECK(back.labels == mask.labels);
  CHECK(back.semantics == MaskSemantics::liver_mask);
}

TEST_CASE("non-canonical orientations survive the medical container") {
  TempDir dir("vio");
  for (const char* code : {"RAS", "LPS", "ASR", "IPL", "SAR"}) {
    CtVolume vol = sample_volume({2, 3, 4}, code);
    auto path = dir.file(std::string("o_") + code + ".nii");
    save_volume(vol, path);
    CtVolume back = load_volume(path);
    INFO(code);
    CHECK(back.orientation == code);
    CHECK(back.voxels == vol.voxels);
  }
}

TEST_CASE("byte-swapped medical file reads back identically") {
  TempDir dir("vio");
  CtVolume vol = sample_volume({2, 3, 4});
  auto path = dir.file("v.nii");
  save_volume(vol, path);

  auto bytes = slurp(path);
  REQUIRE(bytes.size() == 352 + std::size_t(vol.voxels.count()) * 4);

  detail::Nifti1Header h;
  std::memcpy(&h, bytes.data(), sizeof(h));
  detail::swap_nifti_header(h);
  std::memcpy(bytes.data(), &h, sizeof(h));
  detail::byteswap_inplace(bytes.data() + 352, 4, vol.voxels.count());
  auto swapped_path = dir.file("v_swapped.nii");
  write_bytes(swapped_path, bytes.data(), bytes.size());

  CtVolume back = load_volume(swapped_path);
  CHECK(back.voxels == vol.voxels);
  CHECK(back.spacing.x == vol.spacing.x);
  CHECK(back.orientation == vol.orientation);
}

TEST_CASE("integer voxel payloads convert to float with scaling applied") {
  TempDir dir("vio");
  Dims3 d{2, 2, 3};
  VolumeMeta meta;
  meta.spacing = Spacing{1, 1, 1};
  meta.orientation = "RAS";
  meta.case_id = "scaled";

  std::vector<std::int16_t> raw = {-1000, -10, 0, 5, 40, 1000, 7, -7, 12, 99, -99, 3};
  auto path = dir.file("i16.nii");
  detail::write_nifti(path, d, meta, detail::kDtInt16, raw.data(), raw.size() * 2, false);

  // Patch in a rescale: value = slope * stored + intercept.
  auto bytes = slurp(path);
  detail::Nifti1Header h;
  std::memcpy(&h, bytes.data(), sizeof(h));
  h.scl_slope = 0.5f;
  h.scl_inter = -100.0f;
  std::memcpy(bytes.data(), &h, sizeof(h));
  write_bytes(path, bytes.data(), bytes.size());

  CtVolume vol = load_volume(path);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    CHECK(vol.voxels.data()[i] == 0.5f * float(raw[i]) - 100.0f);
  }
}

TEST_CASE("medical container header errors") {
  TempDir dir("vio");
  CtVolume vol = sample_volume({2, 3, 4});
  auto path = dir.file("v.nii");
  save_volume(vol, path);
  auto bytes = slurp(path);

  auto patch_and_expect = [&](auto mutate, Errc expect, const char* label) {
    auto copy = bytes;
    detail::Nifti1Header h;
    std::memcpy(&h, copy.data(), sizeof(h));
    mutate(h);
    std::memcpy(copy.data(), &h, sizeof(h));
    auto p = dir.file(std::string(label) + ".nii");
    write_bytes(p, copy.data(), copy.size());
    try {
      load_volume(p);
      FAIL("expected failure: " << label);
    } catch (const Error& e) {
      INFO(label);
      CHECK(e.code() == expect);
    }
  };

  patch_and_expect([](detail::Nifti1Header& h) { h.sizeof_hdr = 347; }, Errc::corrupt_header,
                   "bad_size");
  patch_and_expect([](detail::Nifti1Header& h) { std::memcpy(h.magic, "ni1", 4); },
                   Errc::corrupt_header, "bad_magic");
  patch_and_expect([](detail::Nifti1Header& h) { h.dim[0] = 2; }, Errc::non_3d_data, "rank2");
  patch_and_expect([](detail::Nifti1Header& h) { h.dim[0] = 4; h.dim[4] = 3; }, Errc::non_3d_data,
                   "rank4_populated");
  patch_and_expect([](detail::Nifti1Header& h) { h.pixdim[2] = 0.0f; }, Errc::bad_spacing,
                   "zero_spacing");
  patch_and_expect([](detail::Nifti1Header& h) { h.datatype = 123; }, Errc::corrupt_header,
                   "odd_datatype");
  patch_and_expect(
      [](detail::Nifti1Header& h) {
        // Degenerate direction matrix: two columns map to the same world axis.
        h.srow_y[0] = h.srow_x[0];
        h.srow_y[1] = h.srow_x[1];
        h.srow_y[2] = h.srow_x[2];
      },
      Errc::unknown_orientation, "degenerate_axes");

  SECTION("truncated voxel payload") {
    auto copy = bytes;
    copy.resize(copy.size() - 4);
    auto p = dir.file("short.nii");
    write_bytes(p, copy.data(), copy.size());
    try {
      load_volume(p);
      FAIL("expected corrupt_payload");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::corrupt_payload);
    }
  }
  SECTION("trailing garbage after voxels") {
    auto copy = bytes;
    copy.push_back(7);
    auto p = dir.file("long.nii");
    write_bytes(p, copy.data(), copy.size());
    try {
      load_volume(p);
      FAIL("expected corrupt_payload");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::corrupt_payload);
    }
  }
}

TEST_CASE("mask labels outside the binary range are rejected") {
  TempDir dir("vio");
  Dims3 d{1, 2, 2};
  VolumeMeta meta;
  meta.spacing = Spacing{1, 1, 1};
  meta.orientation = "RAS";

  std::vector<std::uint8_t> labels = {0, 1, 2, 0};
  auto path = dir.file("bad_mask.nii");
  detail::write_nifti(path, d, meta, detail::kDtUint8, labels.data(), labels.size(), false);
  try {
    load_mask(path);
    FAIL("expected label_range");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::label_range);
  }
}

TEST_CASE("error categories carry machine-readable names and exit codes") {
  CHECK(std::string(category_name(Errc::bad_arguments)) == "bad-arguments");
  CHECK(std::string(category_name(Errc::divergence)) == "numerical-divergence");
  CHECK(exit_code(Errc::bad_arguments) == 2);
  CHECK(exit_code(Errc::channel_mismatch) == 2);
  CHECK(exit_code(Errc::divergence) == 4);
  CHECK(exit_code(Errc::empty_input) == 5);
  CHECK(exit_code(Errc::missing_file) == 3);
  CHECK(exit_code(Errc::corrupt_payload) == 3);
}
