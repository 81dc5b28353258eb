#pragma once

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfan/errors.hpp"
#include "sfan/volume.hpp"

namespace sfan {

namespace fs = std::filesystem;

// Metadata block shared by raw-pair headers for volumes and masks.
struct VolumeMeta {
  Spacing spacing;
  std::string orientation = kCanonicalOrientation;
  Phase phase = Phase::unknown;
  std::string case_id;
};

inline VolumeMeta meta_of(const CtVolume& v) {
  return VolumeMeta{v.spacing, v.orientation, v.phase, v.case_id};
}

namespace detail {

inline void byteswap_inplace(void* p, std::size_t elem, std::size_t count) {
  auto* b = static_cast<unsigned char*>(p);
  for (std::size_t i = 0; i < count; ++i, b += elem)
    for (std::size_t j = 0; j < elem / 2; ++j) std::swap(b[j], b[elem - 1 - j]);
}

// All on-disk payloads are little-endian.
template <typename T>
void to_le(std::vector<T>& v) {
  if constexpr (std::endian::native == std::endian::big) byteswap_inplace(v.data(), sizeof(T), v.size());
}
template <typename T>
void from_le(std::vector<T>& v) {
  to_le(v);
}

enum class FileFormat { raw_pair, nifti, nifti_gz };

inline FileFormat classify_path(const fs::path& path) {
  std::string name = path.filename().string();
  auto ends_with = [&](const std::string& suf) {
    return name.size() >= suf.size() && name.compare(name.size() - suf.size(), suf.size(), suf) == 0;
  };
  if (ends_with(".json")) return FileFormat::raw_pair;
  if (ends_with(".nii.gz")) return FileFormat::nifti_gz;
  if (ends_with(".nii")) return FileFormat::nifti;
  fail(Errc::bad_arguments,
       "unrecognized volume file extension on '" + name + "' (expected .json, .nii or .nii.gz)");
}

inline fs::path sidecar_bin(const fs::path& json_path) {
  fs::path p = json_path;
  p.replace_extension(".bin");
  return p;
}

// ---- raw pair -------------------------------------------------------------

inline void write_file_bytes(const fs::path& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::unwritable_path, "cannot open '" + path.string() + "' for writing");
  out.write(static_cast<const char*>(data), std::streamsize(size));
  if (!out) fail(Errc::unwritable_path, "short write to '" + path.string() + "'");
}

inline std::vector<unsigned char> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) fail(Errc::missing_file, "cannot open '" + path.string() + "'");
  auto size = in.tellg();
  in.seekg(0);
  std::vector<unsigned char> bytes(static_cast<std::size_t>(size));
  in.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!in) fail(Errc::corrupt_payload, "short read from '" + path.string() + "'");
  return bytes;
}

inline void write_raw_pair(const fs::path& json_path, Dims3 dims, const char* dtype,
                           const VolumeMeta& meta, const void* payload, std::size_t payload_size) {
  nlohmann::json header = {
      {"shape", {dims.z, dims.y, dims.x}},
      {"dtype", dtype},
      {"spacing", {meta.spacing.x, meta.spacing.y, meta.spacing.z}},
      {"orientation", meta.orientation},
      {"phase", phase_name(meta.phase)},
      {"case_id", meta.case_id},
  };
  std::string text = header.dump(2);
  text.push_back('\n');
  write_file_bytes(json_path, text.data(), text.size());
  write_file_bytes(sidecar_bin(json_path), payload, payload_size);
}

struct RawPair {
  Dims3 dims;
  std::string dtype;
  VolumeMeta meta;
  std::vector<unsigned char> payload;
};

inline RawPair read_raw_pair(const fs::path& json_path) {
  if (!fs::exists(json_path)) fail(Errc::missing_file, "no such file: '" + json_path.string() + "'");
  auto header_bytes = read_file_bytes(json_path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_bytes.begin(), header_bytes.end());
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::corrupt_header, "cannot parse '" + json_path.string() + "': " + e.what());
  }

  RawPair out;
  try {
    auto shape = header.at("shape");
    if (!shape.is_array() || shape.size() != 3)
      fail(Errc::non_3d_data, "header shape of '" + json_path.string() + "' is not 3D");
    out.dims = Dims3{shape.at(0).get<int>(), shape.at(1).get<int>(), shape.at(2).get<int>()};
    out.dtype = header.at("dtype").get<std::string>();
    auto spacing = header.at("spacing");
    out.meta.spacing = Spacing{spacing.at(0).get<float>(), spacing.at(1).get<float>(),
                               spacing.at(2).get<float>()};
    out.meta.orientation = header.at("orientation").get<std::string>();
    out.meta.phase = phase_from_name(header.at("phase").get<std::string>());
    out.meta.case_id = header.at("case_id").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::corrupt_header, "bad header field in '" + json_path.string() + "': " + e.what());
  }
  if (out.dims.z < 1 || out.dims.y < 1 || out.dims.x < 1)
    fail(Errc::non_3d_data, "header shape of '" + json_path.string() + "' has non-positive extent");
  if (out.dtype != "f32" && out.dtype != "u8")
    fail(Errc::corrupt_header, "unsupported dtype '" + out.dtype + "' in '" + json_path.string() + "'");
  if (!out.meta.spacing.valid())
    fail(Errc::bad_spacing, "non-positive spacing in '" + json_path.string() + "'");
  if (!orientation_valid(out.meta.orientation))
    fail(Errc::unknown_orientation,
         "orientation '" + out.meta.orientation + "' in '" + json_path.string() + "'");

  fs::path bin = sidecar_bin(json_path);
  if (!fs::exists(bin)) fail(Errc::missing_file, "no such file: '" + bin.string() + "'");
  out.payload = read_file_bytes(bin);
  std::size_t elem = out.dtype == "f32" ? 4 : 1;
  std::size_t expect = std::size_t(out.dims.count()) * elem;
  if (out.payload.size() != expect)
    fail(Errc::corrupt_payload, "payload of '" + bin.string() + "' holds " +
                                    std::to_string(out.payload.size()) + " bytes, expected " +
                                    std::to_string(expect));
  return out;
}

// ---- NIfTI-1 --------------------------------------------------------------

struct Nifti1Header {
  std::int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  std::int32_t extents;
  std::int16_t session_error;
  char regular;
  char dim_info;
  std::int16_t dim[8];
  float intent_p1, intent_p2, intent_p3;
  std::int16_t intent_code;
  std::int16_t datatype;
  std::int16_t bitpix;
  std::int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  std::int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max, cal_min;
  float slice_duration, toffset;
  std::int32_t glmax, glmin;
  char descrip[80];
  char aux_file[24];
  std::int16_t qform_code, sform_code;
  float quatern_b, quatern_c, quatern_d;
  float qoffset_x, qoffset_y, qoffset_z;
  float srow_x[4], srow_y[4], srow_z[4];
  char intent_name[16];
  char magic[4];
};
static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must pack to 348 bytes");

constexpr std::int16_t kDtUint8 = 2;
constexpr std::int16_t kDtInt16 = 4;
constexpr std::int16_t kDtInt32 = 8;
constexpr std::int16_t kDtFloat32 = 16;
constexpr std::int16_t kDtFloat64 = 64;
constexpr std::int16_t kDtUint16 = 512;

inline void swap_nifti_header(Nifti1Header& h) {
  auto s16 = [](std::int16_t& v) { byteswap_inplace(&v, 2, 1); };
  auto s32 = [](auto& v) { byteswap_inplace(&v, 4, 1); };
  s32(h.sizeof_hdr);
  s32(h.extents);
  s16(h.session_error);
  for (auto& d : h.dim) s16(d);
  s32(h.intent_p1);
  s32(h.intent_p2);
  s32(h.intent_p3);
  s16(h.intent_code);
  s16(h.datatype);
  s16(h.bitpix);
  s16(h.slice_start);
  for (auto& p : h.pixdim) s32(p);
  s32(h.vox_offset);
  s32(h.scl_slope);
  s32(h.scl_inter);
  s16(h.slice_end);
  s32(h.cal_max);
  s32(h.cal_min);
  s32(h.slice_duration);
  s32(h.toffset);
  s32(h.glmax);
  s32(h.glmin);
  s16(h.qform_code);
  s16(h.sform_code);
  s32(h.quatern_b);
  s32(h.quatern_c);
  s32(h.quatern_d);
  s32(h.qoffset_x);
  s32(h.qoffset_y);
  s32(h.qoffset_z);
  for (auto& v : h.srow_x) s32(v);
  for (auto& v : h.srow_y) s32(v);
  for (auto& v : h.srow_z) s32(v);
}

// Rounds the voxel-to-world direction columns to the nearest signed axis
// permutation. Columns are indexed by data axis (x, y, z); world rows are
// R/L, A/P, S/I.
inline std::string orientation_from_columns(const double cols[3][3], const std::string& file) {
  std::string code(3, '?');
  for (int axis = 0; axis < 3; ++axis) {
    int best = 0;
    double mag = 0.0;
    for (int w = 0; w < 3; ++w) {
      double a = std::abs(cols[axis][w]);
      if (a > mag) {
        mag = a;
        best = w;
      }
    }
    if (mag == 0.0)
      fail(Errc::unknown_orientation, "degenerate direction matrix in '" + file + "'");
    code[axis] = orientation_letter_for(best, cols[axis][best] >= 0 ? +1 : -1);
  }
  if (!orientation_valid(code))
    fail(Errc::unknown_orientation, "direction matrix of '" + file + "' is not axis-aligned");
  return code;
}

struct NiftiData {
  Dims3 dims;
  Spacing spacing;
  std::string orientation;
  std::string descrip;
  std::int16_t datatype = 0;
  float scl_slope = 0.0f;
  float scl_inter = 0.0f;
  std::vector<unsigned char> payload;  // native byte order after load
};

inline NiftiData read_nifti(const fs::path& path) {
  if (!fs::exists(path)) fail(Errc::missing_file, "no such file: '" + path.string() + "'");
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) fail(Errc::missing_file, "cannot open '" + path.string() + "'");
  struct Closer {
    gzFile f;
    ~Closer() { gzclose(f); }
  } closer{f};

  Nifti1Header h{};
  if (gzread(f, &h, sizeof(h)) != int(sizeof(h)))
    fail(Errc::corrupt_header, "'" + path.string() + "' is too short for a NIfTI-1 header");
  bool swapped = false;
  if (h.sizeof_hdr != 348) {
    swap_nifti_header(h);
    swapped = true;
    if (h.sizeof_hdr != 348)
      fail(Errc::corrupt_header, "'" + path.string() + "' has no NIfTI-1 signature");
  }
  if (std::memcmp(h.magic, "n+1", 4) != 0)
    fail(Errc::corrupt_header, "'" + path.string() + "' is not single-file NIfTI-1 (magic)");

  int ndim = h.dim[0];
  if (ndim < 3 || ndim > 7)
    fail(Errc::non_3d_data, "'" + path.string() + "' has dim[0]=" + std::to_string(ndim));
  for (int d = 4; d <= ndim; ++d)
    if (h.dim[d] > 1)
      fail(Errc::non_3d_data, "'" + path.string() + "' holds more than one 3D frame");
  NiftiData out;
  out.dims = Dims3{h.dim[3], h.dim[2], h.dim[1]};
  if (out.dims.z < 1 || out.dims.y < 1 || out.dims.x < 1)
    fail(Errc::non_3d_data, "'" + path.string() + "' has non-positive extents");
  out.spacing = Spacing{h.pixdim[1], h.pixdim[2], h.pixdim[3]};
  if (!out.spacing.valid()) fail(Errc::bad_spacing, "non-positive pixdim in '" + path.string() + "'");
  out.datatype = h.datatype;
  out.scl_slope = h.scl_slope;
  out.scl_inter = h.scl_inter;
  out.descrip.assign(h.descrip, h.descrip + strnlen(h.descrip, sizeof(h.descrip)));

  std::size_t elem = 0;
  switch (h.datatype) {
    case kDtUint8: elem = 1; break;
    case kDtInt16: elem = 2; break;
    case kDtInt32: elem = 4; break;
    case kDtFloat32: elem = 4; break;
    case kDtFloat64: elem = 8; break;
    case kDtUint16: elem = 2; break;
    default:
      fail(Errc::corrupt_header,
           "unsupported NIfTI datatype " + std::to_string(h.datatype) + " in '" + path.string() + "'");
  }
  if (h.bitpix != std::int16_t(elem * 8))
    fail(Errc::corrupt_header, "bitpix disagrees with datatype in '" + path.string() + "'");

  // Direction: sform preferred, then qform, else assume canonical.
  if (h.sform_code > 0) {
    double cols[3][3];
    for (int axis = 0; axis < 3; ++axis) {
      cols[axis][0] = h.srow_x[axis];
      cols[axis][1] = h.srow_y[axis];
      cols[axis][2] = h.srow_z[axis];
    }
    out.orientation = orientation_from_columns(cols, path.string());
  } else if (h.qform_code > 0) {
    double b = h.quatern_b, c = h.quatern_c, d = h.quatern_d;
    double a2 = 1.0 - b * b - c * c - d * d;
    double a = a2 > 0 ? std::sqrt(a2) : 0.0;
    double qfac = h.pixdim[0] < 0 ? -1.0 : 1.0;
    double cols[3][3] = {
        {a * a + b * b - c * c - d * d, 2 * (b * c + a * d), 2 * (b * d - a * c)},
        {2 * (b * c - a * d), a * a + c * c - b * b - d * d, 2 * (c * d + a * b)},
        {qfac * 2 * (b * d + a * c), qfac * 2 * (c * d - a * b),
         qfac * (a * a + d * d - b * b - c * c)},
    };
    out.orientation = orientation_from_columns(cols, path.string());
  } else {
    out.orientation = kCanonicalOrientation;
  }

  long offset = long(h.vox_offset);
  if (offset < long(sizeof(h)))
    fail(Errc::corrupt_header, "vox_offset below header size in '" + path.string() + "'");
  long skip = offset - long(sizeof(h));
  if (skip > 0) {
    std::vector<char> scratch(static_cast<std::size_t>(skip));
    if (gzread(f, scratch.data(), unsigned(skip)) != int(skip))
      fail(Errc::corrupt_payload, "truncated before voxel data in '" + path.string() + "'");
  }

  std::size_t expect = std::size_t(out.dims.count()) * elem;
  out.payload.resize(expect);
  std::size_t got = 0;
  while (got < expect) {
    unsigned chunk = unsigned(std::min<std::size_t>(expect - got, 1u << 24));
    int r = gzread(f, out.payload.data() + got, chunk);
    if (r <= 0) break;
    got += std::size_t(r);
  }
  char extra = 0;
  if (got != expect || gzread(f, &extra, 1) != 0)
    fail(Errc::corrupt_payload, "voxel payload of '" + path.string() + "' holds " +
                                    std::to_string(got) + "+ bytes, expected exactly " +
                                    std::to_string(expect));
  if (swapped && elem > 1) byteswap_inplace(out.payload.data(), elem, out.dims.count());
  if constexpr (std::endian::native == std::endian::big) {
    if (!swapped && elem > 1) byteswap_inplace(out.payload.data(), elem, out.dims.count());
  }
  return out;
}

inline void write_nifti(const fs::path& path, Dims3 dims, const VolumeMeta& meta,
                        std::int16_t datatype, const void* payload, std::size_t payload_size,
                        bool gz) {
  Nifti1Header h{};
  h.sizeof_hdr = 348;
  h.regular = 'r';
  h.dim[0] = 3;
  h.dim[1] = std::int16_t(dims.x);
  h.dim[2] = std::int16_t(dims.y);
  h.dim[3] = std::int16_t(dims.z);
  for (int d = 4; d < 8; ++d) h.dim[d] = 1;
  h.datatype = datatype;
  switch (datatype) {
    case kDtUint8: h.bitpix = 8; break;
    case kDtInt16: case kDtUint16: h.bitpix = 16; break;
    case kDtFloat64: h.bitpix = 64; break;
    default: h.bitpix = 32; break;
  }
  h.pixdim[0] = 1.0f;
  h.pixdim[1] = meta.spacing.x;
  h.pixdim[2] = meta.spacing.y;
  h.pixdim[3] = meta.spacing.z;
  h.vox_offset = 352.0f;
  h.scl_slope = 1.0f;
  h.scl_inter = 0.0f;
  h.qform_code = 0;
  h.sform_code = 1;
  // srow rows are world R/A/S; columns are data axes scaled by spacing.
  float* rows[3] = {h.srow_x, h.srow_y, h.srow_z};
  for (int axis = 0; axis < 3; ++axis) {
    int world = 0, sign = 0;
    orientation_letter(meta.orientation[std::size_t(axis)], world, sign);
    rows[world][axis] = float(sign) * meta.spacing.axis(axis);
  }
  std::snprintf(h.descrip, sizeof(h.descrip), "%s", meta.case_id.c_str());
  std::memcpy(h.magic, "n+1", 4);
  if constexpr (std::endian::native == std::endian::big) swap_nifti_header(h);

  const char pad[4] = {0, 0, 0, 0};
  if (gz) {
    gzFile f = gzopen(path.string().c_str(), "wb6");
    if (!f) fail(Errc::unwritable_path, "cannot open '" + path.string() + "' for writing");
    bool ok = gzwrite(f, &h, sizeof(h)) == int(sizeof(h)) && gzwrite(f, pad, 4) == 4;
    std::size_t written = 0;
    while (ok && written < payload_size) {
      unsigned chunk = unsigned(std::min<std::size_t>(payload_size - written, 1u << 24));
      ok = gzwrite(f, static_cast<const char*>(payload) + written, chunk) == int(chunk);
      written += chunk;
    }
    ok = (gzclose(f) == Z_OK) && ok;
    if (!ok) fail(Errc::unwritable_path, "short write to '" + path.string() + "'");
  } else {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::unwritable_path, "cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(&h), sizeof(h));
    out.write(pad, 4);
    out.write(static_cast<const char*>(payload), std::streamsize(payload_size));
    if (!out) fail(Errc::unwritable_path, "short write to '" + path.string() + "'");
  }
}

}  // namespace detail

// ---- public operations ----------------------------------------------------

inline void save_volume(const CtVolume& vol, const fs::path& path) {
  vol.validate();
  auto format = detail::classify_path(path);
  Dims3 dims = vol.dims();
  std::vector<float> payload = vol.voxels.raw();
  detail::to_le(payload);
  if (format == detail::FileFormat::raw_pair) {
    detail::write_raw_pair(path, dims, "f32", meta_of(vol), payload.data(), payload.size() * 4);
  } else {
    detail::write_nifti(path, dims, meta_of(vol), detail::kDtFloat32, payload.data(),
                        payload.size() * 4, format == detail::FileFormat::nifti_gz);
  }
}

inline CtVolume load_volume(const fs::path& path) {
  auto format = detail::classify_path(path);
  CtVolume vol;
  if (format == detail::FileFormat::raw_pair) {
    auto raw = detail::read_raw_pair(path);
    if (raw.dtype != "f32")
      fail(Errc::corrupt_header, "'" + path.string() + "' is not a volume (dtype " + raw.dtype + ")");
    std::vector<float> voxels(std::size_t(raw.dims.count()));
    std::memcpy(voxels.data(), raw.payload.data(), raw.payload.size());
    detail::from_le(voxels);
    vol.voxels = Grid3<float>(raw.dims, std::move(voxels));
    vol.spacing = raw.meta.spacing;
    vol.orientation = raw.meta.orientation;
    vol.phase = raw.meta.phase;
    vol.case_id = raw.meta.case_id;
  } else {
    auto nii = detail::read_nifti(path);
    std::vector<float> voxels(std::size_t(nii.dims.count()));
    const unsigned char* p = nii.payload.data();
    switch (nii.datatype) {
      case detail::kDtUint8:
        for (std::size_t i = 0; i < voxels.size(); ++i) voxels[i] = float(p[i]);
        break;
      case detail::kDtInt16: {
        const std::int16_t* s = reinterpret_cast<const std::int16_t*>(p);
        for (std::size_t i = 0; i < voxels.size(); ++i) voxels[i] = float(s[i]);
        break;
      }
      case detail::kDtUint16: {
        const std::uint16_t* s = reinterpret_cast<const std::uint16_t*>(p);
        for (std::size_t i = 0; i < voxels.size(); ++i) voxels[i] = float(s[i]);
        break;
      }
      case detail::kDtInt32: {
        const std::int32_t* s = reinterpret_cast<const std::int32_t*>(p);
        for (std::size_t i = 0; i < voxels.size(); ++i) voxels[i] = float(s[i]);
        break;
      }
      case detail::kDtFloat32:
        std::memcpy(voxels.data(), p, voxels.size() * 4);
        break;
      case detail::kDtFloat64: {
        const double* s = reinterpret_cast<const double*>(p);
        for (std::size_t i = 0; i < voxels.size(); ++i) voxels[i] = float(s[i]);
        break;
      }
    }
    bool scaled = nii.scl_slope != 0.0f && !(nii.scl_slope == 1.0f && nii.scl_inter == 0.0f);
    if (scaled)
      for (auto& v : voxels) v = v * nii.scl_slope + nii.scl_inter;
    vol.voxels = Grid3<float>(nii.dims, std::move(voxels));
    vol.spacing = nii.spacing;
    vol.orientation = nii.orientation;
    vol.phase = Phase::unknown;  // carried by the dataset manifest, not the file
    vol.case_id = nii.descrip;
  }
  vol.validate();
  return vol;
}

inline void save_mask(const SegmentationMask& mask, const fs::path& path,
                      const VolumeMeta* meta = nullptr) {
  mask.validate();
  VolumeMeta m = meta ? *meta : VolumeMeta{};
  auto format = detail::classify_path(path);
  if (format == detail::FileFormat::raw_pair) {
    detail::write_raw_pair(path, mask.dims(), "u8", m, mask.labels.data(),
                           std::size_t(mask.labels.count()));
  } else {
    detail::write_nifti(path, mask.dims(), m, detail::kDtUint8, mask.labels.data(),
                        std::size_t(mask.labels.count()),
                        format == detail::FileFormat::nifti_gz);
  }
}

inline SegmentationMask load_mask(const fs::path& path,
                                  MaskSemantics semantics = MaskSemantics::tumor_mask,
                                  const std::optional<Dims3>& expect_dims = std::nullopt) {
  auto format = detail::classify_path(path);
  SegmentationMask mask;
  mask.semantics = semantics;
  if (format == detail::FileFormat::raw_pair) {
    auto raw = detail::read_raw_pair(path);
    if (raw.dtype != "u8")
      fail(Errc::corrupt_header, "'" + path.string() + "' is not a mask (dtype " + raw.dtype + ")");
    mask.labels = Grid3<std::uint8_t>(raw.dims, std::vector<std::uint8_t>(raw.payload.begin(),
                                                                          raw.payload.end()));
  } else {
    auto nii = detail::read_nifti(path);
    std::vector<std::uint8_t> labels(std::size_t(nii.dims.count()));
    const unsigned char* p = nii.payload.data();
    auto narrow = [&](auto value, std::size_t i) {
      if (value != 0 && value != 1)
        fail(Errc::label_range, "mask '" + path.string() + "' holds label outside {0, 1}");
      labels[i] = std::uint8_t(value);
    };
    switch (nii.datatype) {
      case detail::kDtUint8:
        for (std::size_t i = 0; i < labels.size(); ++i) narrow(p[i], i);
        break;
      case detail::kDtInt16:
        for (std::size_t i = 0; i < labels.size(); ++i)
          narrow(reinterpret_cast<const std::int16_t*>(p)[i], i);
        break;
      case detail::kDtUint16:
        for (std::size_t i = 0; i < labels.size(); ++i)
          narrow(reinterpret_cast<const std::uint16_t*>(p)[i], i);
        break;
      case detail::kDtInt32:
        for (std::size_t i = 0; i < labels.size(); ++i)
          narrow(reinterpret_cast<const std::int32_t*>(p)[i], i);
        break;
      default:
        fail(Errc::corrupt_header,
             "mask '" + path.string() + "' uses a floating-point datatype");
    }
    mask.labels = Grid3<std::uint8_t>(nii.dims, std::move(labels));
  }
  mask.validate();
  if (expect_dims && !(mask.dims() == *expect_dims))
    fail(Errc::shape_mismatch, "mask '" + path.string() + "' has shape " + mask.dims().str() +
                                   ", expected " + expect_dims->str());
  return mask;
}

}  // namespace sfan
