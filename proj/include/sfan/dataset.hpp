#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfan/errors.hpp"
#include "sfan/preprocess.hpp"
#include "sfan/volume_io.hpp"

namespace sfan {

// One row of a dataset manifest. Paths are stored as written in the file;
// load_manifest resolves relative paths against the manifest directory.
struct CaseEntry {
  std::string case_id;
  fs::path volume_path;
  fs::path tumor_mask_path;
  fs::path liver_mask_path;
  Phase phase = Phase::unknown;
  std::optional<RoiBox> roi;  // recorded by the preprocessing step
};

inline std::vector<CaseEntry> load_manifest(const fs::path& manifest_path) {
  if (!fs::exists(manifest_path))
    fail(Errc::missing_file, "no such file: '" + manifest_path.string() + "'");
  auto bytes = detail::read_file_bytes(manifest_path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::corrupt_header, "cannot parse '" + manifest_path.string() + "': " + e.what());
  }
  require(doc.is_array(), Errc::corrupt_header,
          "manifest '" + manifest_path.string() + "' must be a JSON array");
  fs::path dir = manifest_path.parent_path();
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : dir / path;
  };
  std::vector<CaseEntry> entries;
  try {
    for (const auto& row : doc) {
      CaseEntry e;
      e.case_id = row.at("case_id").get<std::string>();
      e.volume_path = resolve(row.at("volume_path").get<std::string>());
      e.tumor_mask_path = resolve(row.at("tumor_mask_path").get<std::string>());
      e.liver_mask_path = resolve(row.at("liver_mask_path").get<std::string>());
      e.phase = phase_from_name(row.at("phase").get<std::string>());
      if (row.contains("roi")) {
        auto r = row.at("roi");
        require(r.is_array() && r.size() == 6, Errc::corrupt_header,
                "roi must have 6 entries in '" + manifest_path.string() + "'");
        e.roi = RoiBox{r.at(0).get<int>(), r.at(1).get<int>(), r.at(2).get<int>(),
                       r.at(3).get<int>(), r.at(4).get<int>(), r.at(5).get<int>()};
      }
      entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::corrupt_header, "bad manifest row in '" + manifest_path.string() + "': " + e.what());
  }
  require(!entries.empty(), Errc::empty_input, "manifest '" + manifest_path.string() + "' is empty");
  return entries;
}

// Paths inside the manifest directory are written relative to it.
inline void save_manifest(const std::vector<CaseEntry>& entries, const fs::path& manifest_path) {
  fs::path dir = manifest_path.parent_path();
  auto shorten = [&](const fs::path& p) {
    if (!p.is_absolute() || dir.empty()) return p.generic_string();
    fs::path rel = p.lexically_relative(dir);
    if (rel.empty() || *rel.begin() == "..") return p.generic_string();
    return rel.generic_string();
  };
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json row = {{"case_id", e.case_id},
                          {"volume_path", shorten(e.volume_path)},
                          {"tumor_mask_path", shorten(e.tumor_mask_path)},
                          {"liver_mask_path", shorten(e.liver_mask_path)},
                          {"phase", phase_name(e.phase)}};
    if (e.roi)
      row["roi"] = {e.roi->z0, e.roi->z1, e.roi->y0, e.roi->y1, e.roi->x0, e.roi->x1};
    doc.push_back(std::move(row));
  }
  std::string text = doc.dump(2);
  text.push_back('\n');
  detail::write_file_bytes(manifest_path, text.data(), text.size());
}

// ---- training slices ------------------------------------------------------

struct SliceSample {
  std::vector<float> image;          // height * width, x fastest
  std::vector<std::uint8_t> labels;  // same layout
};

// Axial slices zero-padded to one common spatial size.
struct SliceDataset {
  int height = 0;
  int width = 0;
  std::vector<SliceSample> slices;
  std::vector<std::int64_t> class_counts;  // pixels per label over all slices
};

class SliceDatasetBuilder {
 public:
  void add_volume(const Grid3<float>& voxels, const Grid3<std::uint8_t>& labels) {
    require(voxels.dims() == labels.dims(), Errc::shape_mismatch,
            "volume " + voxels.dims().str() + " and labels " + labels.dims().str() + " disagree");
    Dims3 d = voxels.dims();
    for (int z = 0; z < d.z; ++z) {
      RawSlice s;
      s.h = d.y;
      s.w = d.x;
      s.image.assign(voxels.slice(z), voxels.slice(z) + std::size_t(d.y) * d.x);
      s.labels.assign(labels.slice(z), labels.slice(z) + std::size_t(d.y) * d.x);
      raw_.push_back(std::move(s));
    }
  }

  // Pads every slice symmetrically with zeros (background) to the smallest
  // common size divisible by pool_factor.
  SliceDataset finalize(int pool_factor, int num_classes = 2) const {
    require(!raw_.empty(), Errc::empty_input, "no training slices");
    require(pool_factor >= 1, Errc::bad_arguments, "pool factor must be positive");
    int max_h = 0, max_w = 0;
    for (const auto& s : raw_) {
      max_h = std::max(max_h, s.h);
      max_w = std::max(max_w, s.w);
    }
    auto round_up = [&](int v) { return (v + pool_factor - 1) / pool_factor * pool_factor; };
    SliceDataset ds;
    ds.height = round_up(max_h);
    ds.width = round_up(max_w);
    ds.class_counts.assign(std::size_t(num_classes), 0);
    for (const auto& s : raw_) {
      SliceSample out;
      out.image.assign(std::size_t(ds.height) * ds.width, 0.0f);
      out.labels.assign(std::size_t(ds.height) * ds.width, 0);
      int top = (ds.height - s.h) / 2;
      int left = (ds.width - s.w) / 2;
      for (int y = 0; y < s.h; ++y) {
        std::copy_n(&s.image[std::size_t(y) * s.w], s.w,
                    &out.image[std::size_t(y + top) * ds.width + left]);
        std::copy_n(&s.labels[std::size_t(y) * s.w], s.w,
                    &out.labels[std::size_t(y + top) * ds.width + left]);
      }
      for (auto v : out.labels) {
        require(v < num_classes, Errc::label_range,
                "label " + std::to_string(int(v)) + " outside the configured class range");
        ++ds.class_counts[v];
      }
      ds.slices.push_back(std::move(out));
    }
    return ds;
  }

 private:
  struct RawSlice {
    int h = 0, w = 0;
    std::vector<float> image;
    std::vector<std::uint8_t> labels;
  };
  std::vector<RawSlice> raw_;
};

enum class TrainTask { liver, tumor };

inline TrainTask train_task_from_name(const std::string& s) {
  if (s == "liver") return TrainTask::liver;
  if (s == "tumor") return TrainTask::tumor;
  fail(Errc::bad_arguments, "task must be 'liver' or 'tumor', got '" + s + "'");
}

// Loads the slices a task trains on: the liver model sees full preprocessed
// volumes with liver labels; the tumor model sees ROI-cropped volumes with
// tumor labels, using the manifest ROI when present and otherwise deriving it
// from the ground-truth liver mask.
inline SliceDataset load_training_slices(const std::vector<CaseEntry>& entries, TrainTask task,
                                         int pool_factor,
                                         float roi_margin_mm = kDefaultRoiMarginMm) {
  SliceDatasetBuilder builder;
  for (const auto& e : entries) {
    CtVolume vol = load_volume(e.volume_path);
    if (task == TrainTask::liver) {
      SegmentationMask liver = load_mask(e.liver_mask_path, MaskSemantics::liver_mask, vol.dims());
      builder.add_volume(vol.voxels, liver.labels);
    } else {
      SegmentationMask tumor = load_mask(e.tumor_mask_path, MaskSemantics::tumor_mask, vol.dims());
      RoiBox box;
      if (e.roi) {
        box = *e.roi;
        box.validate_within(vol.dims());
      } else {
        SegmentationMask liver =
            load_mask(e.liver_mask_path, MaskSemantics::liver_mask, vol.dims());
        box = liver_roi(liver, roi_margin_mm, vol.spacing);
      }
      builder.add_volume(crop(vol.voxels, box), crop(tumor.labels, box));
    }
  }
  return builder.finalize(pool_factor);
}

}  // namespace sfan
