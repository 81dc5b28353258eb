#pragma once

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfan/errors.hpp"
#include "sfan/volume.hpp"

namespace sfan {

constexpr double kSmallTumorMaxMm = 5.0;
constexpr double kMiddleTumorMaxMm = 10.0;

enum class SizeGroup { none, small, middle, large };

inline const char* size_group_name(SizeGroup g) {
  switch (g) {
    case SizeGroup::none: return "none";
    case SizeGroup::small: return "small";
    case SizeGroup::middle: return "middle";
    case SizeGroup::large: return "large";
  }
  return "none";
}

// Boundaries are inclusive to the middle group: exactly 5 mm and exactly
// 10 mm are both "middle".
inline SizeGroup size_group(double size_mm) {
  if (size_mm <= 0.0) return SizeGroup::none;
  if (size_mm < kSmallTumorMaxMm) return SizeGroup::small;
  if (size_mm <= kMiddleTumorMaxMm) return SizeGroup::middle;
  return SizeGroup::large;
}

// 2|P n G| / (|P| + |G|); two empty masks count as a perfect match, an empty
// ground truth against a non-empty prediction scores 0.
inline double dice_per_case(const SegmentationMask& pred, const SegmentationMask& gt) {
  require(pred.dims() == gt.dims(), Errc::shape_mismatch,
          "prediction " + pred.dims().str() + " and ground truth " + gt.dims().str() +
              " have different shapes");
  std::int64_t p = 0, g = 0, both = 0;
  const auto& pv = pred.labels.raw();
  const auto& gv = gt.labels.raw();
  for (std::size_t i = 0; i < pv.size(); ++i) {
    p += pv[i];
    g += gv[i];
    both += pv[i] & gv[i];
  }
  if (p + g == 0) return 1.0;
  return 2.0 * double(both) / double(p + g);
}

// Largest physical extent of any 26-connected tumor component along any
// single axis: per component, max over axes of voxel-count extent times the
// axis spacing. Empty masks size 0.
inline double tumor_size_mm(const SegmentationMask& mask, const Spacing& spacing) {
  require(spacing.valid(), Errc::bad_spacing, "non-positive spacing");
  Dims3 d = mask.dims();
  std::vector<std::uint8_t> visited(std::size_t(d.count()), 0);
  const auto& labels = mask.labels.raw();
  auto flat = [&](int z, int y, int x) {
    return (std::size_t(z) * d.y + std::size_t(y)) * d.x + std::size_t(x);
  };
  double best = 0.0;
  std::vector<std::size_t> stack;
  for (int z0 = 0; z0 < d.z; ++z0)
    for (int y0 = 0; y0 < d.y; ++y0)
      for (int x0 = 0; x0 < d.x; ++x0) {
        std::size_t start = flat(z0, y0, x0);
        if (!labels[start] || visited[start]) continue;
        int zmin = z0, zmax = z0, ymin = y0, ymax = y0, xmin = x0, xmax = x0;
        visited[start] = 1;
        stack.push_back(start);
        while (!stack.empty()) {
          std::size_t idx = stack.back();
          stack.pop_back();
          int z = int(idx / (std::size_t(d.y) * d.x));
          int rem = int(idx % (std::size_t(d.y) * d.x));
          int y = rem / d.x, x = rem % d.x;
          zmin = std::min(zmin, z);
          zmax = std::max(zmax, z);
          ymin = std::min(ymin, y);
          ymax = std::max(ymax, y);
          xmin = std::min(xmin, x);
          xmax = std::max(xmax, x);
          for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
              for (int dx = -1; dx <= 1; ++dx) {
                if (dz == 0 && dy == 0 && dx == 0) continue;
                int nz = z + dz, ny = y + dy, nx = x + dx;
                if (nz < 0 || nz >= d.z || ny < 0 || ny >= d.y || nx < 0 || nx >= d.x) continue;
                std::size_t nidx = flat(nz, ny, nx);
                if (labels[nidx] && !visited[nidx]) {
                  visited[nidx] = 1;
                  stack.push_back(nidx);
                }
              }
        }
        double ext_z = double(zmax - zmin + 1) * double(spacing.z);
        double ext_y = double(ymax - ymin + 1) * double(spacing.y);
        double ext_x = double(xmax - xmin + 1) * double(spacing.x);
        best = std::max({best, ext_z, ext_y, ext_x});
      }
  return best;
}

struct CaseResult {
  std::string case_id;
  double dice = 0.0;
  double size_mm = 0.0;
  SizeGroup group = SizeGroup::none;
  Phase phase = Phase::unknown;
};

struct EvalReport {
  std::vector<CaseResult> cases;
  double mean_dice = 0.0;
  std::map<std::string, double> by_size;
  std::map<std::string, double> by_phase;
};

struct EvalCase {
  std::string case_id;
  SegmentationMask pred;
  SegmentationMask gt;
  Spacing spacing;
  Phase phase = Phase::unknown;
};

inline EvalReport evaluate(const std::vector<EvalCase>& cases) {
  require(!cases.empty(), Errc::empty_input, "no cases to evaluate");
  EvalReport report;
  std::map<std::string, std::pair<double, int>> size_acc, phase_acc;
  double total = 0.0;
  for (const auto& c : cases) {
    CaseResult r;
    r.case_id = c.case_id;
    r.dice = dice_per_case(c.pred, c.gt);
    r.size_mm = tumor_size_mm(c.gt, c.spacing);
    r.group = size_group(r.size_mm);
    r.phase = c.phase;
    total += r.dice;
    auto& sa = size_acc[size_group_name(r.group)];
    sa.first += r.dice;
    sa.second += 1;
    auto& pa = phase_acc[phase_name(r.phase)];
    pa.first += r.dice;
    pa.second += 1;
    report.cases.push_back(std::move(r));
  }
  report.mean_dice = total / double(cases.size());
  for (const auto& [name, acc] : size_acc) report.by_size[name] = acc.first / acc.second;
  for (const auto& [name, acc] : phase_acc) report.by_phase[name] = acc.first / acc.second;
  return report;
}

inline nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["cases"] = nlohmann::json::array();
  for (const auto& c : report.cases)
    j["cases"].push_back({{"case_id", c.case_id},
                          {"dice", c.dice},
                          {"tumor_size_mm", c.size_mm},
                          {"size_group", size_group_name(c.group)},
                          {"phase", phase_name(c.phase)}});
  j["mean_dice"] = report.mean_dice;
  j["by_size"] = report.by_size;
  j["by_phase"] = report.by_phase;
  return j;
}

inline std::string report_to_text(const EvalReport& report) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-12s %8s %12s %-8s %-9s\n", "case", "dice", "size_mm",
                "group", "phase");
  out += line;
  for (const auto& c : report.cases) {
    std::snprintf(line, sizeof(line), "%-12s %8.4f %12.2f %-8s %-9s\n", c.case_id.c_str(),
                  c.dice, c.size_mm, size_group_name(c.group), phase_name(c.phase));
    out += line;
  }
  std::snprintf(line, sizeof(line), "\nmean dice: %.4f\n", report.mean_dice);
  out += line;
  for (const auto& [name, mean] : report.by_size) {
    std::snprintf(line, sizeof(line), "size %-8s %8.4f\n", name.c_str(), mean);
    out += line;
  }
  for (const auto& [name, mean] : report.by_phase) {
    std::snprintf(line, sizeof(line), "phase %-9s %8.4f\n", name.c_str(), mean);
    out += line;
  }
  return out;
}

}  // namespace sfan
