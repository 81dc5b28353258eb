#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfan/errors.hpp"
#include "sfan/model.hpp"
#include "sfan/params.hpp"
#include "sfan/volume_io.hpp"

namespace sfan {

struct Checkpoint {
  ModelConfig config;
  ParamStore<float> params;
};

namespace detail {

// Checkpoints are a "<base>.json" manifest plus "<base>.bin" payload; accept
// either the base or the .json path.
inline fs::path checkpoint_base(const fs::path& path) {
  if (path.extension() == ".json" || path.extension() == ".bin") {
    fs::path p = path;
    p.replace_extension();
    return p;
  }
  return path;
}

}  // namespace detail

inline void save_checkpoint(const fs::path& path, const ModelConfig& cfg,
                            const ParamStore<float>& params) {
  cfg.validate();
  fs::path base = detail::checkpoint_base(path);
  nlohmann::json manifest;
  manifest["model"] = cfg;
  manifest["params"] = nlohmann::json::array();
  std::vector<float> payload;
  payload.reserve(params.scalar_count());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = params.tensor(i);
    manifest["params"].push_back(
        {{"name", params.name(i)}, {"shape", {t.n(), t.c(), t.h(), t.w()}}});
    payload.insert(payload.end(), t.raw().begin(), t.raw().end());
  }
  std::string text = manifest.dump(2);
  text.push_back('\n');
  fs::path json_path = base;
  json_path += ".json";
  detail::write_file_bytes(json_path, text.data(), text.size());
  detail::to_le(payload);
  fs::path bin_path = base;
  bin_path += ".bin";
  detail::write_file_bytes(bin_path, payload.data(), payload.size() * sizeof(float));
}

inline Checkpoint load_checkpoint(const fs::path& path) {
  fs::path base = detail::checkpoint_base(path);
  fs::path json_path = base;
  json_path += ".json";
  fs::path bin_path = base;
  bin_path += ".bin";
  if (!fs::exists(json_path)) fail(Errc::missing_file, "no such file: '" + json_path.string() + "'");
  auto bytes = detail::read_file_bytes(json_path);
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::corrupt_header, "cannot parse '" + json_path.string() + "': " + e.what());
  }

  Checkpoint ckpt;
  std::vector<std::pair<std::string, ParamShape>> listed;
  try {
    ckpt.config = manifest.at("model").get<ModelConfig>();
    for (const auto& entry : manifest.at("params")) {
      auto shape = entry.at("shape");
      require(shape.is_array() && shape.size() == 4, Errc::corrupt_header,
              "parameter shape must have 4 entries in '" + json_path.string() + "'");
      listed.emplace_back(entry.at("name").get<std::string>(),
                          ParamShape{shape.at(0).get<int>(), shape.at(1).get<int>(),
                                     shape.at(2).get<int>(), shape.at(3).get<int>(), false});
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::corrupt_header, "bad checkpoint manifest '" + json_path.string() + "': " + e.what());
  }
  ckpt.config.validate();

  // The manifest must list exactly the parameters this architecture defines,
  // in definition order.
  std::size_t cursor = 0;
  for_each_param(ckpt.config, [&](const std::string& name, ParamShape s) {
    require(cursor < listed.size(), Errc::corrupt_header,
            "checkpoint '" + json_path.string() + "' is missing parameter '" + name + "'");
    const auto& [lname, ls] = listed[cursor];
    require(lname == name && ls.n == s.n && ls.c == s.c && ls.h == s.h && ls.w == s.w,
            Errc::corrupt_header, "checkpoint '" + json_path.string() + "' lists '" + lname +
                                      "' where the architecture defines '" + name + "'");
    ++cursor;
  });
  require(cursor == listed.size(), Errc::corrupt_header,
          "checkpoint '" + json_path.string() + "' lists surplus parameters");

  if (!fs::exists(bin_path)) fail(Errc::missing_file, "no such file: '" + bin_path.string() + "'");
  auto payload = detail::read_file_bytes(bin_path);
  std::size_t offset = 0;
  for (const auto& [name, s] : listed) {
    std::size_t count = std::size_t(s.n) * s.c * s.h * s.w;
    require(offset + count * 4 <= payload.size(), Errc::corrupt_payload,
            "checkpoint payload '" + bin_path.string() + "' is too short");
    std::vector<float> values(count);
    std::memcpy(values.data(), payload.data() + offset, count * 4);
    detail::from_le(values);
    ckpt.params.add(name, Tensor4<float>(s.n, s.c, s.h, s.w, std::move(values)));
    offset += count * 4;
  }
  require(offset == payload.size(), Errc::corrupt_payload,
          "checkpoint payload '" + bin_path.string() + "' holds trailing bytes");
  return ckpt;
}

}  // namespace sfan
