#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "monstereo/common.hpp"
#include "monstereo/geometry.hpp"
#include "monstereo/infer.hpp"
#include "monstereo/nn.hpp"
#include "monstereo/pairs.hpp"
#include "monstereo/scene.hpp"

namespace monstereo {

using json = nlohmann::json;

// ---- rig -------------------------------------------------------------

inline json rig_to_json(const StereoRig& rig) {
  return {{"baseline_m", rig.baseline_m}, {"focal_px", rig.focal_px},
          {"u0", rig.u0},                 {"v0", rig.v0},
          {"width", rig.width},           {"height", rig.height}};
}

inline StereoRig rig_from_json(const json& j) {
  StereoRig rig;
  try {
    rig.baseline_m = j.at("baseline_m").get<double>();
    rig.focal_px = j.at("focal_px").get<double>();
    rig.u0 = j.at("u0").get<double>();
    rig.v0 = j.at("v0").get<double>();
    rig.width = j.at("width").get<int>();
    rig.height = j.at("height").get<int>();
  } catch (const json::exception& e) {
    throw DataError(std::string("rig config: ") + e.what());
  }
  rig.validate();
  return rig;
}

// ---- keypoints / frames ------------------------------------------------

inline json keypoints_to_json(const KeypointSet& k) {
  json jx = json::array(), jy = json::array(), jv = json::array();
  for (int j = 0; j < kNumJoints; ++j) {
    jx.push_back(k.x[j]);
    jy.push_back(k.y[j]);
    jv.push_back(static_cast<int>(k.visible[j]));
  }
  return {{"x", jx}, {"y", jy}, {"v", jv}};
}

inline KeypointSet keypoints_from_json(const json& j, Eye eye) {
  KeypointSet k;
  k.eye = eye;
  const auto& jx = j.at("x");
  const auto& jy = j.at("y");
  const auto& jv = j.at("v");
  if (jx.size() != kNumJoints || jy.size() != kNumJoints ||
      jv.size() != kNumJoints)
    throw DataError("keypoints: expected 17 joints");
  for (int i = 0; i < kNumJoints; ++i) {
    if (jv[i].get<int>() != 0)
      k.set(i, jx[i].get<double>(), jy[i].get<double>());
    else
      k.set_invisible(i);
  }
  return k;
}

inline json frame_to_json(const FrameAnnotation& f) {
  json instances = json::array();
  for (std::size_t i = 0; i < f.instances.size(); ++i) {
    const auto& inst = f.instances[i];
    json ji{{"person_id", inst.person_id},
            {"center", {inst.center3d.x, inst.center3d.y, inst.center3d.z}},
            {"height_m", inst.height_m},
            {"visible_left", inst.visible_left},
            {"visible_right", inst.visible_right},
            {"occlusion_level", inst.occlusion_level}};
    ji["left_keypoints"] =
        f.left_keypoints[i] ? keypoints_to_json(*f.left_keypoints[i])
                            : json(nullptr);
    ji["right_keypoints"] =
        f.right_keypoints[i] ? keypoints_to_json(*f.right_keypoints[i])
                             : json(nullptr);
    instances.push_back(std::move(ji));
  }
  return {{"frame_id", f.frame_id}, {"instances", instances}};
}

inline FrameAnnotation frame_from_json(const json& j) {
  FrameAnnotation f;
  f.frame_id = j.at("frame_id").get<int>();
  for (const auto& ji : j.at("instances")) {
    SceneInstance inst;
    inst.person_id = ji.at("person_id").get<int>();
    const auto& c = ji.at("center");
    inst.center3d = {c.at(0).get<double>(), c.at(1).get<double>(),
                     c.at(2).get<double>()};
    inst.height_m = ji.at("height_m").get<double>();
    inst.visible_left = ji.at("visible_left").get<bool>();
    inst.visible_right = ji.at("visible_right").get<bool>();
    inst.occlusion_level = ji.at("occlusion_level").get<double>();
    f.instances.push_back(inst);
    const auto& lk = ji.at("left_keypoints");
    const auto& rk = ji.at("right_keypoints");
    f.left_keypoints.push_back(
        lk.is_null() ? std::nullopt
                     : std::optional(keypoints_from_json(lk, Eye::left)));
    f.right_keypoints.push_back(
        rk.is_null() ? std::nullopt
                     : std::optional(keypoints_from_json(rk, Eye::right)));
  }
  return f;
}

// ---- pair samples ------------------------------------------------------

inline json pair_to_json(const PairSample& p) {
  json feats = json::array();
  for (double v : p.features) feats.push_back(v);
  json j{{"frame_id", p.frame_id},
         {"features", feats},
         {"ism", p.ism_label},
         {"left_index", p.left_index},
         {"right_index", p.right_index},
         {"left_id", p.left_person_id},
         {"right_id", p.right_person_id},
         {"null_pair", p.is_null_pair},
         {"augmented", p.is_augmented},
         {"source_height_m", p.source_height_m}};
  j["gt"] = p.gt ? json{{"r", p.gt->r}, {"beta", p.gt->beta},
                        {"psi", p.gt->psi}}
                 : json(nullptr);
  return j;
}

inline PairSample pair_from_json(const json& j) {
  PairSample p;
  p.frame_id = j.at("frame_id").get<int>();
  const auto& feats = j.at("features");
  if (feats.size() != static_cast<std::size_t>(feat::kSize))
    throw DataError("pair: expected 68 features");
  for (int i = 0; i < feat::kSize; ++i) p.features[i] = feats[i].get<double>();
  p.ism_label = j.at("ism").get<int>();
  p.left_index = j.at("left_index").get<int>();
  p.right_index = j.at("right_index").get<int>();
  p.left_person_id = j.at("left_id").get<int>();
  p.right_person_id = j.at("right_id").get<int>();
  p.is_null_pair = j.at("null_pair").get<bool>();
  p.is_augmented = j.at("augmented").get<bool>();
  p.source_height_m = j.at("source_height_m").get<double>();
  const auto& gt = j.at("gt");
  if (!gt.is_null())
    p.gt = SphericalCoord{gt.at("r").get<double>(), gt.at("beta").get<double>(),
                          gt.at("psi").get<double>()};
  return p;
}

// ---- localizations -------------------------------------------------------

inline json localization_to_json(const Localization& l) {
  return {{"frame_id", l.frame_id},
          {"instance_id", l.instance_id},
          {"x", l.position.x},
          {"y", l.position.y},
          {"z", l.position.z},
          {"r", l.spherical.r},
          {"beta", l.spherical.beta},
          {"psi", l.spherical.psi},
          {"b", l.interval_halfwidth},
          {"ism", l.ism_score},
          {"mode", to_string(l.mode)},
          {"matched_right_id", l.selected_right_id}};
}

inline Localization localization_from_json(const json& j) {
  Localization l;
  l.frame_id = j.at("frame_id").get<int>();
  l.instance_id = j.at("instance_id").get<int>();
  l.position = {j.at("x").get<double>(), j.at("y").get<double>(),
                j.at("z").get<double>()};
  l.spherical = {j.at("r").get<double>(), j.at("beta").get<double>(),
                 j.at("psi").get<double>()};
  l.interval_halfwidth = j.at("b").get<double>();
  l.ism_score = j.at("ism").get<double>();
  const std::string mode = j.at("mode").get<std::string>();
  if (mode != "stereo" && mode != "mono")
    throw DataError("localization: mode must be stereo or mono");
  l.mode = mode == "stereo" ? LocalizationMode::stereo
                            : LocalizationMode::mono;
  l.selected_right_id = j.value("matched_right_id", -1);
  return l;
}

// ---- generic JSONL -----------------------------------------------------

template <typename T, typename FromJson>
std::vector<T> read_jsonl(const std::string& path, FromJson from_json) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<T> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(from_json(json::parse(line)));
    } catch (const DataError& e) {
      throw DataError(path + " line " + std::to_string(line_no) + ": " +
                      e.what());
    } catch (const json::exception& e) {
      throw DataError(path + " line " + std::to_string(line_no) + ": " +
                      e.what());
    }
  }
  return out;
}

template <typename T, typename ToJson>
void write_jsonl(const std::string& path, const std::vector<T>& items,
                 ToJson to_json) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  for (const T& item : items) out << to_json(item).dump() << '\n';
}

inline std::vector<FrameAnnotation> read_frames_jsonl(
    const std::string& path) {
  return read_jsonl<FrameAnnotation>(
      path, [](const json& j) { return frame_from_json(j); });
}

inline void write_frames_jsonl(const std::string& path,
                               const std::vector<FrameAnnotation>& frames) {
  write_jsonl(path, frames, [](const FrameAnnotation& f) {
    return frame_to_json(f);
  });
}

inline std::vector<PairSample> read_pairs_jsonl(const std::string& path) {
  return read_jsonl<PairSample>(
      path, [](const json& j) { return pair_from_json(j); });
}

inline void write_pairs_jsonl(const std::string& path,
                              const std::vector<PairSample>& pairs) {
  write_jsonl(path, pairs, [](const PairSample& p) { return pair_to_json(p); });
}

inline std::vector<Localization> read_localizations_jsonl(
    const std::string& path) {
  return read_jsonl<Localization>(
      path, [](const json& j) { return localization_from_json(j); });
}

inline void write_localizations_jsonl(const std::string& path,
                                      const std::vector<Localization>& locs) {
  write_jsonl(path, locs, [](const Localization& l) {
    return localization_to_json(l);
  });
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline void save_json_file(const std::string& path, const json& j,
                           int indent = 2) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(indent) << '\n';
}

// ---- checkpoints ---------------------------------------------------------

inline json matrix_to_json(const Matrix& m) {
  json data = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

inline Matrix matrix_from_json(const json& j) {
  const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw DataError("matrix: data length mismatch");
  Matrix m(rows, cols);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index jj = 0; jj < cols; ++jj) m(i, jj) = data[k++].get<double>();
  return m;
}

inline constexpr int kCheckpointVersion = 1;

inline json network_to_json(Network& net, const std::string& config_hash) {
  json params = json::object();
  for (ParamTensor* p : net.parameters())
    params[p->name] = matrix_to_json(p->value);
  json buffers = json::object();
  for (auto& [name, m] : net.buffers()) buffers[name] = matrix_to_json(*m);
  return {{"format_version", kCheckpointVersion},
          {"spec",
           {{"input_dim", net.spec().input_dim},
            {"output_dim", net.spec().output_dim},
            {"hidden", net.spec().hidden},
            {"num_blocks", net.spec().num_blocks},
            {"dropout", net.spec().dropout}}},
          {"params", params},
          {"buffers", buffers},
          {"config_hash", config_hash}};
}

inline Network network_from_json(const json& j) {
  if (j.at("format_version").get<int>() != kCheckpointVersion)
    throw DataError("checkpoint: unsupported format version");
  const auto& js = j.at("spec");
  NetworkSpec spec;
  spec.input_dim = js.at("input_dim").get<int>();
  spec.output_dim = js.at("output_dim").get<int>();
  spec.hidden = js.at("hidden").get<int>();
  spec.num_blocks = js.at("num_blocks").get<int>();
  spec.dropout = js.at("dropout").get<double>();
  Network net(spec, 0);
  const auto& params = j.at("params");
  for (ParamTensor* p : net.parameters()) {
    if (!params.contains(p->name))
      throw DataError("checkpoint: missing parameter " + p->name);
    Matrix m = matrix_from_json(params.at(p->name));
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols())
      throw DataError("checkpoint: shape mismatch for " + p->name);
    p->value = m;
  }
  const auto& buffers = j.at("buffers");
  for (auto& [name, m] : net.buffers()) {
    if (!buffers.contains(name))
      throw DataError("checkpoint: missing buffer " + name);
    *m = matrix_from_json(buffers.at(name));
  }
  return net;
}

inline void save_checkpoint(const std::string& path, Network& net,
                            const std::string& config_hash) {
  save_json_file(path, network_to_json(net, config_hash), -1);
}

inline Network load_checkpoint(const std::string& path) {
  return network_from_json(load_json_file(path));
}

}  // namespace monstereo
