#include "texrec/scene.h"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "texrec/png_io.h"

namespace texrec {

namespace fs = std::filesystem;

std::string frame_name(int index, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06d.%s", index, ext);
  return buf;
}

std::string SceneManifest::frame_path(int i) const {
  return (root / frames_dir / frame_name(i, "png")).string();
}
std::string SceneManifest::mask_path(int i) const {
  return (root / masks_dir / frame_name(i, "png")).string();
}
std::string SceneManifest::conf_path(int i) const {
  return (root / conf_dir / frame_name(i, "png")).string();
}
std::string SceneManifest::coarse_path(int i) const {
  return (root / coarse_dir / frame_name(i, "obj")).string();
}
bool SceneManifest::has_confidence() const { return fs::exists(root / conf_dir); }

SceneManifest SceneManifest::load(const fs::path& dir) {
  const fs::path file = dir / "manifest.json";
  std::ifstream in(file);
  if (!in) throw ManifestError("manifest: cannot open " + file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ManifestError("manifest: parse error in " + file.string() + ": " + e.what());
  }

  SceneManifest m;
  m.root = dir;
  m.frame_count = j.at("frames").get<int>();
  m.width = j.at("width").get<int>();
  m.height = j.at("height").get<int>();
  m.srgb = j.value("srgb", false);
  m.frames_dir = j.value("frames_dir", m.frames_dir);
  m.masks_dir = j.value("masks_dir", m.masks_dir);
  m.conf_dir = j.value("conf_dir", m.conf_dir);
  m.coarse_dir = j.value("coarse_dir", m.coarse_dir);
  m.camera_file = j.value("camera", m.camera_file);
  m.light_file = j.value("light", m.light_file);
  m.atlas_file = j.value("atlas", m.atlas_file);
  m.groups_file = j.value("groups", m.groups_file);
  m.rest_pose_file = j.value("rest_pose", std::string());
  m.check_files();
  return m;
}

void SceneManifest::save() const {
  nlohmann::ordered_json j;
  j["frames"] = frame_count;
  j["width"] = width;
  j["height"] = height;
  j["srgb"] = srgb;
  j["frames_dir"] = frames_dir;
  j["masks_dir"] = masks_dir;
  j["conf_dir"] = conf_dir;
  j["coarse_dir"] = coarse_dir;
  j["camera"] = camera_file;
  j["light"] = light_file;
  j["atlas"] = atlas_file;
  j["groups"] = groups_file;
  if (!rest_pose_file.empty()) j["rest_pose"] = rest_pose_file;
  std::ofstream out(root / "manifest.json");
  if (!out) throw std::runtime_error("manifest: cannot write " + (root / "manifest.json").string());
  out << j.dump(2) << "\n";
}

void SceneManifest::check_files() const {
  auto require = [](const std::string& p, const std::string& what) {
    if (!fs::exists(p)) throw ManifestError("manifest: missing " + what + ": " + p);
  };
  require((root / camera_file).string(), "camera file");
  require((root / light_file).string(), "light file");
  require((root / atlas_file).string(), "atlas mesh");
  require((root / groups_file).string(), "vertex groups");
  if (!rest_pose_file.empty()) require((root / rest_pose_file).string(), "rest pose mesh");
  const bool conf = has_confidence();
  for (int i = 0; i < frame_count; ++i) {
    require(frame_path(i), "frame " + std::to_string(i));
    require(mask_path(i), "mask for frame " + std::to_string(i));
    require(coarse_path(i), "coarse mesh for frame " + std::to_string(i));
    if (conf) require(conf_path(i), "confidence for frame " + std::to_string(i));
  }
}

namespace {

double srgb_to_linear(double v) {
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

}  // namespace

Scene Scene::load(const fs::path& dir) {
  Scene s;
  s.manifest = SceneManifest::load(dir);
  s.camera = Camera::load_json((dir / s.manifest.camera_file).string());
  if (s.camera.width != s.manifest.width || s.camera.height != s.manifest.height)
    throw ManifestError("manifest: camera resolution differs from manifest resolution");
  s.light = SHLight::load_json((dir / s.manifest.light_file).string());
  s.atlas = read_obj((dir / s.manifest.atlas_file).string());
  s.atlas.validate();
  s.groups = load_groups_json((dir / s.manifest.groups_file).string(), s.atlas.vertex_count());
  s.rest_pose = s.manifest.rest_pose_file.empty()
                    ? read_obj(s.manifest.coarse_path(0))
                    : read_obj((dir / s.manifest.rest_pose_file).string());
  return s;
}

FrameBundle Scene::load_frame(int i) const {
  if (i < 0 || i >= manifest.frame_count)
    throw ManifestError("scene: frame index out of range: " + std::to_string(i));
  FrameBundle f;
  f.index = i;
  f.image = read_png(manifest.frame_path(i));
  if (manifest.srgb)
    for (size_t k = 0; k < f.image.size(); ++k)
      f.image.data()[k] = srgb_to_linear(f.image.data()[k]);
  Image mask = read_png(manifest.mask_path(i));
  f.mask = Image(mask.height(), mask.width(), 1);
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) f.mask.at(y, x, 0) = mask.at(y, x, 0) > 0.5 ? 1.0 : 0.0;
  if (manifest.has_confidence()) {
    Image conf = read_png(manifest.conf_path(i));
    f.confidence = Image(conf.height(), conf.width(), 1);
    for (int y = 0; y < conf.height(); ++y)
      for (int x = 0; x < conf.width(); ++x) f.confidence.at(y, x, 0) = conf.at(y, x, 0);
  } else {
    f.confidence = Image(f.mask.height(), f.mask.width(), 1, 1.0);
  }
  f.coarse = read_obj(manifest.coarse_path(i));
  if (f.image.height() != manifest.height || f.image.width() != manifest.width)
    throw ManifestError("scene: frame " + std::to_string(i) + " resolution mismatch");
  if (!f.mask.same_shape(Image(manifest.height, manifest.width, 1)))
    throw ManifestError("scene: mask " + std::to_string(i) + " resolution mismatch");
  return f;
}

std::vector<BodyGroup> load_groups_json(const std::string& path, int vertex_count) {
  std::ifstream in(path);
  if (!in) throw ManifestError("groups: cannot open " + path);
  nlohmann::json j;
  in >> j;
  std::vector<BodyGroup> groups(vertex_count, BodyGroup::kBody);
  auto assign = [&](const char* key, BodyGroup g) {
    if (!j.contains(key)) return;
    for (const auto& idx : j.at(key)) {
      const int i = idx.get<int>();
      if (i < 0 || i >= vertex_count)
        throw ManifestError("groups: vertex index out of range in " + path);
      groups[i] = g;
    }
  };
  assign("head", BodyGroup::kHead);
  assign("hand", BodyGroup::kHand);
  return groups;
}

void save_groups_json(const std::string& path, const std::vector<BodyGroup>& groups) {
  std::vector<int> head, hand;
  for (size_t i = 0; i < groups.size(); ++i) {
    if (groups[i] == BodyGroup::kHead) head.push_back(static_cast<int>(i));
    if (groups[i] == BodyGroup::kHand) hand.push_back(static_cast<int>(i));
  }
  nlohmann::ordered_json j;
  j["head"] = head;
  j["hand"] = hand;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("groups: cannot write " + path);
  out << j.dump(2) << "\n";
}

std::vector<BodyGroup> derive_fine_groups(const TwoLevelMesh& levels,
                                          const std::vector<BodyGroup>& coarse_groups) {
  if (coarse_groups.size() != levels.coarse.vertices.size())
    throw std::invalid_argument("derive_fine_groups: group count mismatch");
  std::vector<BodyGroup> fine(levels.fine.vertices.size(), BodyGroup::kBody);
  std::copy(coarse_groups.begin(), coarse_groups.end(), fine.begin());
  for (const auto& [edge, mid] : levels.edge_midpoint) {
    const BodyGroup a = coarse_groups[edge.first];
    const BodyGroup b = coarse_groups[edge.second];
    fine[mid] = (a == b) ? a : BodyGroup::kBody;
  }
  return fine;
}

}  // namespace texrec
