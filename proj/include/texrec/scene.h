#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "texrec/camera.h"
#include "texrec/image.h"
#include "texrec/mesh.h"
#include "texrec/meshref.h"
#include "texrec/sh.h"

namespace texrec {

/// Raised for missing or inconsistent scene inputs (CLI exit code 2).
struct ManifestError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One time step of the input sequence.
struct FrameBundle {
  Image image;
  Image mask;
  Image confidence;
  Mesh coarse;
  int index = 0;
};

/// Scene directory description (manifest.json). Layout:
/// frames/%06d.png, masks/%06d.png, conf/%06d.png (optional),
/// coarse/%06d.obj, camera.json, light.json, groups.json, atlas.obj,
/// optional rest.obj.
struct SceneManifest {
  std::filesystem::path root;
  int frame_count = 0;
  int width = 0, height = 0;
  bool srgb = false;
  std::string frames_dir = "frames";
  std::string masks_dir = "masks";
  std::string conf_dir = "conf";
  std::string coarse_dir = "coarse";
  std::string camera_file = "camera.json";
  std::string light_file = "light.json";
  std::string atlas_file = "atlas.obj";
  std::string groups_file = "groups.json";
  std::string rest_pose_file;  // empty: first coarse frame is the rest pose

  static SceneManifest load(const std::filesystem::path& dir);
  void save() const;

  std::string frame_path(int i) const;
  std::string mask_path(int i) const;
  std::string conf_path(int i) const;
  std::string coarse_path(int i) const;
  bool has_confidence() const;

  /// Verifies every referenced file exists; throws ManifestError naming
  /// the first missing one.
  void check_files() const;
};

/// Loaded scene-wide inputs (per-frame data loads on demand).
struct Scene {
  SceneManifest manifest;
  Camera camera;
  SHLight light;
  Mesh atlas;
  std::vector<BodyGroup> groups;  // per atlas vertex
  Mesh rest_pose;

  static Scene load(const std::filesystem::path& dir);
  FrameBundle load_frame(int i) const;
};

std::vector<BodyGroup> load_groups_json(const std::string& path, int vertex_count);
void save_groups_json(const std::string& path, const std::vector<BodyGroup>& groups);

/// Labels for the subdivided mesh: a midpoint inherits head/hand only when
/// both edge endpoints carry that label.
std::vector<BodyGroup> derive_fine_groups(const TwoLevelMesh& levels,
                                          const std::vector<BodyGroup>& coarse_groups);

/// Frame filename of the form 000042.png.
std::string frame_name(int index, const char* ext);

}  // namespace texrec
