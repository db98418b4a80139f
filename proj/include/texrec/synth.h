#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>

#include "texrec/image.h"
#include "texrec/mesh.h"
#include "texrec/sh.h"

namespace texrec {

/// Lat-long sphere with a duplicated seam column and pole fans; UVs cover
/// [0,1]^2 (u = azimuth, v = polar angle from +y).
Mesh make_uv_sphere(int rows, int cols, double radius);

/// Icosahedron unwrapped into the classic 22-vertex strip net, midpoint
/// subdivided `subdivisions` times with positions projected back to the
/// sphere. Seam vertices are duplicated, matching the atlas convention.
Mesh make_icosphere(int subdivisions, double radius);

Image make_checkerboard(int resolution, int cells,
                        const Eigen::Vector3d& a = {0.9, 0.25, 0.2},
                        const Eigen::Vector3d& b = {0.2, 0.5, 0.9});

struct SynthSpec {
  std::string shape = "sphere";  // "sphere" | "icosphere"
  int shape_detail = 16;         // sphere rows / icosphere subdivisions
  double radius = 0.4;
  Eigen::Vector3d center = {0.0, 0.0, 2.0};
  int frames = 8;
  int width = 256, height = 256;
  int uv_resolution = 256;
  int checker_cells = 8;
  std::string texture_file;  // overrides the checkerboard when set
  double rotation_per_frame_deg = 45.0;
  Eigen::Vector3d rotation_axis = Eigen::Vector3d::UnitY();
  /// A Gaussian bump (height in meters, width in UV units) displacing the
  /// ground-truth fine mesh along the surface normal, centered at the
  /// given UV. Zero height disables it (coarse == fine).
  double bump_height = 0.0;
  double bump_sigma_uv = 0.08;
  Eigen::Vector2d bump_center_uv = {0.25, 0.5};
  /// Seeded Gaussian noise (meters) on coarse vertices, scaled per frame
  /// by a random factor in [0.5, 1.5].
  double coarse_noise = 0.0;
  double head_cap_fraction = 0.15;  // top cap labeled as head
  uint64_t seed = 0;
  SHLight light;  // zero => a default white ambient+directional environment

  Eigen::Vector3d background = Eigen::Vector3d::Zero();
};

/// Renders a known textured, displaced mesh into a full scene directory
/// (frames, masks, coarse meshes, camera, light, atlas, groups, manifest)
/// plus ground truth under gt/ (fine meshes, displacement maps, texture).
void synth_scene(const SynthSpec& spec, const std::filesystem::path& out_dir);

/// Environment used when SynthSpec.light is all zeros.
SHLight default_synth_light();

}  // namespace texrec
