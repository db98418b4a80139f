#include "texrec/synth.h"

#include <cmath>
#include <filesystem>

#include "texrec/camera.h"
#include "texrec/meshref.h"
#include "texrec/metrics.h"
#include "texrec/png_io.h"
#include "texrec/rng.h"
#include "texrec/scene.h"
#include "texrec/uv_map.h"

namespace texrec {

namespace fs = std::filesystem;

namespace {

// Flip faces whose normal points into the sphere so every generated mesh
// is consistently outward-wound.
void orient_outward(Mesh& mesh) {
  for (auto& f : mesh.faces) {
    const Eigen::Vector3d c =
        (mesh.vertices[f[0]] + mesh.vertices[f[1]] + mesh.vertices[f[2]]) / 3.0;
    const Eigen::Vector3d n = (mesh.vertices[f[1]] - mesh.vertices[f[0]])
                                  .cross(mesh.vertices[f[2]] - mesh.vertices[f[0]]);
    if (n.dot(c) < 0.0) std::swap(f[1], f[2]);
  }
}

Eigen::Vector3d sphere_point(double polar, double azimuth, double radius) {
  return {radius * std::sin(polar) * std::cos(azimuth), radius * std::cos(polar),
          radius * std::sin(polar) * std::sin(azimuth)};
}

}  // namespace

Mesh make_uv_sphere(int rows, int cols, double radius) {
  if (rows < 3 || cols < 3) throw std::invalid_argument("make_uv_sphere: too few segments");
  Mesh mesh;
  // ring vertices, rows 1..rows-1, with a duplicated seam column
  std::vector<std::vector<int>> ring(rows + 1);
  for (int r = 1; r < rows; ++r) {
    ring[r].resize(cols + 1);
    for (int j = 0; j <= cols; ++j) {
      ring[r][j] = mesh.vertex_count();
      mesh.vertices.push_back(
          sphere_point(M_PI * r / rows, 2.0 * M_PI * (j % cols) / cols, radius));
      mesh.uv.push_back({static_cast<double>(j) / cols, static_cast<double>(r) / rows});
    }
  }
  std::vector<int> top(cols), bottom(cols);
  for (int j = 0; j < cols; ++j) {
    top[j] = mesh.vertex_count();
    mesh.vertices.push_back({0.0, radius, 0.0});
    mesh.uv.push_back({(j + 0.5) / cols, 0.0});
    bottom[j] = mesh.vertex_count();
    mesh.vertices.push_back({0.0, -radius, 0.0});
    mesh.uv.push_back({(j + 0.5) / cols, 1.0});
  }
  for (int j = 0; j < cols; ++j) {
    mesh.faces.push_back({top[j], ring[1][j], ring[1][j + 1]});
    mesh.faces.push_back({bottom[j], ring[rows - 1][j + 1], ring[rows - 1][j]});
  }
  for (int r = 1; r < rows - 1; ++r)
    for (int j = 0; j < cols; ++j) {
      mesh.faces.push_back({ring[r][j], ring[r + 1][j], ring[r + 1][j + 1]});
      mesh.faces.push_back({ring[r][j], ring[r + 1][j + 1], ring[r][j + 1]});
    }
  orient_outward(mesh);
  mesh.validate();
  return mesh;
}

Mesh make_icosphere(int subdivisions, double radius) {
  Mesh mesh;
  const double polar_up = std::atan(2.0);  // upper ring polar angle from +y
  const double polar_lo = M_PI - polar_up;
  const double su = 1.0 / 1.1;  // compress the strip net into u in [0,1]
  std::vector<int> pole_top(5), upper(6), lower(6), pole_bot(5);
  for (int i = 0; i < 5; ++i) {
    pole_top[i] = mesh.vertex_count();
    mesh.vertices.push_back({0.0, radius, 0.0});
    mesh.uv.push_back({su * (2.0 * i + 1.0) / 10.0, 0.0});
  }
  for (int i = 0; i < 6; ++i) {
    upper[i] = mesh.vertex_count();
    mesh.vertices.push_back(sphere_point(polar_up, 2.0 * M_PI * (i % 5) / 5.0, radius));
    mesh.uv.push_back({su * i / 5.0, 1.0 / 3.0});
  }
  for (int i = 0; i < 6; ++i) {
    lower[i] = mesh.vertex_count();
    mesh.vertices.push_back(
        sphere_point(polar_lo, 2.0 * M_PI * (i % 5) / 5.0 + M_PI / 5.0, radius));
    mesh.uv.push_back({su * (i / 5.0 + 0.1), 2.0 / 3.0});
  }
  for (int i = 0; i < 5; ++i) {
    pole_bot[i] = mesh.vertex_count();
    mesh.vertices.push_back({0.0, -radius, 0.0});
    mesh.uv.push_back({su * (2.0 * i + 2.0) / 10.0, 1.0});
  }
  for (int i = 0; i < 5; ++i) {
    mesh.faces.push_back({pole_top[i], upper[i], upper[i + 1]});
    mesh.faces.push_back({upper[i], lower[i], upper[i + 1]});
    mesh.faces.push_back({upper[i + 1], lower[i], lower[i + 1]});
    mesh.faces.push_back({pole_bot[i], lower[i + 1], lower[i]});
  }
  for (int s = 0; s < subdivisions; ++s) mesh = subdivide(mesh).fine;
  for (auto& v : mesh.vertices) v = v.normalized() * radius;
  orient_outward(mesh);
  mesh.validate();
  return mesh;
}

Image make_checkerboard(int resolution, int cells, const Eigen::Vector3d& a,
                        const Eigen::Vector3d& b) {
  Image tex(resolution, resolution, 3);
  for (int y = 0; y < resolution; ++y)
    for (int x = 0; x < resolution; ++x) {
      const int cell = (x * cells / resolution + y * cells / resolution) % 2;
      const Eigen::Vector3d& c = cell ? a : b;
      for (int ch = 0; ch < 3; ++ch) tex.at(y, x, ch) = c[ch];
    }
  return tex;
}

SHLight default_synth_light() {
  SHLight light;
  const double channel_scale[3] = {1.0, 0.98, 0.95};
  for (int c = 0; c < 3; ++c) {
    light.coeffs(c, 0) = 0.8 * channel_scale[c];
    light.coeffs(c, 1) = 0.10;   // y
    light.coeffs(c, 2) = -0.30;  // z, toward the camera
    light.coeffs(c, 3) = -0.12;  // x
    light.coeffs(c, 4) = 0.05;
    light.coeffs(c, 6) = 0.04;
    light.coeffs(c, 8) = 0.03;
  }
  return light;
}

void synth_scene(const SynthSpec& spec, const fs::path& out_dir) {
  fs::create_directories(out_dir / "frames");
  fs::create_directories(out_dir / "masks");
  fs::create_directories(out_dir / "coarse");
  fs::create_directories(out_dir / "gt" / "fine");
  fs::create_directories(out_dir / "gt" / "disp");

  // Object-space coarse mesh, subdivision, and ground-truth displacement.
  const Mesh atlas = spec.shape == "icosphere"
                         ? make_icosphere(spec.shape_detail, spec.radius)
                         : make_uv_sphere(spec.shape_detail, spec.shape_detail * 3 / 2,
                                          spec.radius);
  const TwoLevelMesh levels = subdivide(atlas);
  const UvLookup lookup = uv_lookup_table(levels.fine, spec.uv_resolution);

  Image texture = spec.texture_file.empty()
                      ? make_checkerboard(spec.uv_resolution, spec.checker_cells)
                      : read_png(spec.texture_file);

  // Bump displacement along the object-space surface normal.
  Image disp_obj(spec.uv_resolution, spec.uv_resolution, 3);
  if (spec.bump_height != 0.0) {
    const auto normals = vertex_normals(levels.fine);
    for (int ty = 0; ty < spec.uv_resolution; ++ty)
      for (int tx = 0; tx < spec.uv_resolution; ++tx) {
        const int f = lookup.face_at(ty, tx);
        if (f < 0) continue;
        const double u = (tx + 0.5) / spec.uv_resolution;
        const double v = (ty + 0.5) / spec.uv_resolution;
        const double du = u - spec.bump_center_uv.x();
        const double dv = v - spec.bump_center_uv.y();
        const double h = spec.bump_height *
                         std::exp(-0.5 * (du * du + dv * dv) /
                                  (spec.bump_sigma_uv * spec.bump_sigma_uv));
        if (h < 1e-6 * std::abs(spec.bump_height)) continue;
        const auto& b = lookup.bary_at(ty, tx);
        const auto& fc = levels.fine.faces[f];
        const Eigen::Vector3d n =
            (b[0] * normals[fc[0]] + b[1] * normals[fc[1]] + b[2] * normals[fc[2]]).normalized();
        for (int c = 0; c < 3; ++c) disp_obj.at(ty, tx, c) = h * n[c];
      }
  }

  Camera camera;
  camera.width = spec.width;
  camera.height = spec.height;
  camera.fx = camera.fy = 1.75 * spec.width;
  camera.cx = spec.width / 2.0;
  camera.cy = spec.height / 2.0;

  SHLight light = spec.light;
  if (light.coeffs.isZero()) light = default_synth_light();

  Rng rng(spec.seed);
  const double d_max_store = 0.15;

  for (int k = 0; k < spec.frames; ++k) {
    const double angle = spec.rotation_per_frame_deg * M_PI / 180.0 * k;
    const Eigen::Matrix3d rot =
        Eigen::AngleAxisd(angle, spec.rotation_axis.normalized()).toRotationMatrix();

    // Ground-truth fine mesh: displaced object mesh posed into the world.
    Mesh fine = levels.fine;
    {
      std::vector<Eigen::Vector3d> displaced =
          displaced_positions(levels.fine.vertices, levels.fine.uv, disp_obj);
      for (size_t i = 0; i < displaced.size(); ++i)
        fine.vertices[i] = spec.center + rot * displaced[i];
    }

    Mesh coarse = atlas;
    const double noise_scale = spec.coarse_noise > 0.0 ? rng.uniform(0.5, 1.5) : 0.0;
    for (size_t i = 0; i < coarse.vertices.size(); ++i) {
      Eigen::Vector3d v = spec.center + rot * atlas.vertices[i];
      if (noise_scale > 0.0)
        v += noise_scale * spec.coarse_noise *
             Eigen::Vector3d(rng.gaussian(), rng.gaussian(), rng.gaussian());
      coarse.vertices[i] = v;
    }

    Image mask;
    const Image frame = render_textured_hard(fine, camera, texture, light, spec.background, &mask);
    write_png((out_dir / "frames" / frame_name(k, "png")).string(), frame, 8);
    write_png((out_dir / "masks" / frame_name(k, "png")).string(), mask, 8);
    write_obj((out_dir / "coarse" / frame_name(k, "obj")).string(), coarse);
    write_obj((out_dir / "gt" / "fine" / frame_name(k, "obj")).string(), fine);

    Image disp_world = Image::zeros_like(disp_obj);
    for (int ty = 0; ty < disp_obj.height(); ++ty)
      for (int tx = 0; tx < disp_obj.width(); ++tx) {
        const Eigen::Vector3d d(disp_obj.at(ty, tx, 0), disp_obj.at(ty, tx, 1),
                                disp_obj.at(ty, tx, 2));
        const Eigen::Vector3d dw = rot * d;
        for (int c = 0; c < 3; ++c) disp_world.at(ty, tx, c) = dw[c];
      }
    save_displacement_png((out_dir / "gt" / "disp" / frame_name(k, "png")).string(),
                          disp_world, d_max_store);
  }

  write_obj((out_dir / "atlas.obj").string(), atlas);
  write_png((out_dir / "gt" / "texture.png").string(), texture, 8);
  camera.save_json((out_dir / "camera.json").string());
  light.save_json((out_dir / "light.json").string());

  // Head: the top cap of the object (rotation keeps it near the pole for
  // the default y axis).
  std::vector<BodyGroup> groups(atlas.vertex_count(), BodyGroup::kBody);
  const double head_y = spec.radius * (1.0 - 2.0 * spec.head_cap_fraction);
  for (int i = 0; i < atlas.vertex_count(); ++i)
    if (atlas.vertices[i].y() > head_y) groups[i] = BodyGroup::kHead;
  save_groups_json((out_dir / "groups.json").string(), groups);

  SceneManifest manifest;
  manifest.root = out_dir;
  manifest.frame_count = spec.frames;
  manifest.width = spec.width;
  manifest.height = spec.height;
  manifest.save();
}

}  // namespace texrec
