#pragma once

// Shared fixtures for the test suites: canonical meshes, cameras, and
// finite-difference helpers.

#include <Eigen/Dense>
#include <cmath>

#include "texrec/camera.h"
#include "texrec/mesh.h"
#include "texrec/rng.h"

namespace texrec::testutil {

inline Mesh single_triangle() {
  Mesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  m.uv = {{0, 0}, {1, 0}, {0, 1}};
  m.faces = {{0, 1, 2}};
  return m;
}

inline Mesh unit_square() {
  Mesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  m.uv = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

inline Mesh tetrahedron() {
  Mesh m;
  m.vertices = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
  m.uv = {{0.25, 0.25}, {0.75, 0.25}, {0.25, 0.75}, {0.75, 0.75}};
  m.faces = {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
  return m;
}

// Closed icosahedron (12 V, 30 E, 20 F); UVs are placeholders.
inline Mesh icosahedron() {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  Mesh m;
  m.vertices = {{-1, phi, 0}, {1, phi, 0},   {-1, -phi, 0}, {1, -phi, 0},
                {0, -1, phi}, {0, 1, phi},   {0, -1, -phi}, {0, 1, -phi},
                {phi, 0, -1}, {phi, 0, 1},   {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& v : m.vertices) v.normalize();
  m.uv.assign(12, Eigen::Vector2d(0.5, 0.5));
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  return m;
}

inline Camera look_at_z(int width, int height, double focal_scale = 1.75) {
  Camera cam;
  cam.width = width;
  cam.height = height;
  cam.fx = cam.fy = focal_scale * width;
  cam.cx = width / 2.0;
  cam.cy = height / 2.0;
  return cam;
}

inline Eigen::Matrix3d random_rotation(Rng& rng) {
  const Eigen::Vector3d axis =
      Eigen::Vector3d(rng.gaussian(), rng.gaussian(), rng.gaussian()).normalized();
  return Eigen::AngleAxisd(rng.uniform(0.0, 2.0 * M_PI), axis).toRotationMatrix();
}

inline bool rel_close(double a, double b, double rel, double abs_floor = 0.0) {
  const double diff = std::abs(a - b);
  if (diff <= abs_floor) return true;
  return diff <= rel * std::max(std::abs(a), std::abs(b));
}

}  // namespace texrec::testutil
