#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "texrec/raster.h"
#include "texrec/rng.h"
#include "texrec/synth.h"
#include "test_util.h"

using namespace texrec;
using testutil::look_at_z;
using testutil::random_rotation;

namespace {

// Moller-Trumbore intersection; returns t or a negative value on miss.
double ray_triangle(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                    const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                    const Eigen::Vector3d& c) {
  const Eigen::Vector3d e1 = b - a, e2 = c - a;
  const Eigen::Vector3d p = dir.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-14) return -1.0;
  const double inv = 1.0 / det;
  const Eigen::Vector3d t = origin - a;
  const double u = t.dot(p) * inv;
  if (u < 0.0 || u > 1.0) return -1.0;
  const Eigen::Vector3d q = t.cross(e1);
  const double v = dir.dot(q) * inv;
  if (v < 0.0 || u + v > 1.0) return -1.0;
  return e2.dot(q) * inv;
}

// First face hit along the ray through a pixel center, or -1.
int first_hit(const Mesh& mesh, const Camera& cam, int px, int py, double* t_out = nullptr) {
  const Eigen::Vector3d origin = cam.center();
  // pixel center back-projected to a direction in world space
  const Eigen::Vector3d dir_cam((px + 0.5 - cam.cx) / cam.fx, (py + 0.5 - cam.cy) / cam.fy, 1.0);
  const Eigen::Vector3d dir = cam.rotation.transpose() * dir_cam;
  int best = -1;
  double best_t = std::numeric_limits<double>::max();
  for (int f = 0; f < mesh.face_count(); ++f) {
    const auto& fc = mesh.faces[f];
    const double t = ray_triangle(origin, dir, mesh.vertices[fc[0]], mesh.vertices[fc[1]],
                                  mesh.vertices[fc[2]]);
    if (t > 0.0 && t < best_t) {
      best_t = t;
      best = f;
    }
  }
  if (t_out) *t_out = best_t;
  return best;
}

Mesh fullscreen_triangle() {
  Mesh m;
  m.vertices = {{-8, -8, 2}, {8, -8, 2}, {0, 12, 2}};
  m.uv = {{0, 0}, {1, 0}, {0.5, 1}};
  m.faces = {{0, 1, 2}};
  return m;
}

}  // namespace

TEST_CASE("hard raster: fullscreen triangle reads the constant attribute") {
  const Mesh m = fullscreen_triangle();
  const Camera cam = look_at_z(32, 32, 0.5);
  std::vector<double> attr(m.vertex_count(), 0.7);
  const RasterOutput out = rasterize_hard(m, cam, attr, 1);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      REQUIRE(out.face_at(y, x) == 0);
      CHECK(out.color.at(y, x, 0) == doctest::Approx(0.7));
      CHECK(out.silhouette.at(y, x, 0) == 1.0);
    }
}

TEST_CASE("hard raster: nearer of two stacked triangles wins everywhere") {
  Mesh m = fullscreen_triangle();
  // same footprint, farther
  const int base = m.vertex_count();
  for (const auto& v : fullscreen_triangle().vertices)
    m.vertices.push_back(v + Eigen::Vector3d(0, 0, 1.0));
  m.uv.insert(m.uv.end(), {{0, 0}, {1, 0}, {0.5, 1}});
  m.faces.push_back({base, base + 1, base + 2});

  const Camera cam = look_at_z(16, 16, 0.5);
  const RasterOutput out = rasterize_hard(m, cam);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) CHECK(out.face_at(y, x) == 0);
}

TEST_CASE("hard raster: equal-depth tie keeps the lower face index") {
  Mesh m = fullscreen_triangle();
  const int base = m.vertex_count();
  for (const auto& v : fullscreen_triangle().vertices) m.vertices.push_back(v);
  m.uv.insert(m.uv.end(), {{0, 0}, {1, 0}, {0.5, 1}});
  m.faces.push_back({base, base + 1, base + 2});
  const Camera cam = look_at_z(8, 8, 0.5);
  const RasterOutput out = rasterize_hard(m, cam);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) CHECK(out.face_at(y, x) == 0);
}

TEST_CASE("hard raster: per-pixel hits match brute-force ray casting") {
  Rng rng(99);
  for (int trial = 0; trial < 3; ++trial) {
    Mesh sphere = make_icosphere(1, 0.5);
    const Eigen::Matrix3d r = random_rotation(rng);
    for (auto& v : sphere.vertices) v = r * v + Eigen::Vector3d(0, 0, 2.0);

    const Camera cam = look_at_z(48, 48);
    const RasterOutput out = rasterize_hard(sphere, cam);
    int checked = 0;
    for (int y = 0; y < 48; ++y)
      for (int x = 0; x < 48; ++x) {
        double t;
        const int oracle = first_hit(sphere, cam, x, y, &t);
        // Skip pixels whose ray grazes a shared edge; the oracle and the
        // rasterizer may legitimately differ there.
        if (oracle >= 0 && out.face_at(y, x) >= 0) {
          if (oracle == out.face_at(y, x)) {
            CHECK(out.depth.at(y, x, 0) == doctest::Approx(t).epsilon(1e-6));
            ++checked;
          }
        } else {
          CHECK(oracle == out.face_at(y, x));
        }
      }
    CHECK(checked > 400);
  }
}

TEST_CASE("hard raster: perspective-correct barycentric sums to one") {
  const Mesh m = fullscreen_triangle();
  const Camera cam = look_at_z(16, 16, 0.5);
  const RasterOutput out = rasterize_hard(m, cam);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      const double s = out.barycentric.at(y, x, 0) + out.barycentric.at(y, x, 1) +
                       out.barycentric.at(y, x, 2);
      CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("visible_vertices: single front-facing triangle fully visible") {
  Mesh m;
  m.vertices = {{-0.3, -0.3, 2}, {0.3, -0.3, 2}, {0, 0.4, 2}};
  m.uv = {{0, 0}, {1, 0}, {0.5, 1}};
  m.faces = {{0, 2, 1}};  // wound so the normal faces the camera (-z)
  const Camera cam = look_at_z(64, 64);
  const auto vis = visible_vertices(m, cam, 0.005);
  CHECK(vis == std::vector<int>{0, 1, 2});
}

TEST_CASE("visible_vertices: cube viewed along +z shows only the near face") {
  // axis-aligned cube centered at z=2
  Mesh m;
  const double s = 0.3;
  for (int corner = 0; corner < 8; ++corner) {
    m.vertices.push_back({corner & 1 ? s : -s, corner & 2 ? s : -s, 2.0 + (corner & 4 ? s : -s)});
    m.uv.push_back({0.5, 0.5});
  }
  auto quad = [&](int a, int b, int c, int d) {
    m.faces.push_back({a, b, c});
    m.faces.push_back({a, c, d});
  };
  quad(0, 2, 3, 1);  // near face z = 2 - s
  quad(4, 5, 7, 6);  // far face
  quad(0, 1, 5, 4);
  quad(2, 6, 7, 3);
  quad(0, 4, 6, 2);
  quad(1, 3, 7, 5);
  // orient all faces outward from the cube center
  const Eigen::Vector3d center(0, 0, 2);
  for (auto& f : m.faces) {
    const Eigen::Vector3d c3 =
        (m.vertices[f[0]] + m.vertices[f[1]] + m.vertices[f[2]]) / 3.0;
    const Eigen::Vector3d n = (m.vertices[f[1]] - m.vertices[f[0]])
                                  .cross(m.vertices[f[2]] - m.vertices[f[0]]);
    if (n.dot(c3 - center) < 0.0) std::swap(f[1], f[2]);
  }

  const Camera cam = look_at_z(64, 64);
  const auto vis = visible_vertices(m, cam, 0.005);
  const std::set<int> vis_set(vis.begin(), vis.end());
  // near-face corners (bit 4 clear) are visible
  for (int corner = 0; corner < 8; ++corner) {
    if (corner & 4)
      CHECK(!vis_set.count(corner));
    else
      CHECK(vis_set.count(corner));
  }
}

TEST_CASE("visible_vertices: matches ray-occlusion oracle away from silhouettes") {
  Rng rng(7);
  for (int trial = 0; trial < 3; ++trial) {
    Mesh sphere = make_icosphere(2, 0.5);
    const Eigen::Matrix3d r = random_rotation(rng);
    for (auto& v : sphere.vertices) v = r * v + Eigen::Vector3d(0, 0, 2.0);
    const Camera cam = look_at_z(128, 128);
    const auto mask = visible_vertex_mask(sphere, cam, 0.005);
    const auto normals = vertex_normals(sphere);
    const Eigen::Vector3d eye = cam.center();

    int disagreements = 0, tested = 0;
    for (int i = 0; i < sphere.vertex_count(); ++i) {
      const Eigen::Vector3d view = (sphere.vertices[i] - eye).normalized();
      const double facing = normals[i].dot(view);
      if (std::abs(facing) < 0.25) continue;  // silhouette band
      ++tested;
      // oracle: cast a ray to the vertex, visible iff nothing closer
      double best_t = std::numeric_limits<double>::max();
      const double dist = (sphere.vertices[i] - eye).norm();
      for (int f = 0; f < sphere.face_count(); ++f) {
        const auto& fc = sphere.faces[f];
        const double t = ray_triangle(eye, view, sphere.vertices[fc[0]],
                                      sphere.vertices[fc[1]], sphere.vertices[fc[2]]);
        if (t > 0.0) best_t = std::min(best_t, t);
      }
      const bool oracle = facing < 0.0 && best_t > dist - 0.01;
      if (oracle != static_cast<bool>(mask[i])) ++disagreements;
    }
    CHECK(tested > 100);
    CHECK(disagreements <= tested / 100);
  }
}

TEST_CASE("visible_vertices: off-image vertices are not visible") {
  Mesh m;
  m.vertices = {{100, 0, 2}, {101, 0, 2}, {100, 1, 2}};
  m.uv = {{0, 0}, {1, 0}, {0.5, 1}};
  m.faces = {{0, 2, 1}};
  const Camera cam = look_at_z(32, 32);
  CHECK(visible_vertices(m, cam, 0.01).empty());
}
