#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "texrec/mesh.h"
#include "texrec/rng.h"
#include "test_util.h"

using namespace texrec;
using testutil::icosahedron;
using testutil::random_rotation;
using testutil::single_triangle;
using testutil::tetrahedron;
using testutil::unit_square;

namespace {

double mesh_area(const Mesh& m) {
  double area = 0.0;
  for (const auto& f : m.faces)
    area += 0.5 * (m.vertices[f[1]] - m.vertices[f[0]])
                      .cross(m.vertices[f[2]] - m.vertices[f[0]])
                      .norm();
  return area;
}

Mesh rotated(const Mesh& m, const Eigen::Matrix3d& r) {
  Mesh out = m;
  for (auto& v : out.vertices) v = r * v;
  return out;
}

}  // namespace

TEST_CASE("subdivide: single triangle") {
  const TwoLevelMesh two = subdivide(single_triangle());
  CHECK(two.fine.vertex_count() == 6);
  CHECK(two.fine.face_count() == 4);
  // coarse prefix preserved
  for (int i = 0; i < 3; ++i)
    CHECK((two.fine.vertices[i] - two.coarse.vertices[i]).norm() == 0.0);
  // midpoints average position and uv
  const int mid01 = two.edge_midpoint.at({0, 1});
  CHECK((two.fine.vertices[mid01] - Eigen::Vector3d(0.5, 0, 0)).norm() == doctest::Approx(0));
  CHECK((two.fine.uv[mid01] - Eigen::Vector2d(0.5, 0)).norm() == doctest::Approx(0));
}

TEST_CASE("subdivide: icosahedron counts follow V+E, 4F") {
  const TwoLevelMesh two = subdivide(icosahedron());
  CHECK(two.fine.vertex_count() == 12 + 30);
  CHECK(two.fine.face_count() == 80);
}

TEST_CASE("subdivide: twice-subdivided triangle by explicit edge enumeration") {
  const Mesh once = subdivide(single_triangle()).fine;
  // count unique edges of the 4-face mesh
  std::set<std::pair<int, int>> edges;
  for (const auto& f : once.faces)
    for (int k = 0; k < 3; ++k) {
      const auto e = std::minmax(f[k], f[(k + 1) % 3]);
      edges.insert(e);
    }
  CHECK(once.vertex_count() == 6);
  CHECK(edges.size() == 9);
  const Mesh twice = subdivide(once).fine;
  CHECK(twice.vertex_count() == 6 + 9);  // 15
  CHECK(twice.face_count() == 16);
}

TEST_CASE("subdivide: planar area preserved, midpoints on the coarse surface") {
  const Mesh base = unit_square();
  const TwoLevelMesh two = subdivide(base);
  CHECK(mesh_area(base) == doctest::Approx(mesh_area(two.fine)).epsilon(1e-9));
  for (const auto& v : two.fine.vertices) CHECK(std::abs(v.z()) < 1e-12);
}

TEST_CASE("subdivide: rejects out-of-range face index") {
  Mesh bad = single_triangle();
  bad.faces[0][2] = 7;
  CHECK_THROWS_AS(subdivide(bad), std::invalid_argument);
}

TEST_CASE("fine_positions rebuilds midpoints from new coarse positions") {
  const TwoLevelMesh two = subdivide(tetrahedron());
  std::vector<Eigen::Vector3d> moved = two.coarse.vertices;
  for (auto& v : moved) v += Eigen::Vector3d(1, 2, 3);
  const auto fine = two.fine_positions(moved);
  for (const auto& [edge, mid] : two.edge_midpoint)
    CHECK((fine[mid] - 0.5 * (moved[edge.first] + moved[edge.second])).norm() == 0.0);
}

TEST_CASE("vertex_normals: planar square is +z") {
  const auto normals = vertex_normals(unit_square());
  for (const auto& n : normals) CHECK((n - Eigen::Vector3d(0, 0, 1)).norm() < 1e-12);
}

TEST_CASE("vertex_normals: tetrahedron vertex points along centroid-to-vertex") {
  const Mesh tet = tetrahedron();
  const auto normals = vertex_normals(tet);
  const Eigen::Vector3d centroid =
      (tet.vertices[0] + tet.vertices[1] + tet.vertices[2] + tet.vertices[3]) / 4.0;
  for (int i = 0; i < 4; ++i) {
    const Eigen::Vector3d dir = (tet.vertices[i] - centroid).normalized();
    CHECK(normals[i].dot(dir) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("vertex_normals: icosphere normals track positions") {
  Mesh ico = icosahedron();
  for (int s = 0; s < 4; ++s) {
    ico = subdivide(ico).fine;
    for (auto& v : ico.vertices) v.normalize();
  }
  const auto normals = vertex_normals(ico);
  for (int i = 0; i < ico.vertex_count(); ++i)
    CHECK((normals[i] - ico.vertices[i].normalized()).norm() < 1e-2);
}

TEST_CASE("vertex_normals: isolated vertex flagged with +z") {
  Mesh m = single_triangle();
  m.vertices.push_back({5, 5, 5});
  m.uv.push_back({0.5, 0.5});
  std::vector<int> degenerate;
  const auto normals = vertex_normals(m, &degenerate);
  REQUIRE(degenerate.size() == 1);
  CHECK(degenerate[0] == 3);
  CHECK((normals[3] - Eigen::Vector3d(0, 0, 1)).norm() == 0.0);
}

TEST_CASE("laplacian_coords: grid interior vertex vanishes, translation invariant") {
  // 3x3 planar grid; center vertex 4 has neighbors forming a symmetric ring
  Mesh m;
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) {
      m.vertices.push_back({static_cast<double>(x), static_cast<double>(y), 0.0});
      m.uv.push_back({x / 2.0, y / 2.0});
    }
  auto quad = [&](int a, int b, int c, int d) {
    m.faces.push_back({a, b, c});
    m.faces.push_back({a, c, d});
  };
  quad(0, 1, 4, 3);
  quad(1, 2, 5, 4);
  quad(3, 4, 7, 6);
  quad(4, 5, 8, 7);

  const auto delta = laplacian_coords(m);
  CHECK(delta[4].norm() < 1e-12);

  Mesh shifted = m;
  for (auto& v : shifted.vertices) v += Eigen::Vector3d(3, -2, 7);
  const auto delta2 = laplacian_coords(shifted);
  for (size_t i = 0; i < delta.size(); ++i) CHECK((delta[i] - delta2[i]).norm() < 1e-12);
}

TEST_CASE("laplacian_coords: tetrahedron definition and rotation equivariance") {
  const Mesh tet = tetrahedron();
  const auto delta = laplacian_coords(tet);
  const Eigen::Vector3d expected =
      tet.vertices[0] - (tet.vertices[1] + tet.vertices[2] + tet.vertices[3]) / 3.0;
  CHECK((delta[0] - expected).norm() < 1e-12);

  Rng rng(7);
  const Eigen::Matrix3d r = random_rotation(rng);
  const auto delta_rot = laplacian_coords(rotated(tet, r));
  for (size_t i = 0; i < delta.size(); ++i)
    CHECK((delta_rot[i] - r * delta[i]).norm() < 1e-12);
}

TEST_CASE("laplacian backward matches finite differences") {
  const Mesh tet = tetrahedron();
  const auto neighbors = vertex_neighbors(tet);
  // loss = sum |delta|_1
  auto loss = [&](const std::vector<Eigen::Vector3d>& verts) {
    const auto d = laplacian_coords(verts, neighbors);
    double total = 0.0;
    for (const auto& v : d) total += v.cwiseAbs().sum();
    return total;
  };
  const auto delta = laplacian_coords(tet.vertices, neighbors);
  std::vector<Eigen::Vector3d> grad_delta(4);
  for (int i = 0; i < 4; ++i)
    grad_delta[i] = delta[i].unaryExpr([](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
  std::vector<Eigen::Vector3d> grad(4, Eigen::Vector3d::Zero());
  laplacian_coords_backward(neighbors, grad_delta, grad);

  const double h = 1e-6;
  for (int i = 0; i < 4; ++i)
    for (int c = 0; c < 3; ++c) {
      auto verts = tet.vertices;
      verts[i][c] += h;
      const double up = loss(verts);
      verts[i][c] -= 2 * h;
      const double dn = loss(verts);
      CHECK(grad[i][c] == doctest::Approx((up - dn) / (2 * h)).epsilon(1e-4));
    }
}

TEST_CASE("tangent_frames: axis-aligned UVs on a planar quad") {
  const auto frames = tangent_frames(unit_square());
  for (const auto& f : frames) {
    CHECK((f.tangent() - Eigen::Vector3d(1, 0, 0)).norm() < 1e-12);
    CHECK((f.bitangent() - Eigen::Vector3d(0, 1, 0)).norm() < 1e-12);
    CHECK((f.normal() - Eigen::Vector3d(0, 0, 1)).norm() < 1e-12);
  }
}

TEST_CASE("tangent_frames: orthonormal with determinant +1 on an icosphere") {
  Mesh ico = icosahedron();
  // give the icosahedron usable UVs via spherical projection
  for (int i = 0; i < ico.vertex_count(); ++i) {
    const auto& v = ico.vertices[i];
    ico.uv[i] = {0.5 + std::atan2(v.z(), v.x()) / (2 * M_PI), 0.5 + std::asin(v.y()) / M_PI};
  }
  const auto frames = tangent_frames(ico);
  for (const auto& f : frames) {
    CHECK((f.axes.transpose() * f.axes - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <
          1e-6);
    CHECK(f.axes.determinant() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("tangent_frames: rotation equivariance") {
  Rng rng(11);
  const Eigen::Matrix3d r = random_rotation(rng);
  const Mesh m = tetrahedron();
  const auto frames = tangent_frames(m);
  const auto frames_rot = tangent_frames(rotated(m, r));
  for (size_t i = 0; i < frames.size(); ++i)
    CHECK((frames_rot[i].axes - r * frames[i].axes).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("tangent_frames: UV-degenerate fallback is deterministic and flagged") {
  Mesh m = single_triangle();
  m.uv = {{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}};
  std::vector<int> degenerate;
  const auto frames = tangent_frames(m, &degenerate);
  CHECK(degenerate.size() == 3);
  // normal is +z, so the fallback tangent is +x
  CHECK((frames[0].tangent() - Eigen::Vector3d(1, 0, 0)).norm() < 1e-9);
}

TEST_CASE("world/tangent round trip and normal axis") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Matrix3d r = random_rotation(rng);
    TangentFrame f;
    f.axes = r;
    const Eigen::Vector3d d(rng.gaussian(), rng.gaussian(), rng.gaussian());
    CHECK((tangent_to_world(world_to_tangent(d, f), f) - d).norm() < 1e-7 * (1 + d.norm()));
    // a deformation along the normal has tangent coords (0, 0, |d|)
    const Eigen::Vector3d along = 0.37 * f.normal();
    const Eigen::Vector3d t = world_to_tangent(along, f);
    CHECK(std::abs(t.x()) < 1e-12);
    CHECK(std::abs(t.y()) < 1e-12);
    CHECK(t.z() == doctest::Approx(0.37).epsilon(1e-9));
  }
}

TEST_CASE("tangent coords invariant under joint rotation") {
  Rng rng(5);
  const Mesh m = tetrahedron();
  const auto frames = tangent_frames(m);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Matrix3d r = random_rotation(rng);
    const auto frames_rot = tangent_frames(rotated(m, r));
    const Eigen::Vector3d d(rng.gaussian(), rng.gaussian(), rng.gaussian());
    for (size_t i = 0; i < frames.size(); ++i) {
      const Eigen::Vector3d a = world_to_tangent(d, frames[i]);
      const Eigen::Vector3d b = world_to_tangent(r * d, frames_rot[i]);
      CHECK((a - b).norm() < 1e-5 * (1 + d.norm()));
    }
  }
}

TEST_CASE("obj round trip preserves geometry, uv, and faces") {
  const Mesh m = tetrahedron();
  const std::string path = "test_mesh_roundtrip.obj";
  write_obj(path, m);
  const Mesh back = read_obj(path);
  REQUIRE(back.vertex_count() == m.vertex_count());
  REQUIRE(back.face_count() == m.face_count());
  for (int i = 0; i < m.vertex_count(); ++i) {
    CHECK((back.vertices[i] - m.vertices[i]).norm() < 1e-8);
    CHECK((back.uv[i] - m.uv[i]).norm() < 1e-8);
  }
  CHECK(back.faces == m.faces);
  std::remove(path.c_str());
}

TEST_CASE("mesh validation catches duplicate indices and bad uv") {
  Mesh dup = single_triangle();
  dup.faces.push_back({0, 0, 1});
  CHECK_THROWS_AS(dup.validate(), std::invalid_argument);

  Mesh bad_uv = single_triangle();
  bad_uv.uv[1] = {1.5, 0.0};
  CHECK_THROWS_AS(bad_uv.validate(), std::invalid_argument);
}
