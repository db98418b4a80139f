#include "texrec/mesh.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace texrec {

void Mesh::validate() const {
  const int nv = vertex_count();
  if (uv.size() != vertices.size())
    throw std::invalid_argument("mesh: uv count differs from vertex count");
  std::vector<char> referenced(nv, 0);
  for (size_t f = 0; f < faces.size(); ++f) {
    const auto& fc = faces[f];
    for (int k = 0; k < 3; ++k) {
      if (fc[k] < 0 || fc[k] >= nv)
        throw std::invalid_argument("mesh: face " + std::to_string(f) +
                                    " references out-of-range vertex " + std::to_string(fc[k]));
      referenced[fc[k]] = 1;
    }
    if (fc[0] == fc[1] || fc[1] == fc[2] || fc[0] == fc[2])
      throw std::invalid_argument("mesh: face " + std::to_string(f) + " repeats a vertex index");
  }
  for (int i = 0; i < nv; ++i) {
    if (!referenced[i]) continue;
    if (!vertices[i].allFinite())
      throw std::invalid_argument("mesh: vertex " + std::to_string(i) + " is not finite");
    if (!(uv[i].x() >= 0.0 && uv[i].x() <= 1.0 && uv[i].y() >= 0.0 && uv[i].y() <= 1.0))
      throw std::invalid_argument("mesh: vertex " + std::to_string(i) + " has UV outside [0,1]^2");
  }
}

std::vector<Eigen::Vector3d> TwoLevelMesh::fine_positions(
    const std::vector<Eigen::Vector3d>& coarse_positions) const {
  if (coarse_positions.size() != coarse.vertices.size())
    throw std::invalid_argument("fine_positions: coarse vertex count mismatch");
  std::vector<Eigen::Vector3d> out(fine.vertices.size());
  std::copy(coarse_positions.begin(), coarse_positions.end(), out.begin());
  for (const auto& [edge, mid] : edge_midpoint)
    out[mid] = 0.5 * (coarse_positions[edge.first] + coarse_positions[edge.second]);
  return out;
}

TwoLevelMesh subdivide(const Mesh& mesh) {
  mesh.validate();
  TwoLevelMesh out;
  out.coarse = mesh;
  out.fine.vertices = mesh.vertices;
  out.fine.uv = mesh.uv;
  out.fine.faces.reserve(mesh.faces.size() * 4);

  auto midpoint = [&](int a, int b) {
    const auto key = std::minmax(a, b);
    auto it = out.edge_midpoint.find(key);
    if (it != out.edge_midpoint.end()) return it->second;
    const int idx = out.fine.vertex_count();
    out.fine.vertices.push_back(0.5 * (mesh.vertices[a] + mesh.vertices[b]));
    out.fine.uv.push_back(0.5 * (mesh.uv[a] + mesh.uv[b]));
    out.edge_midpoint.emplace(key, idx);
    return idx;
  };

  for (const auto& f : mesh.faces) {
    const int mab = midpoint(f[0], f[1]);
    const int mbc = midpoint(f[1], f[2]);
    const int mca = midpoint(f[2], f[0]);
    out.fine.faces.push_back({f[0], mab, mca});
    out.fine.faces.push_back({f[1], mbc, mab});
    out.fine.faces.push_back({f[2], mca, mbc});
    out.fine.faces.push_back({mab, mbc, mca});
  }
  return out;
}

std::vector<Eigen::Vector3d> vertex_normals(const Mesh& mesh, std::vector<int>* degenerate) {
  std::vector<Eigen::Vector3d> accum(mesh.vertices.size(), Eigen::Vector3d::Zero());
  for (const auto& f : mesh.faces) {
    // Cross product of edge vectors = 2 * area * unit normal, so summing
    // it per corner gives area weighting for free.
    const Eigen::Vector3d g = (mesh.vertices[f[1]] - mesh.vertices[f[0]])
                                  .cross(mesh.vertices[f[2]] - mesh.vertices[f[0]]);
    for (int k = 0; k < 3; ++k) accum[f[k]] += g;
  }
  std::vector<Eigen::Vector3d> normals(mesh.vertices.size());
  for (size_t i = 0; i < accum.size(); ++i) {
    const double len = accum[i].norm();
    if (len < 1e-14) {
      normals[i] = Eigen::Vector3d::UnitZ();
      if (degenerate) degenerate->push_back(static_cast<int>(i));
    } else {
      normals[i] = accum[i] / len;
    }
  }
  return normals;
}

void vertex_normals_backward(const Mesh& mesh,
                             const std::vector<Eigen::Vector3d>& grad_normals,
                             std::vector<Eigen::Vector3d>& grad_vertices) {
  // Recompute the unnormalized accumulators, push the gradient through the
  // normalization, then through each face's cross product.
  std::vector<Eigen::Vector3d> accum(mesh.vertices.size(), Eigen::Vector3d::Zero());
  for (const auto& f : mesh.faces) {
    const Eigen::Vector3d g = (mesh.vertices[f[1]] - mesh.vertices[f[0]])
                                  .cross(mesh.vertices[f[2]] - mesh.vertices[f[0]]);
    for (int k = 0; k < 3; ++k) accum[f[k]] += g;
  }
  std::vector<Eigen::Vector3d> grad_accum(mesh.vertices.size(), Eigen::Vector3d::Zero());
  for (size_t i = 0; i < accum.size(); ++i) {
    const double len = accum[i].norm();
    if (len < 1e-14) continue;  // fallback normal, no gradient
    const Eigen::Vector3d n = accum[i] / len;
    grad_accum[i] = (grad_normals[i] - n * n.dot(grad_normals[i])) / len;
  }
  for (const auto& f : mesh.faces) {
    const Eigen::Vector3d u = mesh.vertices[f[1]] - mesh.vertices[f[0]];
    const Eigen::Vector3d w = mesh.vertices[f[2]] - mesh.vertices[f[0]];
    const Eigen::Vector3d ghat = grad_accum[f[0]] + grad_accum[f[1]] + grad_accum[f[2]];
    const Eigen::Vector3d uhat = w.cross(ghat);
    const Eigen::Vector3d what = ghat.cross(u);
    grad_vertices[f[1]] += uhat;
    grad_vertices[f[2]] += what;
    grad_vertices[f[0]] -= uhat + what;
  }
}

std::vector<std::vector<int>> vertex_neighbors(const Mesh& mesh) {
  std::vector<std::set<int>> nb(mesh.vertices.size());
  for (const auto& f : mesh.faces)
    for (int k = 0; k < 3; ++k) {
      nb[f[k]].insert(f[(k + 1) % 3]);
      nb[f[k]].insert(f[(k + 2) % 3]);
    }
  std::vector<std::vector<int>> out(mesh.vertices.size());
  for (size_t i = 0; i < nb.size(); ++i) out[i].assign(nb[i].begin(), nb[i].end());
  return out;
}

std::vector<Eigen::Vector3d> laplacian_coords(
    const std::vector<Eigen::Vector3d>& vertices,
    const std::vector<std::vector<int>>& neighbors) {
  std::vector<Eigen::Vector3d> delta(vertices.size(), Eigen::Vector3d::Zero());
  for (size_t i = 0; i < vertices.size(); ++i) {
    if (neighbors[i].empty()) continue;
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (int j : neighbors[i]) mean += vertices[j];
    delta[i] = vertices[i] - mean / static_cast<double>(neighbors[i].size());
  }
  return delta;
}

std::vector<Eigen::Vector3d> laplacian_coords(const Mesh& mesh, std::vector<int>* isolated) {
  const auto nb = vertex_neighbors(mesh);
  if (isolated) {
    for (size_t i = 0; i < nb.size(); ++i)
      if (nb[i].empty()) isolated->push_back(static_cast<int>(i));
  }
  return laplacian_coords(mesh.vertices, nb);
}

void laplacian_coords_backward(const std::vector<std::vector<int>>& neighbors,
                               const std::vector<Eigen::Vector3d>& grad_delta,
                               std::vector<Eigen::Vector3d>& grad_vertices) {
  for (size_t i = 0; i < neighbors.size(); ++i) {
    if (neighbors[i].empty()) continue;
    grad_vertices[i] += grad_delta[i];
    const double inv = 1.0 / static_cast<double>(neighbors[i].size());
    for (int j : neighbors[i]) grad_vertices[j] -= inv * grad_delta[i];
  }
}

std::vector<TangentFrame> tangent_frames(const Mesh& mesh, std::vector<int>* degenerate) {
  const auto normals = vertex_normals(mesh);
  std::vector<Eigen::Vector3d> tan_accum(mesh.vertices.size(), Eigen::Vector3d::Zero());

  for (const auto& f : mesh.faces) {
    const Eigen::Vector3d e1 = mesh.vertices[f[1]] - mesh.vertices[f[0]];
    const Eigen::Vector3d e2 = mesh.vertices[f[2]] - mesh.vertices[f[0]];
    const Eigen::Vector2d duv1 = mesh.uv[f[1]] - mesh.uv[f[0]];
    const Eigen::Vector2d duv2 = mesh.uv[f[2]] - mesh.uv[f[0]];
    const double det = duv1.x() * duv2.y() - duv2.x() * duv1.y();
    if (std::abs(det) < 1e-12) continue;  // UV-degenerate face
    const Eigen::Vector3d t = (e1 * duv2.y() - e2 * duv1.y()) / det;
    for (int k = 0; k < 3; ++k) tan_accum[f[k]] += t;
  }

  std::vector<TangentFrame> frames(mesh.vertices.size());
  for (size_t i = 0; i < frames.size(); ++i) {
    const Eigen::Vector3d& n = normals[i];
    Eigen::Vector3d t = tan_accum[i] - n * n.dot(tan_accum[i]);
    if (t.norm() < 1e-8) {
      if (degenerate) degenerate->push_back(static_cast<int>(i));
      t = Eigen::Vector3d::UnitX() - n * n.x();
      if (t.norm() < 1e-8) t = Eigen::Vector3d::UnitY() - n * n.y();
    }
    t.normalize();
    frames[i].axes.col(0) = t;
    frames[i].axes.col(1) = n.cross(t);
    frames[i].axes.col(2) = n;
  }
  return frames;
}

Mesh read_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_obj: cannot open " + path);

  std::vector<Eigen::Vector3d> positions;
  std::vector<Eigen::Vector2d> texcoords;
  std::map<std::pair<int, int>, int> pair_to_vertex;
  Mesh mesh;

  auto vertex_for = [&](int vi, int ti) {
    auto it = pair_to_vertex.find({vi, ti});
    if (it != pair_to_vertex.end()) return it->second;
    const int idx = mesh.vertex_count();
    if (vi < 0 || vi >= static_cast<int>(positions.size()))
      throw std::runtime_error("read_obj: face references missing vertex in " + path);
    mesh.vertices.push_back(positions[vi]);
    if (ti >= 0) {
      if (ti >= static_cast<int>(texcoords.size()))
        throw std::runtime_error("read_obj: face references missing texcoord in " + path);
      mesh.uv.push_back(texcoords[ti]);
    } else {
      mesh.uv.push_back(Eigen::Vector2d::Zero());
    }
    pair_to_vertex.emplace(std::make_pair(vi, ti), idx);
    return idx;
  };

  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      Eigen::Vector3d p;
      ss >> p.x() >> p.y() >> p.z();
      positions.push_back(p);
    } else if (tag == "vt") {
      Eigen::Vector2d t;
      ss >> t.x() >> t.y();
      texcoords.push_back(t);
    } else if (tag == "f") {
      std::array<int, 3> corners{};
      for (int k = 0; k < 3; ++k) {
        std::string ref;
        if (!(ss >> ref)) throw std::runtime_error("read_obj: non-triangle face in " + path);
        int vi = 0, ti = 0;
        const size_t slash = ref.find('/');
        if (slash == std::string::npos) {
          vi = std::stoi(ref);
          corners[k] = vertex_for(vi - 1, -1);
        } else {
          vi = std::stoi(ref.substr(0, slash));
          const std::string rest = ref.substr(slash + 1);
          const size_t slash2 = rest.find('/');
          const std::string tpart = slash2 == std::string::npos ? rest : rest.substr(0, slash2);
          if (tpart.empty()) {
            corners[k] = vertex_for(vi - 1, -1);
          } else {
            ti = std::stoi(tpart);
            corners[k] = vertex_for(vi - 1, ti - 1);
          }
        }
      }
      std::string extra;
      if (ss >> extra) throw std::runtime_error("read_obj: non-triangle face in " + path);
      mesh.faces.push_back(corners);
    }
  }
  return mesh;
}

void write_obj(const std::string& path, const Mesh& mesh) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_obj: cannot write " + path);
  char buf[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  for (const auto& t : mesh.uv) {
    std::snprintf(buf, sizeof(buf), "vt %.9g %.9g\n", t.x(), t.y());
    out << buf;
  }
  for (const auto& f : mesh.faces)
    out << "f " << f[0] + 1 << "/" << f[0] + 1 << " " << f[1] + 1 << "/" << f[1] + 1 << " "
        << f[2] + 1 << "/" << f[2] + 1 << "\n";
}

}  // namespace texrec
