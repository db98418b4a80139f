#pragma once

#include <Eigen/Dense>
#include <array>
#include <map>
#include <string>
#include <vector>

namespace texrec {

/// Triangle mesh with per-vertex UVs in [0,1]^2. UV seams are represented
/// by duplicated vertices, so faces index a single vertex array.
struct Mesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<Eigen::Vector2d> uv;

  int vertex_count() const { return static_cast<int>(vertices.size()); }
  int face_count() const { return static_cast<int>(faces.size()); }

  /// Checks index bounds, degenerate faces, finite coordinates, and UV
  /// range; throws std::invalid_argument with a description on failure.
  void validate() const;
};

/// Coarse mesh plus its one-step midpoint subdivision. Coarse vertices are
/// a prefix of the fine vertices with identical indices and positions.
struct TwoLevelMesh {
  Mesh coarse;
  Mesh fine;
  /// (lo, hi) vertex-index edge of the coarse mesh -> fine midpoint index.
  std::map<std::pair<int, int>, int> edge_midpoint;

  /// Rebuilds fine vertex positions from new coarse positions (same
  /// topology): prefix copied, midpoints re-averaged.
  std::vector<Eigen::Vector3d> fine_positions(
      const std::vector<Eigen::Vector3d>& coarse_positions) const;
};

/// Right-handed orthonormal frame; columns are tangent, bitangent, normal.
struct TangentFrame {
  Eigen::Matrix3d axes = Eigen::Matrix3d::Identity();

  Eigen::Vector3d tangent() const { return axes.col(0); }
  Eigen::Vector3d bitangent() const { return axes.col(1); }
  Eigen::Vector3d normal() const { return axes.col(2); }
};

/// One midpoint vertex per unique edge (position and UV averaged), each
/// face split into four. Throws on invalid input meshes.
TwoLevelMesh subdivide(const Mesh& mesh);

/// Area-weighted vertex normals. Vertices with no incident face area get
/// +z and their index is appended to `degenerate` when provided.
std::vector<Eigen::Vector3d> vertex_normals(const Mesh& mesh,
                                            std::vector<int>* degenerate = nullptr);

/// Adjoint of vertex_normals: accumulates d(loss)/d(vertices) given
/// d(loss)/d(normals).
void vertex_normals_backward(const Mesh& mesh,
                             const std::vector<Eigen::Vector3d>& grad_normals,
                             std::vector<Eigen::Vector3d>& grad_vertices);

/// Undirected 1-ring adjacency (sorted, deduplicated).
std::vector<std::vector<int>> vertex_neighbors(const Mesh& mesh);

/// Uniform-weight differential coordinates: delta_i = v_i - mean(1-ring).
/// Isolated vertices get zero and are flagged when `isolated` is provided.
std::vector<Eigen::Vector3d> laplacian_coords(const Mesh& mesh,
                                              std::vector<int>* isolated = nullptr);

std::vector<Eigen::Vector3d> laplacian_coords(
    const std::vector<Eigen::Vector3d>& vertices,
    const std::vector<std::vector<int>>& neighbors);

/// Adjoint of laplacian_coords over the given adjacency.
void laplacian_coords_backward(const std::vector<std::vector<int>>& neighbors,
                               const std::vector<Eigen::Vector3d>& grad_delta,
                               std::vector<Eigen::Vector3d>& grad_vertices);

/// Per-vertex tangent frames from UV gradients accumulated over incident
/// faces, Gram-Schmidt orthogonalized against the vertex normal. Vertices
/// whose incident faces are all UV-degenerate get a deterministic fallback
/// (projected +x, or +y when the normal is parallel to x) and are flagged.
std::vector<TangentFrame> tangent_frames(const Mesh& mesh,
                                         std::vector<int>* degenerate = nullptr);

inline Eigen::Vector3d world_to_tangent(const Eigen::Vector3d& d, const TangentFrame& f) {
  return f.axes.transpose() * d;
}
inline Eigen::Vector3d tangent_to_world(const Eigen::Vector3d& d, const TangentFrame& f) {
  return f.axes * d;
}

/// Wavefront-OBJ-compatible I/O: v/vt/f records, 1-based indices. Faces may
/// use v or v/vt references; distinct (v, vt) pairs become distinct
/// vertices so the result always has per-vertex UVs.
Mesh read_obj(const std::string& path);
void write_obj(const std::string& path, const Mesh& mesh);

}  // namespace texrec
