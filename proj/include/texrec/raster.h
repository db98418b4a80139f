#pragma once

#include <Eigen/Dense>
#include <vector>

#include "texrec/camera.h"
#include "texrec/image.h"
#include "texrec/mesh.h"

namespace texrec {

/// Output of the hard rasterizer. `face_id` is -1 on background;
/// `barycentric` stores the perspective-correct attribute weights of the
/// hit face; `depth` is camera-space z (0 on background).
struct RasterOutput {
  Image color;
  Image silhouette;  // 1 channel, {0,1} for hard, [0,1] for soft
  Image depth;
  std::vector<int> face_id;
  Image barycentric;

  int face_at(int y, int x) const { return face_id[static_cast<size_t>(y) * depth.width() + x]; }
};

/// Nearest-surface rasterization with perspective-correct interpolation of
/// per-vertex attributes (attr_dim values per vertex; may be empty).
/// Faces with a vertex at or behind the camera plane and faces with
/// degenerate projections are skipped. Equal-depth ties keep the lower
/// face index.
RasterOutput rasterize_hard(const Mesh& mesh, const Camera& camera,
                            const std::vector<double>& attributes = {}, int attr_dim = 0);

/// Vertex indices that are front-facing and pass the depth-buffer test
/// within `depth_tolerance` (meters). Vertices projecting outside the
/// image are not visible.
std::vector<int> visible_vertices(const Mesh& mesh, const Camera& camera,
                                  double depth_tolerance);

/// Same classification as a per-vertex flag vector.
std::vector<char> visible_vertex_mask(const Mesh& mesh, const Camera& camera,
                                      double depth_tolerance);

}  // namespace texrec
