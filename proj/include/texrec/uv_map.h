#pragma once

#include <Eigen/Dense>
#include <vector>

#include "texrec/camera.h"
#include "texrec/image.h"
#include "texrec/mesh.h"

namespace texrec {

/// Per-texel surface correspondence: which face the texel center lies on in
/// UV space and its barycentric coordinates there. face = -1 outside every
/// chart.
struct UvLookup {
  int resolution = 0;
  std::vector<int> face;
  std::vector<Eigen::Vector3d> bary;
  int occupied = 0;
  int overlaps = 0;

  int face_at(int y, int x) const { return face[static_cast<size_t>(y) * resolution + x]; }
  const Eigen::Vector3d& bary_at(int y, int x) const {
    return bary[static_cast<size_t>(y) * resolution + x];
  }

  /// World position of a texel center on the given vertex positions.
  Eigen::Vector3d surface_point(int y, int x, const Mesh& mesh) const;
};

/// Builds the texel->surface table. Overlapping charts resolve to the
/// lowest face index and are counted; more than 1% overlapped texels is an
/// atlas-quality error.
UvLookup uv_lookup_table(const Mesh& mesh, int uv_resolution);

/// Per-frame UV visibility: rasterize UV coordinates into image space,
/// sample them back at each texel's projected pixel, and accept the texel
/// when the round trip reproduces its own UV within `tolerance_uv` in both
/// components.
Image visibility_map(const Mesh& mesh, const Camera& camera, const UvLookup& lookup,
                     double tolerance_uv);

/// Samples an image into UV space through the lookup table; texels whose
/// surface point projects off-image (or behind the camera) get zero and a
/// zero validity flag.
Image image_to_uv(const Image& image, const Mesh& mesh, const Camera& camera,
                  const UvLookup& lookup, Image* valid = nullptr);

struct PartialTexture {
  Image albedo;      // UV-resolution, 3 channels
  Image visibility;  // UV-resolution, 1 channel
};

/// image_to_uv masked by the visibility map.
PartialTexture partial_texture(const Image& albedo_image, const Mesh& mesh,
                               const Camera& camera, const UvLookup& lookup,
                               double tolerance_uv);

}  // namespace texrec
