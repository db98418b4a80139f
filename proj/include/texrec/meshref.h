#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "texrec/camera.h"
#include "texrec/image.h"
#include "texrec/mesh.h"
#include "texrec/perceptual.h"
#include "texrec/sh.h"
#include "texrec/soft_raster.h"
#include "texrec/uv_map.h"

namespace texrec {

enum class BodyGroup : uint8_t { kBody = 0, kHead = 1, kHand = 2 };

struct MeshRefConfig {
  double lambda_pct = 1.0;
  double lambda_sil = 100.0;
  double lambda_temp = 10.0;
  double lambda_pos = 10.0;
  double lambda_lap = 10.0;
  double lambda_deform = 10.0;
  double learning_rate = 1e-3;
  int iterations = 2000;
  double d_max = 0.15;  // meters, per-texel displacement magnitude cap
  double depth_tolerance = 0.005;
  int uv_resolution = 128;
  uint64_t seed = 0;
  SoftRasterConfig raster;
};

/// Moves each fine vertex by the bilinear sample of the displacement map
/// at its UV. Vertices whose UV texel carries no chart (when a lookup is
/// given) are flagged.
std::vector<Eigen::Vector3d> displaced_positions(
    const std::vector<Eigen::Vector3d>& base, const std::vector<Eigen::Vector2d>& uv,
    const Image& displacement, std::vector<int>* flagged = nullptr,
    const UvLookup* lookup = nullptr);

Mesh apply_displacement(const TwoLevelMesh& levels, const Image& displacement,
                        std::vector<int>* flagged = nullptr,
                        const UvLookup* lookup = nullptr);

/// Adjoint of displaced_positions: splats per-vertex gradients into the
/// displacement-map gradient.
void displacement_backward(const std::vector<Eigen::Vector2d>& uv,
                           const std::vector<Eigen::Vector3d>& grad_vertices,
                           Image& grad_map);

/// Supervised displacement loss: lambda_l1 |D_p - D_g|_1 +
/// lambda_ssim DSSIM(D_p, D_g) + lambda_lap sum |delta_p - delta_g|_1.
struct SupervisedWeights {
  double l1 = 1.0;
  double ssim = 1.0;
  double lap = 20.0;
};
double loss_supervised(const Image& d_p, const Image& d_g,
                       const std::vector<Eigen::Vector3d>& verts_p,
                       const std::vector<Eigen::Vector3d>& verts_g,
                       const std::vector<std::vector<int>>& neighbors,
                       const SupervisedWeights& weights);

/// pct(R M, I M) with M = M_R M_I.
double loss_perceptual(const Image& rendered, const Image& image, const Image& mask_render,
                       const Image& mask_image, const PerceptualDistance& pct,
                       Image* grad_rendered = nullptr, Image* grad_mask_render = nullptr);

/// |(M_R - M_I) C|_1.
double loss_silhouette(const Image& mask_render, const Image& mask_image,
                       const Image& confidence, Image* grad_mask_render = nullptr);

/// sum_i |v_prev_i + v_next_i - 2 v_cur_i|_1; favors constant velocity.
double loss_motion(const std::vector<Eigen::Vector3d>& v_prev,
                   const std::vector<Eigen::Vector3d>& v_cur,
                   const std::vector<Eigen::Vector3d>& v_next,
                   std::vector<Eigen::Vector3d>* g_prev = nullptr,
                   std::vector<Eigen::Vector3d>* g_cur = nullptr,
                   std::vector<Eigen::Vector3d>* g_next = nullptr);

/// sum over visible vertices of ||v_p - v_o||_2.
double loss_position(const std::vector<Eigen::Vector3d>& verts_p,
                     const std::vector<Eigen::Vector3d>& verts_orig,
                     const std::vector<char>& visible,
                     std::vector<Eigen::Vector3d>* grad = nullptr);

/// Laplacian anchor with per-vertex weight u: 100 for head/hand
/// (visibility ignored), 1 for other visible vertices, 0 otherwise.
double loss_laplacian_weighted(const std::vector<Eigen::Vector3d>& verts_p,
                               const std::vector<Eigen::Vector3d>& verts_o,
                               const std::vector<std::vector<int>>& neighbors,
                               const std::vector<BodyGroup>& groups,
                               const std::vector<char>& visible,
                               std::vector<Eigen::Vector3d>* grad = nullptr);

/// Tangent-space deformation snapshots taken at keyframes; gradients never
/// flow into the stored values.
struct PropagationBuffer {
  std::vector<Eigen::Vector3d> deformation;  // tangent space, meters
  std::vector<char> valid;
  std::vector<int> source_frame;

  explicit PropagationBuffer(size_t n = 0)
      : deformation(n, Eigen::Vector3d::Zero()), valid(n, 0), source_frame(n, -1) {}
};

/// Records world_to_tangent(v_current - v_base) for every vertex visible
/// in the keyframe; later keyframes overwrite earlier entries.
void update_propagation_buffer(PropagationBuffer& buffer,
                               const std::vector<Eigen::Vector3d>& verts_current,
                               const std::vector<Eigen::Vector3d>& verts_base,
                               const std::vector<TangentFrame>& frames,
                               const std::vector<char>& visible, int frame_index);

/// sum over target vertices with valid buffer entries of
/// |d_t - d_s|_1, d_t expressed in the current frame's tangent space.
double loss_deform_propagation(const std::vector<Eigen::Vector3d>& verts_p,
                               const std::vector<Eigen::Vector3d>& verts_base,
                               const std::vector<TangentFrame>& tangent,
                               const PropagationBuffer& buffer,
                               const std::vector<char>& targets,
                               std::vector<Eigen::Vector3d>* grad = nullptr);

/// One frame of the refinement sequence; base_fine / visible / tangent
/// derive from the undisplaced subdivided coarse mesh.
struct MeshRefFrame {
  Image image;
  Image mask;
  Image confidence;
  std::vector<Eigen::Vector3d> base_fine;
  std::vector<char> visible;
  std::vector<TangentFrame> tangent;
};

struct MeshRefSequence {
  Mesh fine_topology;  // shared faces + uv; per-frame positions come in MeshRefFrame
  std::vector<MeshRefFrame> frames;
  std::vector<int> keyframes;
  Camera camera;
  SHLight light;
  Image texture;
  std::vector<BodyGroup> groups;  // per fine vertex
};

/// Weighted sum of the six self-supervision terms for the triplet centered
/// at `t_cur` (photometric, silhouette, position, Laplacian, and
/// propagation on the center; motion across the triplet when both
/// neighbors are valid). When `map_grads` is non-null it must hold one
/// gradient image per sequence frame; gradients are accumulated for the
/// triplet members.
double loss_selfsup(const MeshRefSequence& seq, int t_prev, int t_cur, int t_next,
                    const std::vector<Image>& disp_maps, const PropagationBuffer& buffer,
                    const MeshRefConfig& config, const PerceptualDistance& pct,
                    std::vector<Image>* map_grads = nullptr);

struct MeshRefReport {
  std::vector<double> loss_curve;
  std::vector<int> sampled_frames;
  bool diverged = false;
};

/// Adam over per-frame displacement texels. Each step samples a center
/// frame, evaluates the triplet loss, updates the triplet maps, clamps
/// texel magnitudes to d_max, and refreshes the propagation buffer when
/// the center is a keyframe. Deterministic for a fixed seed.
std::vector<Image> optimize_displacements(const MeshRefSequence& seq,
                                          const MeshRefConfig& config,
                                          const PerceptualDistance& pct,
                                          MeshRefReport* report = nullptr);

/// 16-bit PNG displacement storage; value = d / (2 d_max) + 0.5 per
/// channel, so [-d_max, d_max] maps onto [0, 1].
void save_displacement_png(const std::string& path, const Image& displacement, double d_max);
Image load_displacement_png(const std::string& path, double d_max);

}  // namespace texrec
