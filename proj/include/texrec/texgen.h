#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "texrec/camera.h"
#include "texrec/image.h"
#include "texrec/mesh.h"
#include "texrec/perceptual.h"
#include "texrec/soft_raster.h"
#include "texrec/uv_map.h"

namespace texrec {

/// Greedy coverage-maximizing keyframe choice. `indices[0]` is the frame
/// nearest the rest pose; weights satisfy sum(W) = 2 with
/// W_i = 1/K + w_i / sum(w).
struct KeyframeSelection {
  std::vector<int> indices;
  std::vector<double> weights;         // W_i, sampling frequencies
  std::vector<double> marginal_gains;  // w_i, coverage gained when added
};

struct TexGenConfig {
  int keyframes = 30;  // K
  double lambda_l1 = 20.0;
  double lambda_pct = 1.0;
  double lambda_lap = 10.0;
  double learning_rate = 3e-4;
  int iterations = 2000;
  bool augment_adjacent = true;
  bool optimize_vertices = false;
  /// Total-variation smoothness on the texture; partial stand-in for a
  /// learned denoising prior. Zero disables it.
  double tv_weight = 0.0;
  uint64_t seed = 0;
  SoftRasterConfig raster;
};

/// Greedy selection; the first frame minimizes ||V_i - V_rest||_1, each
/// next one maximizes the union coverage. Ties resolve to the lowest frame
/// index. Throws when k exceeds the frame count or map shapes differ.
KeyframeSelection select_keyframes(const std::vector<Image>& visibilities,
                                   const Image& v_rest, int k);

/// Adds the two temporal neighbors of each selected frame with half its
/// gain (a neighbor reachable from two keyframes keeps the larger
/// half-gain); weights are recomputed with the same formula over the
/// expanded set.
KeyframeSelection augment_adjacent(const KeyframeSelection& selection, int frame_count);

/// Per-texel gain-weighted average of partial textures:
/// sum(w_i V_i A_i) / sum(w_i V_i); `valid` marks texels with non-zero
/// denominator.
Image fuse_coarse_texture(const std::vector<PartialTexture>& partials,
                          const std::vector<double>& gains, Image* valid = nullptr);

struct TexGenLossGrads {
  Image texture;                        // d(loss)/d(texel), texture shape
  std::vector<Eigen::Vector3d> vertices;  // d(loss)/d(vertex), when requested
};

/// Photometric texture-refinement loss: lambda_l1 |(R - A) M|_1 +
/// lambda_pct pct(R M, A M) + lambda_lap sum |delta_p - delta_o|_1.
/// `rendered`/`silhouette` come from soft_rasterize of `texture` on
/// `mesh`; vertex Laplacian terms use `verts_orig` as the anchor.
/// Gradients are accumulated into `grads` when non-null.
double loss_texgen(const SoftRasterResult& rendered, const Image& albedo, const Image& mask,
                   const Mesh& mesh, const Camera& camera, const Image& texture,
                   const std::vector<Eigen::Vector3d>& verts_orig,
                   const std::vector<std::vector<int>>& neighbors, const TexGenConfig& config,
                   const PerceptualDistance& pct, TexGenLossGrads* grads);

/// One keyframe's inputs to the texture optimization.
struct TexGenFrame {
  Image albedo;  // consolidated albedo image
  Image mask;
  Mesh mesh;  // posed mesh, atlas topology
  int frame_index = 0;
  double weight = 0.0;  // W_i
};

struct TexGenReport {
  std::vector<double> loss_curve;
  std::vector<int> sampled_frames;
  int best_iteration = -1;
  bool diverged = false;
};

/// Thrown when the loss stays above 10x its initial value for 100
/// consecutive steps.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Adam over free texels (and optional per-vertex offsets with
/// `locked_vertices` frozen), sampling keyframes with probability
/// proportional to W_i. Returns the iterate with the lowest running-mean
/// loss. Deterministic for a fixed seed.
Image optimize_texture(std::vector<TexGenFrame>& frames, const Camera& camera,
                       const Image& init, const TexGenConfig& config,
                       const PerceptualDistance& pct,
                       const std::vector<char>& locked_vertices = {},
                       TexGenReport* report = nullptr,
                       std::vector<std::vector<Eigen::Vector3d>>* refined_vertices = nullptr);

void save_selection_json(const std::string& path, const KeyframeSelection& sel);

}  // namespace texrec
