#include "texrec/soft_raster.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace texrec {

namespace {

constexpr double kZClip = 1e-6;
constexpr double kAreaEps = 1e-12;
constexpr double kCoverageCap = 1.0 - 1e-9;  // keeps 1 - D bounded away from 0
// Softness of the barycentric clamp (units of barycentric coordinate). A
// hard clamp would kink the color in vertex positions at every pixel on an
// extended edge line; the softplus version keeps the render C^1.
constexpr double kBaryTau = 0.01;
// Floor added to squared edge distances before the smooth minimum.
constexpr double kD2Floor = 1e-30;

inline double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

struct FaceData {
  bool skip = true;
  int v[3] = {0, 0, 0};
  Eigen::Vector2d q[3];  // projected NDC positions
  double z[3] = {0, 0, 0};
  Eigen::Vector3d color[3];  // vertex colors (or ones)
  Eigen::Vector2d uv[3];
  int x_lo = 0, x_hi = -1, y_lo = 0, y_hi = -1;
};

// Everything the aggregation needs about one face at one pixel. Forward
// and backward both go through evaluate() so their skip decisions and
// intermediate values can never diverge.
struct FacePixel {
  bool contributes = false;
  bool inside = false;
  double lam[3] = {0, 0, 0};
  double edge_d2[3] = {0, 0, 0};  // squared distance to each boundary edge
  double edge_t[3] = {0, 0, 0};
  Eigen::Vector2d edge_diff[3];   // nearest point - pixel, per edge
  double d2 = 0;                  // smooth minimum of the edge distances
  double coverage = 0;            // D
  double lam_clamped[3] = {0, 0, 0};
  double lam_sum = 0;        // sum of clamped barycentrics
  double lam_norm[3] = {0, 0, 0};
  double r[3] = {0, 0, 0};   // lam_norm / z
  double r_sum = 0;
  double w[3] = {0, 0, 0};   // perspective attribute weights
  double z_pixel = 0;
  bool z_clamped = false;
  double zbar = 0;
  Eigen::Vector3d vertex_rgb = Eigen::Vector3d::Ones();
  Eigen::Vector2d uv = Eigen::Vector2d::Zero();
  Eigen::Vector3d tex_rgb = Eigen::Vector3d::Ones();
  Eigen::Vector3d color = Eigen::Vector3d::Ones();
};

struct Context {
  const Mesh* mesh;
  const Camera* camera;
  const Image* texture;
  const std::vector<Eigen::Vector3d>* vertex_colors;
  SoftRasterConfig cfg;
  std::vector<FaceData> faces;
  double ndc_x(double px) const { return 2.0 * px / camera->width - 1.0; }
  double ndc_y(double py) const { return 2.0 * py / camera->height - 1.0; }
};

Context make_context(const Mesh& mesh, const Camera& camera, const Image* texture,
                     const std::vector<Eigen::Vector3d>* vertex_colors,
                     const SoftRasterConfig& config) {
  if (config.sigma <= 0 || config.gamma <= 0)
    throw std::invalid_argument("soft_rasterize: sigma and gamma must be positive");
  if (vertex_colors && vertex_colors->size() != mesh.vertices.size())
    throw std::invalid_argument("soft_rasterize: vertex color count mismatch");

  Context ctx;
  ctx.mesh = &mesh;
  ctx.camera = &camera;
  ctx.texture = texture;
  ctx.vertex_colors = vertex_colors;
  ctx.cfg = config;

  const int w = camera.width, h = camera.height;
  std::vector<Eigen::Vector2d> ndc(mesh.vertices.size());
  std::vector<double> depth(mesh.vertices.size());
  std::vector<char> valid(mesh.vertices.size(), 0);
  for (size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Eigen::Vector3d pc = camera.to_camera(mesh.vertices[i]);
    depth[i] = pc.z();
    if (pc.z() > kZClip) {
      const Eigen::Vector2d pix = camera.project_camera(pc);
      ndc[i] = {ctx.ndc_x(pix.x()), ctx.ndc_y(pix.y())};
      valid[i] = 1;
    }
  }

  // Pruning-aware screen bounds: beyond this NDC distance from the face the
  // coverage is guaranteed below prune_eps.
  double dilate = 0.0;
  bool full_image = config.prune_eps <= 0.0;
  if (!full_image) {
    dilate = std::sqrt(config.sigma *
                       std::log((1.0 - config.prune_eps) / config.prune_eps));
  }

  ctx.faces.resize(mesh.faces.size());
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    FaceData& fd = ctx.faces[f];
    const auto& face = mesh.faces[f];
    if (!valid[face[0]] || !valid[face[1]] || !valid[face[2]]) continue;
    for (int k = 0; k < 3; ++k) {
      fd.v[k] = face[k];
      fd.q[k] = ndc[face[k]];
      fd.z[k] = depth[face[k]];
      fd.color[k] = vertex_colors ? (*vertex_colors)[face[k]] : Eigen::Vector3d::Ones();
      fd.uv[k] = mesh.uv[face[k]];
    }
    if (std::abs(cross2(fd.q[1] - fd.q[0], fd.q[2] - fd.q[0])) < kAreaEps) continue;

    if (full_image) {
      fd.x_lo = 0;
      fd.x_hi = w - 1;
      fd.y_lo = 0;
      fd.y_hi = h - 1;
    } else {
      const double nx_lo = std::min({fd.q[0].x(), fd.q[1].x(), fd.q[2].x()}) - dilate;
      const double nx_hi = std::max({fd.q[0].x(), fd.q[1].x(), fd.q[2].x()}) + dilate;
      const double ny_lo = std::min({fd.q[0].y(), fd.q[1].y(), fd.q[2].y()}) - dilate;
      const double ny_hi = std::max({fd.q[0].y(), fd.q[1].y(), fd.q[2].y()}) + dilate;
      fd.x_lo = std::max(0, static_cast<int>(std::floor((nx_lo + 1.0) * 0.5 * w - 0.5)));
      fd.x_hi = std::min(w - 1, static_cast<int>(std::ceil((nx_hi + 1.0) * 0.5 * w - 0.5)));
      fd.y_lo = std::max(0, static_cast<int>(std::floor((ny_lo + 1.0) * 0.5 * h - 0.5)));
      fd.y_hi = std::min(h - 1, static_cast<int>(std::ceil((ny_hi + 1.0) * 0.5 * h - 0.5)));
    }
    if (fd.x_lo > fd.x_hi || fd.y_lo > fd.y_hi) continue;
    fd.skip = false;
  }
  return ctx;
}

double point_segment_dist2(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                           const Eigen::Vector2d& b, double& t, Eigen::Vector2d& diff) {
  const Eigen::Vector2d ab = b - a;
  const double len2 = ab.squaredNorm();
  t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  diff = a + t * ab - p;
  return diff.squaredNorm();
}

FacePixel evaluate(const Context& ctx, const FaceData& fd, const Eigen::Vector2d& p) {
  FacePixel fp;
  const double area = cross2(fd.q[1] - fd.q[0], fd.q[2] - fd.q[0]);
  fp.lam[0] = cross2(fd.q[1] - p, fd.q[2] - p) / area;
  fp.lam[1] = cross2(fd.q[2] - p, fd.q[0] - p) / area;
  fp.lam[2] = 1.0 - fp.lam[0] - fp.lam[1];
  fp.inside = fp.lam[0] >= 0.0 && fp.lam[1] >= 0.0 && fp.lam[2] >= 0.0;

  // Smooth minimum (power mean) of the three edge distances: a hard min
  // kinks along the internal bisectors, which sits inside the coverage
  // transition band near corners.
  double inv_sum = 0.0;
  for (int e = 0; e < 3; ++e) {
    fp.edge_d2[e] = point_segment_dist2(p, fd.q[e], fd.q[(e + 1) % 3], fp.edge_t[e],
                                        fp.edge_diff[e]) +
                    kD2Floor;
    inv_sum += 1.0 / (fp.edge_d2[e] * fp.edge_d2[e] * fp.edge_d2[e]);
  }
  fp.d2 = std::pow(inv_sum, -1.0 / 3.0);
  const double sign = fp.inside ? 1.0 : -1.0;
  fp.coverage = sigmoid(sign * fp.d2 / ctx.cfg.sigma);
  if (fp.coverage <= 0.0) return fp;  // sigmoid underflow far from the face
  if (!fp.inside && ctx.cfg.prune_eps > 0.0 && fp.coverage < ctx.cfg.prune_eps) return fp;
  fp.contributes = true;

  fp.lam_sum = 0.0;
  for (int k = 0; k < 3; ++k) {
    fp.lam_clamped[k] = kBaryTau * softplus(fp.lam[k] / kBaryTau);
    fp.lam_sum += fp.lam_clamped[k];
  }
  fp.r_sum = 0.0;
  for (int k = 0; k < 3; ++k) {
    fp.lam_norm[k] = fp.lam_clamped[k] / fp.lam_sum;
    fp.r[k] = fp.lam_norm[k] / fd.z[k];
    fp.r_sum += fp.r[k];
  }
  for (int k = 0; k < 3; ++k) fp.w[k] = fp.r[k] / fp.r_sum;

  fp.z_pixel = 1.0 / fp.r_sum;
  if (fp.z_pixel < ctx.cfg.z_near) {
    fp.z_pixel = ctx.cfg.z_near;
    fp.z_clamped = true;
  } else if (fp.z_pixel > ctx.cfg.z_far) {
    fp.z_pixel = ctx.cfg.z_far;
    fp.z_clamped = true;
  }
  fp.zbar = (ctx.cfg.z_far - fp.z_pixel) / (ctx.cfg.z_far - ctx.cfg.z_near);

  if (ctx.vertex_colors) {
    fp.vertex_rgb = fp.w[0] * fd.color[0] + fp.w[1] * fd.color[1] + fp.w[2] * fd.color[2];
  }
  if (ctx.texture) {
    fp.uv = fp.w[0] * fd.uv[0] + fp.w[1] * fd.uv[1] + fp.w[2] * fd.uv[2];
    double rgb[4] = {1, 1, 1, 1};
    ctx.texture->sample_bilinear(fp.uv.x() * ctx.texture->width(),
                                 fp.uv.y() * ctx.texture->height(), rgb);
    for (int c = 0; c < 3; ++c) fp.tex_rgb[c] = rgb[std::min(c, ctx.texture->channels() - 1)];
  }
  fp.color = fp.vertex_rgb.cwiseProduct(fp.tex_rgb);
  return fp;
}

}  // namespace

SoftRasterResult soft_rasterize(const Mesh& mesh, const Camera& camera, const Image* texture,
                                const std::vector<Eigen::Vector3d>* vertex_colors,
                                const SoftRasterConfig& config) {
  const Context ctx = make_context(mesh, camera, texture, vertex_colors, config);
  const int w = camera.width, h = camera.height;

  SoftRasterResult out;
  out.color = Image(h, w, 3);
  out.silhouette = Image(h, w, 1);
  out.depth = Image(h, w, 1);
  out.face_id.assign(static_cast<size_t>(h) * w, -1);
  out.zbar_max = Image(h, w, 1);  // max log-score shift; background = 0
  out.weight_sum = Image(h, w, 1);
  out.miss_prod = Image(h, w, 1, 1.0);

  // Streaming softmax over log-scores zbar + gamma ln(D); the shift is
  // raised as stronger contributions arrive and previous sums rescaled,
  // which keeps exp() in range for tiny gamma.
  Image score_sum(h, w, 1);
  Image color_sum(h, w, 3);
  Image depth_sum(h, w, 1);
  Image best_score(h, w, 1);

  const double inv_gamma = 1.0 / config.gamma;
  for (size_t f = 0; f < ctx.faces.size(); ++f) {
    const FaceData& fd = ctx.faces[f];
    if (fd.skip) continue;
    for (int py = fd.y_lo; py <= fd.y_hi; ++py) {
      for (int px = fd.x_lo; px <= fd.x_hi; ++px) {
        const Eigen::Vector2d p(ctx.ndc_x(px + 0.5), ctx.ndc_y(py + 0.5));
        const FacePixel fp = evaluate(ctx, fd, p);
        if (!fp.contributes) continue;

        // Log-score with coverage-modulated depth: the depth advantage
        // fades with coverage, so a barely-covered face cannot outweigh
        // the background and the far field decays smoothly.
        const double logit =
            fp.coverage * fp.zbar + config.gamma * std::log(fp.coverage);
        double m = out.zbar_max.at(py, px, 0);
        if (logit > m) {
          const double rescale = std::exp((m - logit) * inv_gamma);
          score_sum.at(py, px, 0) *= rescale;
          depth_sum.at(py, px, 0) *= rescale;
          best_score.at(py, px, 0) *= rescale;
          for (int c = 0; c < 3; ++c) color_sum.at(py, px, c) *= rescale;
          m = logit;
          out.zbar_max.at(py, px, 0) = m;
        }
        const double score = std::exp((logit - m) * inv_gamma);
        score_sum.at(py, px, 0) += score;
        depth_sum.at(py, px, 0) += score * fp.z_pixel;
        for (int c = 0; c < 3; ++c) color_sum.at(py, px, c) += score * fp.color[c];
        if (score > best_score.at(py, px, 0)) {
          best_score.at(py, px, 0) = score;
          out.face_id[static_cast<size_t>(py) * w + px] = static_cast<int>(f);
        }
        out.miss_prod.at(py, px, 0) *= 1.0 - std::min(fp.coverage, kCoverageCap);
      }
    }
  }

  for (int py = 0; py < h; ++py)
    for (int px = 0; px < w; ++px) {
      const double m = out.zbar_max.at(py, px, 0);
      const double bg_score = std::exp(-m * inv_gamma);
      const double total = score_sum.at(py, px, 0) + bg_score;
      out.weight_sum.at(py, px, 0) = total;
      for (int c = 0; c < 3; ++c)
        out.color.at(py, px, c) =
            (color_sum.at(py, px, c) + bg_score * config.background[c]) / total;
      out.depth.at(py, px, 0) =
          (depth_sum.at(py, px, 0) + bg_score * config.z_far) / total;
      out.silhouette.at(py, px, 0) = 1.0 - out.miss_prod.at(py, px, 0);
      if (best_score.at(py, px, 0) <= bg_score)
        out.face_id[static_cast<size_t>(py) * w + px] = -1;
    }
  return out;
}

void soft_rasterize_backward(const Mesh& mesh, const Camera& camera, const Image* texture,
                             const std::vector<Eigen::Vector3d>* vertex_colors,
                             const SoftRasterConfig& config, const SoftRasterResult& fwd,
                             const Image& grad_color, const Image& grad_silhouette,
                             SoftRasterGrads& grads) {
  const Context ctx = make_context(mesh, camera, texture, vertex_colors, config);
  const double inv_gamma = 1.0 / config.gamma;
  const bool want_vertices = !grads.vertices.empty();
  const bool want_colors = !grads.vertex_colors.empty();
  const bool want_texture = !grads.texture.empty();
  const bool has_color_grad = !grad_color.empty();
  const bool has_sil_grad = !grad_silhouette.empty();
  if (want_vertices && grads.vertices.size() != mesh.vertices.size())
    throw std::invalid_argument("soft_rasterize_backward: vertex grad size mismatch");

  const double zrange = config.z_far - config.z_near;

  for (size_t f = 0; f < ctx.faces.size(); ++f) {
    const FaceData& fd = ctx.faces[f];
    if (fd.skip) continue;

    Eigen::Vector2d q_grad[3] = {Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero(),
                                 Eigen::Vector2d::Zero()};
    double z_grad[3] = {0, 0, 0};

    for (int py = fd.y_lo; py <= fd.y_hi; ++py) {
      for (int px = fd.x_lo; px <= fd.x_hi; ++px) {
        const Eigen::Vector2d p(ctx.ndc_x(px + 0.5), ctx.ndc_y(py + 0.5));
        const FacePixel fp = evaluate(ctx, fd, p);
        if (!fp.contributes) continue;

        const double m = fwd.zbar_max.at(py, px, 0);
        const double total = fwd.weight_sum.at(py, px, 0);
        const double logit =
            fp.coverage * fp.zbar + config.gamma * std::log(fp.coverage);
        const double score = std::exp((logit - m) * inv_gamma);
        // score = D exp((D zbar - m)/gamma)
        const double dscore_dcov = score * (fp.zbar * inv_gamma + 1.0 / fp.coverage);
        const double dscore_dzbar = score * fp.coverage * inv_gamma;

        // --- aggregation adjoints ---
        double score_grad = 0.0;
        Eigen::Vector3d color_grad = Eigen::Vector3d::Zero();
        if (has_color_grad) {
          for (int c = 0; c < 3; ++c) {
            const double g = grad_color.at(py, px, c);
            if (g == 0.0) continue;
            score_grad += g * (fp.color[c] - fwd.color.at(py, px, c)) / total;
            color_grad[c] = g * score / total;
          }
        }
        double coverage_grad = score_grad * dscore_dcov;
        double zbar_grad = score_grad * dscore_dzbar;

        if (has_sil_grad) {
          const double gs = grad_silhouette.at(py, px, 0);
          if (gs != 0.0) {
            const double kept = 1.0 - std::min(fp.coverage, kCoverageCap);
            // d(1 - prod)/dD_j = prod over the other faces
            coverage_grad += gs * fwd.miss_prod.at(py, px, 0) / kept;
          }
        }

        // --- coverage -> smooth boundary distance -> projected verts ---
        if (want_vertices && coverage_grad != 0.0) {
          const double sign = fp.inside ? 1.0 : -1.0;
          const double dsig = fp.coverage * (1.0 - fp.coverage);
          const double d2_grad = coverage_grad * dsig * sign / config.sigma;
          for (int e = 0; e < 3; ++e) {
            const double ratio = fp.d2 / fp.edge_d2[e];
            const double edge_grad = d2_grad * ratio * ratio * ratio * ratio;
            const Eigen::Vector2d diff_grad = 2.0 * edge_grad * fp.edge_diff[e];
            q_grad[e] += diff_grad * (1.0 - fp.edge_t[e]);
            q_grad[(e + 1) % 3] += diff_grad * fp.edge_t[e];
          }
        }

        // --- face color -> vertex colors / texture / interpolation ---
        double w_grad[3] = {0, 0, 0};
        if (!color_grad.isZero()) {
          const Eigen::Vector3d vc_grad = color_grad.cwiseProduct(fp.tex_rgb);
          const Eigen::Vector3d tex_grad = color_grad.cwiseProduct(fp.vertex_rgb);
          if (ctx.vertex_colors) {
            for (int k = 0; k < 3; ++k) {
              if (want_colors) grads.vertex_colors[fd.v[k]] += vc_grad * fp.w[k];
              w_grad[k] += vc_grad.dot(fd.color[k]);
            }
          }
          if (ctx.texture) {
            const double tx = fp.uv.x() * ctx.texture->width();
            const double ty = fp.uv.y() * ctx.texture->height();
            if (want_texture) {
              double splat[3] = {tex_grad[0], tex_grad[1], tex_grad[2]};
              if (ctx.texture->channels() == 1) {
                const double sum = tex_grad.sum();
                grads.texture.splat_bilinear(tx, ty, &sum);
              } else {
                grads.texture.splat_bilinear(tx, ty, splat);
              }
            }
            if (want_vertices) {
              double dsdx[4], dsdy[4];
              ctx.texture->sample_bilinear_grad(tx, ty, dsdx, dsdy);
              double du = 0.0, dv = 0.0;
              for (int c = 0; c < 3; ++c) {
                const int ch = std::min(c, ctx.texture->channels() - 1);
                du += tex_grad[c] * dsdx[ch] * ctx.texture->width();
                dv += tex_grad[c] * dsdy[ch] * ctx.texture->height();
              }
              for (int k = 0; k < 3; ++k)
                w_grad[k] += du * fd.uv[k].x() + dv * fd.uv[k].y();
            }
          }
        }

        if (!want_vertices) continue;

        // --- z softmax path ---
        double zp_grad = fp.z_clamped ? 0.0 : -zbar_grad / zrange;
        // depth output carries no loss gradient; z_pixel = 1 / r_sum
        double rsum_grad = -zp_grad / (fp.r_sum * fp.r_sum);

        // --- perspective weights: w_k = r_k / r_sum ---
        double wd = 0.0;
        for (int k = 0; k < 3; ++k) wd += w_grad[k] * fp.w[k];
        double r_grad[3];
        for (int k = 0; k < 3; ++k) r_grad[k] = (w_grad[k] - wd) / fp.r_sum + rsum_grad;

        // --- r_k = lam_norm_k / z_k ---
        double lamn_grad[3];
        for (int k = 0; k < 3; ++k) {
          lamn_grad[k] = r_grad[k] / fd.z[k];
          z_grad[k] += -r_grad[k] * fp.r[k] / fd.z[k];
        }

        // --- soft clamp + renormalize ---
        double common = 0.0;
        for (int k = 0; k < 3; ++k) common += lamn_grad[k] * fp.lam_norm[k];
        double lam_grad[3];
        for (int k = 0; k < 3; ++k) {
          const double dclamp = sigmoid(fp.lam[k] / kBaryTau);
          lam_grad[k] = (lamn_grad[k] - common) / fp.lam_sum * dclamp;
        }

        // --- barycentrics vs projected vertices ---
        // lam_0 = cr(q1-p, q2-p)/A, lam_1 = cr(q2-p, q0-p)/A,
        // lam_2 = cr(q0-p, q1-p)/A with A = cr(q1-q0, q2-q0).
        const double area = cross2(fd.q[1] - fd.q[0], fd.q[2] - fd.q[0]);
        double area_grad = 0.0;
        auto cross_bwd = [](const Eigen::Vector2d& a, const Eigen::Vector2d& b, double g,
                            Eigen::Vector2d& a_grad, Eigen::Vector2d& b_grad) {
          a_grad += g * Eigen::Vector2d(b.y(), -b.x());
          b_grad += g * Eigen::Vector2d(-a.y(), a.x());
        };
        for (int k = 0; k < 3; ++k) {
          if (lam_grad[k] == 0.0) continue;
          const double num_grad = lam_grad[k] / area;
          area_grad -= lam_grad[k] * fp.lam[k] / area;
          const int ka = (k + 1) % 3, kb = (k + 2) % 3;
          cross_bwd(fd.q[ka] - p, fd.q[kb] - p, num_grad, q_grad[ka], q_grad[kb]);
        }
        if (area_grad != 0.0) {
          Eigen::Vector2d u_grad = Eigen::Vector2d::Zero(), w2_grad = Eigen::Vector2d::Zero();
          cross_bwd(fd.q[1] - fd.q[0], fd.q[2] - fd.q[0], area_grad, u_grad, w2_grad);
          q_grad[1] += u_grad;
          q_grad[2] += w2_grad;
          q_grad[0] -= u_grad + w2_grad;
        }
      }
    }

    // --- projection backward, once per face corner ---
    if (want_vertices) {
      for (int k = 0; k < 3; ++k) {
        if (q_grad[k].isZero() && z_grad[k] == 0.0) continue;
        const Eigen::Vector3d pc = camera.to_camera(mesh.vertices[fd.v[k]]);
        const double sx = 2.0 * camera.fx / (camera.width * pc.z());
        const double sy = 2.0 * camera.fy / (camera.height * pc.z());
        Eigen::Vector3d cam_grad;
        cam_grad.x() = q_grad[k].x() * sx;
        cam_grad.y() = q_grad[k].y() * sy;
        cam_grad.z() = -q_grad[k].x() * sx * pc.x() / pc.z() -
                       q_grad[k].y() * sy * pc.y() / pc.z() + z_grad[k];
        grads.vertices[fd.v[k]] += camera.rotation.transpose() * cam_grad;
      }
    }
  }
}

}  // namespace texrec
