#include "texrec/meshref.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "texrec/adam.h"
#include "texrec/png_io.h"
#include "texrec/rng.h"
#include "texrec/ssim.h"
#include "texrec/texgen.h"

namespace texrec {

namespace {

inline double sign_of(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

}  // namespace

std::vector<Eigen::Vector3d> displaced_positions(const std::vector<Eigen::Vector3d>& base,
                                                 const std::vector<Eigen::Vector2d>& uv,
                                                 const Image& displacement,
                                                 std::vector<int>* flagged,
                                                 const UvLookup* lookup) {
  if (base.size() != uv.size())
    throw std::invalid_argument("displaced_positions: uv count mismatch");
  std::vector<Eigen::Vector3d> out(base.size());
  double d[3];
  for (size_t i = 0; i < base.size(); ++i) {
    const double u = uv[i].x(), v = uv[i].y();
    bool empty = u < 0.0 || u > 1.0 || v < 0.0 || v > 1.0;
    if (!empty && lookup) {
      const int tx = std::clamp(static_cast<int>(u * lookup->resolution), 0, lookup->resolution - 1);
      const int ty = std::clamp(static_cast<int>(v * lookup->resolution), 0, lookup->resolution - 1);
      empty = lookup->face_at(ty, tx) < 0;
    }
    if (empty) {
      if (flagged) flagged->push_back(static_cast<int>(i));
      out[i] = base[i];
      continue;
    }
    displacement.sample_bilinear(u * displacement.width(), v * displacement.height(), d);
    out[i] = base[i] + Eigen::Vector3d(d[0], d[1], d[2]);
  }
  return out;
}

Mesh apply_displacement(const TwoLevelMesh& levels, const Image& displacement,
                        std::vector<int>* flagged, const UvLookup* lookup) {
  Mesh out = levels.fine;
  out.vertices = displaced_positions(levels.fine.vertices, levels.fine.uv, displacement,
                                     flagged, lookup);
  return out;
}

void displacement_backward(const std::vector<Eigen::Vector2d>& uv,
                           const std::vector<Eigen::Vector3d>& grad_vertices,
                           Image& grad_map) {
  for (size_t i = 0; i < uv.size(); ++i) {
    if (grad_vertices[i].isZero()) continue;
    const double u = uv[i].x(), v = uv[i].y();
    if (u < 0.0 || u > 1.0 || v < 0.0 || v > 1.0) continue;
    const double g[3] = {grad_vertices[i].x(), grad_vertices[i].y(), grad_vertices[i].z()};
    grad_map.splat_bilinear(u * grad_map.width(), v * grad_map.height(), g);
  }
}

double loss_supervised(const Image& d_p, const Image& d_g,
                       const std::vector<Eigen::Vector3d>& verts_p,
                       const std::vector<Eigen::Vector3d>& verts_g,
                       const std::vector<std::vector<int>>& neighbors,
                       const SupervisedWeights& weights) {
  if (!d_p.same_shape(d_g)) throw std::invalid_argument("loss_supervised: map shape mismatch");
  double l1 = 0.0;
  for (size_t i = 0; i < d_p.size(); ++i) l1 += std::abs(d_p.data()[i] - d_g.data()[i]);

  const double ds = dssim(d_p, d_g);

  const auto delta_p = laplacian_coords(verts_p, neighbors);
  const auto delta_g = laplacian_coords(verts_g, neighbors);
  double lap = 0.0;
  for (size_t i = 0; i < delta_p.size(); ++i)
    lap += (delta_p[i] - delta_g[i]).cwiseAbs().sum();

  return weights.l1 * l1 + weights.ssim * ds + weights.lap * lap;
}

double loss_perceptual(const Image& rendered, const Image& image, const Image& mask_render,
                       const Image& mask_image, const PerceptualDistance& pct,
                       Image* grad_rendered, Image* grad_mask_render) {
  if (!rendered.same_shape(image)) throw std::invalid_argument("loss_perceptual: shape mismatch");
  const int h = rendered.height(), w = rendered.width(), ch = rendered.channels();
  Image x(h, w, ch), y(h, w, ch);
  for (int py = 0; py < h; ++py)
    for (int px = 0; px < w; ++px) {
      const double m = mask_render.at(py, px, 0) * mask_image.at(py, px, 0);
      for (int c = 0; c < ch; ++c) {
        x.at(py, px, c) = rendered.at(py, px, c) * m;
        y.at(py, px, c) = image.at(py, px, c) * m;
      }
    }
  if (!grad_rendered && !grad_mask_render) return pct.eval(x, y);

  Image gx(h, w, ch);
  const double value = pct.eval_with_grad(x, y, gx);
  // The default distance is a function of x - y, so d/dy = -d/dx at the
  // same pixel; the mask path uses both.
  for (int py = 0; py < h; ++py)
    for (int px = 0; px < w; ++px) {
      const double mi = mask_image.at(py, px, 0);
      const double m = mask_render.at(py, px, 0) * mi;
      for (int c = 0; c < ch; ++c) {
        const double g = gx.at(py, px, c);
        if (grad_rendered) grad_rendered->at(py, px, c) += g * m;
        if (grad_mask_render)
          grad_mask_render->at(py, px, 0) +=
              g * (rendered.at(py, px, c) - image.at(py, px, c)) * mi;
      }
    }
  return value;
}

double loss_silhouette(const Image& mask_render, const Image& mask_image,
                       const Image& confidence, Image* grad_mask_render) {
  if (!mask_render.same_shape(mask_image))
    throw std::invalid_argument("loss_silhouette: shape mismatch");
  double total = 0.0;
  for (int y = 0; y < mask_render.height(); ++y)
    for (int x = 0; x < mask_render.width(); ++x) {
      const double c = confidence.at(y, x, 0);
      const double d = (mask_render.at(y, x, 0) - mask_image.at(y, x, 0)) * c;
      total += std::abs(d);
      if (grad_mask_render && d != 0.0) grad_mask_render->at(y, x, 0) += sign_of(d) * c;
    }
  return total;
}

double loss_motion(const std::vector<Eigen::Vector3d>& v_prev,
                   const std::vector<Eigen::Vector3d>& v_cur,
                   const std::vector<Eigen::Vector3d>& v_next,
                   std::vector<Eigen::Vector3d>* g_prev, std::vector<Eigen::Vector3d>* g_cur,
                   std::vector<Eigen::Vector3d>* g_next) {
  if (v_prev.size() != v_cur.size() || v_next.size() != v_cur.size())
    throw std::invalid_argument("loss_motion: vertex count mismatch");
  double total = 0.0;
  for (size_t i = 0; i < v_cur.size(); ++i) {
    const Eigen::Vector3d r = v_prev[i] + v_next[i] - 2.0 * v_cur[i];
    total += r.cwiseAbs().sum();
    for (int c = 0; c < 3; ++c) {
      const double s = sign_of(r[c]);
      if (s == 0.0) continue;
      if (g_prev) (*g_prev)[i][c] += s;
      if (g_next) (*g_next)[i][c] += s;
      if (g_cur) (*g_cur)[i][c] -= 2.0 * s;
    }
  }
  return total;
}

double loss_position(const std::vector<Eigen::Vector3d>& verts_p,
                     const std::vector<Eigen::Vector3d>& verts_orig,
                     const std::vector<char>& visible, std::vector<Eigen::Vector3d>* grad) {
  double total = 0.0;
  for (size_t i = 0; i < verts_p.size(); ++i) {
    if (!visible[i]) continue;
    const Eigen::Vector3d d = verts_p[i] - verts_orig[i];
    const double n = d.norm();
    total += n;
    if (grad && n > 1e-12) (*grad)[i] += d / n;
  }
  return total;
}

double loss_laplacian_weighted(const std::vector<Eigen::Vector3d>& verts_p,
                               const std::vector<Eigen::Vector3d>& verts_o,
                               const std::vector<std::vector<int>>& neighbors,
                               const std::vector<BodyGroup>& groups,
                               const std::vector<char>& visible,
                               std::vector<Eigen::Vector3d>* grad) {
  if (groups.size() != verts_p.size())
    throw std::invalid_argument("loss_laplacian_weighted: group count mismatch");
  const auto delta_p = laplacian_coords(verts_p, neighbors);
  const auto delta_o = laplacian_coords(verts_o, neighbors);

  double total = 0.0;
  std::vector<Eigen::Vector3d> grad_delta;
  if (grad) grad_delta.assign(verts_p.size(), Eigen::Vector3d::Zero());
  for (size_t i = 0; i < verts_p.size(); ++i) {
    const bool rigid = groups[i] == BodyGroup::kHead || groups[i] == BodyGroup::kHand;
    const double u = rigid ? 100.0 : (visible[i] ? 1.0 : 0.0);
    if (u == 0.0) continue;
    const Eigen::Vector3d d = delta_p[i] - delta_o[i];
    total += u * d.cwiseAbs().sum();
    if (grad)
      grad_delta[i] = u * Eigen::Vector3d(sign_of(d.x()), sign_of(d.y()), sign_of(d.z()));
  }
  if (grad) laplacian_coords_backward(neighbors, grad_delta, *grad);
  return total;
}

void update_propagation_buffer(PropagationBuffer& buffer,
                               const std::vector<Eigen::Vector3d>& verts_current,
                               const std::vector<Eigen::Vector3d>& verts_base,
                               const std::vector<TangentFrame>& frames,
                               const std::vector<char>& visible, int frame_index) {
  for (size_t i = 0; i < verts_current.size(); ++i) {
    if (!visible[i]) continue;
    buffer.deformation[i] = world_to_tangent(verts_current[i] - verts_base[i], frames[i]);
    buffer.valid[i] = 1;
    buffer.source_frame[i] = frame_index;
  }
}

double loss_deform_propagation(const std::vector<Eigen::Vector3d>& verts_p,
                               const std::vector<Eigen::Vector3d>& verts_base,
                               const std::vector<TangentFrame>& tangent,
                               const PropagationBuffer& buffer,
                               const std::vector<char>& targets,
                               std::vector<Eigen::Vector3d>* grad) {
  double total = 0.0;
  for (size_t i = 0; i < verts_p.size(); ++i) {
    if (!targets[i] || !buffer.valid[i]) continue;
    const Eigen::Vector3d d_t = world_to_tangent(verts_p[i] - verts_base[i], tangent[i]);
    const Eigen::Vector3d r = d_t - buffer.deformation[i];
    total += r.cwiseAbs().sum();
    if (grad) {
      const Eigen::Vector3d s(sign_of(r.x()), sign_of(r.y()), sign_of(r.z()));
      (*grad)[i] += tangent[i].axes * s;  // chain through the frame transpose
    }
  }
  return total;
}

namespace {

// Photometric + silhouette terms of one rendered frame, with gradients
// pushed back to the displaced fine vertices. Shading is per-vertex
// irradiance interpolated by the rasterizer and multiplied with the
// sampled texture.
double render_terms(const MeshRefSequence& seq, const MeshRefFrame& frame,
                    const std::vector<Eigen::Vector3d>& verts, const MeshRefConfig& cfg,
                    const PerceptualDistance& pct,
                    std::vector<Eigen::Vector3d>* grad_verts) {
  Mesh mesh = seq.fine_topology;
  mesh.vertices = verts;

  const auto normals = vertex_normals(mesh);
  std::vector<Eigen::Vector3d> irradiance(normals.size());
  for (size_t i = 0; i < normals.size(); ++i)
    irradiance[i] = shade_normal(normals[i], seq.light);

  const SoftRasterResult render =
      soft_rasterize(mesh, seq.camera, &seq.texture, &irradiance, cfg.raster);

  double total = 0.0;
  Image grad_color, grad_sil;
  Image* gc = nullptr;
  Image* gs = nullptr;
  if (grad_verts) {
    grad_color = Image(render.color.height(), render.color.width(), 3);
    grad_sil = Image(render.color.height(), render.color.width(), 1);
    gc = &grad_color;
    gs = &grad_sil;
  }

  if (cfg.lambda_pct > 0.0) {
    Image gpc, gps;
    if (grad_verts) {
      gpc = Image::zeros_like(grad_color);
      gps = Image::zeros_like(grad_sil);
    }
    const double v = loss_perceptual(render.color, frame.image, render.silhouette, frame.mask,
                                     pct, grad_verts ? &gpc : nullptr,
                                     grad_verts ? &gps : nullptr);
    total += cfg.lambda_pct * v;
    if (grad_verts) {
      for (size_t i = 0; i < grad_color.size(); ++i)
        grad_color.data()[i] += cfg.lambda_pct * gpc.data()[i];
      for (size_t i = 0; i < grad_sil.size(); ++i)
        grad_sil.data()[i] += cfg.lambda_pct * gps.data()[i];
    }
  }
  if (cfg.lambda_sil > 0.0) {
    Image gss;
    if (grad_verts) gss = Image::zeros_like(grad_sil);
    const double v =
        loss_silhouette(render.silhouette, frame.mask, frame.confidence,
                        grad_verts ? &gss : nullptr);
    total += cfg.lambda_sil * v;
    if (grad_verts)
      for (size_t i = 0; i < grad_sil.size(); ++i)
        grad_sil.data()[i] += cfg.lambda_sil * gss.data()[i];
  }

  if (grad_verts) {
    SoftRasterGrads rg;
    rg.vertices.assign(verts.size(), Eigen::Vector3d::Zero());
    rg.vertex_colors.assign(verts.size(), Eigen::Vector3d::Zero());
    soft_rasterize_backward(mesh, seq.camera, &seq.texture, &irradiance, cfg.raster, render,
                            grad_color, grad_sil, rg);

    // irradiance -> normals -> vertices
    std::vector<Eigen::Vector3d> grad_normals(verts.size(), Eigen::Vector3d::Zero());
    for (size_t i = 0; i < verts.size(); ++i)
      if (!rg.vertex_colors[i].isZero())
        shade_normal_backward(normals[i], seq.light, rg.vertex_colors[i], grad_normals[i]);
    vertex_normals_backward(mesh, grad_normals, rg.vertices);

    for (size_t i = 0; i < verts.size(); ++i) (*grad_verts)[i] += rg.vertices[i];
  }
  return total;
}

std::vector<char> deform_targets(const MeshRefSequence& seq, const MeshRefFrame& frame) {
  // Invisible vertices plus head vertices (head rigidity).
  std::vector<char> targets(frame.visible.size(), 0);
  for (size_t i = 0; i < targets.size(); ++i)
    targets[i] = !frame.visible[i] || seq.groups[i] == BodyGroup::kHead;
  return targets;
}

}  // namespace

double loss_selfsup(const MeshRefSequence& seq, int t_prev, int t_cur, int t_next,
                    const std::vector<Image>& disp_maps, const PropagationBuffer& buffer,
                    const MeshRefConfig& config, const PerceptualDistance& pct,
                    std::vector<Image>* map_grads) {
  const MeshRefFrame& cur = seq.frames[t_cur];
  const auto& uv = seq.fine_topology.uv;

  const auto verts_cur = displaced_positions(cur.base_fine, uv, disp_maps[t_cur]);
  std::vector<Eigen::Vector3d> grad_cur;
  if (map_grads) grad_cur.assign(verts_cur.size(), Eigen::Vector3d::Zero());

  double total = render_terms(seq, cur, verts_cur, config, pct,
                              map_grads ? &grad_cur : nullptr);

  const auto neighbors = vertex_neighbors(seq.fine_topology);

  if (config.lambda_pos > 0.0) {
    std::vector<Eigen::Vector3d> g;
    if (map_grads) g.assign(verts_cur.size(), Eigen::Vector3d::Zero());
    total += config.lambda_pos *
             loss_position(verts_cur, cur.base_fine, cur.visible, map_grads ? &g : nullptr);
    if (map_grads)
      for (size_t i = 0; i < g.size(); ++i) grad_cur[i] += config.lambda_pos * g[i];
  }
  if (config.lambda_lap > 0.0) {
    std::vector<Eigen::Vector3d> g;
    if (map_grads) g.assign(verts_cur.size(), Eigen::Vector3d::Zero());
    total += config.lambda_lap *
             loss_laplacian_weighted(verts_cur, cur.base_fine, neighbors, seq.groups,
                                     cur.visible, map_grads ? &g : nullptr);
    if (map_grads)
      for (size_t i = 0; i < g.size(); ++i) grad_cur[i] += config.lambda_lap * g[i];
  }
  if (config.lambda_deform > 0.0) {
    std::vector<Eigen::Vector3d> g;
    if (map_grads) g.assign(verts_cur.size(), Eigen::Vector3d::Zero());
    const auto targets = deform_targets(seq, cur);
    total += config.lambda_deform *
             loss_deform_propagation(verts_cur, cur.base_fine, cur.tangent, buffer, targets,
                                     map_grads ? &g : nullptr);
    if (map_grads)
      for (size_t i = 0; i < g.size(); ++i) grad_cur[i] += config.lambda_deform * g[i];
  }

  const bool has_triplet = t_prev >= 0 && t_next >= 0;
  if (config.lambda_temp > 0.0 && has_triplet) {
    const auto verts_prev =
        displaced_positions(seq.frames[t_prev].base_fine, uv, disp_maps[t_prev]);
    const auto verts_next =
        displaced_positions(seq.frames[t_next].base_fine, uv, disp_maps[t_next]);
    std::vector<Eigen::Vector3d> gp, gc, gn;
    if (map_grads) {
      gp.assign(verts_cur.size(), Eigen::Vector3d::Zero());
      gc.assign(verts_cur.size(), Eigen::Vector3d::Zero());
      gn.assign(verts_cur.size(), Eigen::Vector3d::Zero());
    }
    total += config.lambda_temp *
             loss_motion(verts_prev, verts_cur, verts_next, map_grads ? &gp : nullptr,
                         map_grads ? &gc : nullptr, map_grads ? &gn : nullptr);
    if (map_grads) {
      for (size_t i = 0; i < gc.size(); ++i) grad_cur[i] += config.lambda_temp * gc[i];
      for (auto& v : gp) v *= config.lambda_temp;
      for (auto& v : gn) v *= config.lambda_temp;
      displacement_backward(uv, gp, (*map_grads)[t_prev]);
      displacement_backward(uv, gn, (*map_grads)[t_next]);
    }
  }

  if (map_grads) displacement_backward(uv, grad_cur, (*map_grads)[t_cur]);
  return total;
}

std::vector<Image> optimize_displacements(const MeshRefSequence& seq,
                                          const MeshRefConfig& config,
                                          const PerceptualDistance& pct,
                                          MeshRefReport* report) {
  const int n = static_cast<int>(seq.frames.size());
  if (n == 0) throw std::invalid_argument("optimize_displacements: empty sequence");

  std::vector<Image> maps(n, Image(config.uv_resolution, config.uv_resolution, 3));
  std::vector<char> is_keyframe(n, 0);
  for (int k : seq.keyframes) is_keyframe[k] = 1;

  PropagationBuffer buffer(seq.fine_topology.vertices.size());
  const auto& uv = seq.fine_topology.uv;

  const size_t map_n = maps[0].size();
  std::vector<Adam> opts;
  opts.reserve(n);
  for (int i = 0; i < n; ++i) opts.emplace_back(map_n, config.learning_rate);

  Rng rng(config.seed);
  double initial_loss = -1.0;
  int high_loss_streak = 0;

  std::vector<Image> grads(n);
  for (int iter = 0; iter < config.iterations; ++iter) {
    const int t = rng.uniform_int(n);
    const int t_prev = t > 0 ? t - 1 : -1;
    const int t_next = t + 1 < n ? t + 1 : -1;

    // Only the triplet accumulates gradients; allocate lazily.
    for (int m : {t_prev, t, t_next})
      if (m >= 0) grads[m] = Image(config.uv_resolution, config.uv_resolution, 3);

    const double loss = loss_selfsup(seq, t_prev, t, t_next, maps, buffer, config, pct, &grads);
    if (report) {
      report->loss_curve.push_back(loss);
      report->sampled_frames.push_back(t);
    }
    if (initial_loss < 0.0) initial_loss = loss;
    if (loss > 10.0 * initial_loss && initial_loss > 0.0) {
      if (++high_loss_streak >= 100) {
        if (report) report->diverged = true;
        throw DivergenceError("optimize_displacements: loss exceeded 10x initial for 100 steps");
      }
    } else {
      high_loss_streak = 0;
    }

    for (int m : {t_prev, t, t_next}) {
      if (m < 0) continue;
      opts[m].step(maps[m].data(), grads[m].data(), map_n);
      // keep displacements physically small
      Image& map = maps[m];
      for (int y = 0; y < map.height(); ++y)
        for (int x = 0; x < map.width(); ++x) {
          Eigen::Vector3d d(map.at(y, x, 0), map.at(y, x, 1), map.at(y, x, 2));
          const double len = d.norm();
          if (len > config.d_max) {
            d *= config.d_max / len;
            map.at(y, x, 0) = d.x();
            map.at(y, x, 1) = d.y();
            map.at(y, x, 2) = d.z();
          }
        }
      grads[m] = Image();
    }

    if (is_keyframe[t]) {
      const auto verts = displaced_positions(seq.frames[t].base_fine, uv, maps[t]);
      update_propagation_buffer(buffer, verts, seq.frames[t].base_fine,
                                seq.frames[t].tangent, seq.frames[t].visible, t);
    }
  }
  return maps;
}

void save_displacement_png(const std::string& path, const Image& displacement, double d_max) {
  Image scaled = displacement;
  for (size_t i = 0; i < scaled.size(); ++i)
    scaled.data()[i] = scaled.data()[i] / (2.0 * d_max) + 0.5;
  write_png(path, scaled, 16);
}

Image load_displacement_png(const std::string& path, double d_max) {
  Image img = read_png(path);
  for (size_t i = 0; i < img.size(); ++i)
    img.data()[i] = (img.data()[i] - 0.5) * 2.0 * d_max;
  return img;
}

}  // namespace texrec
