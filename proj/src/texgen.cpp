#include "texrec/texgen.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "texrec/adam.h"
#include "texrec/rng.h"

namespace texrec {

namespace {

double l1_diff(const Image& a, const Image& b) {
  double total = 0.0;
  for (size_t i = 0; i < a.size(); ++i) total += std::abs(a.data()[i] - b.data()[i]);
  return total;
}

void recompute_weights(KeyframeSelection& sel) {
  const int k = static_cast<int>(sel.indices.size());
  const double gain_sum =
      std::accumulate(sel.marginal_gains.begin(), sel.marginal_gains.end(), 0.0);
  sel.weights.resize(sel.indices.size());
  for (size_t i = 0; i < sel.indices.size(); ++i) {
    const double share = gain_sum > 0.0 ? sel.marginal_gains[i] / gain_sum : 1.0 / k;
    sel.weights[i] = 1.0 / k + share;
  }
}

}  // namespace

KeyframeSelection select_keyframes(const std::vector<Image>& visibilities,
                                   const Image& v_rest, int k) {
  const int n = static_cast<int>(visibilities.size());
  if (k < 1 || k > n) throw std::invalid_argument("select_keyframes: K out of range");
  for (const auto& v : visibilities)
    if (!v.same_shape(v_rest)) throw std::invalid_argument("select_keyframes: map shape mismatch");

  KeyframeSelection sel;
  std::vector<char> taken(n, 0);

  // Seed: the frame whose visibility is closest to the rest pose.
  int first = 0;
  double best = std::numeric_limits<double>::max();
  for (int i = 0; i < n; ++i) {
    const double d = l1_diff(visibilities[i], v_rest);
    if (d < best) {
      best = d;
      first = i;
    }
  }
  taken[first] = 1;
  sel.indices.push_back(first);

  Image covered = visibilities[first];
  double gain0 = 0.0;
  for (size_t i = 0; i < covered.size(); ++i) gain0 += covered.data()[i];
  sel.marginal_gains.push_back(gain0);

  // Greedy: each step adds the frame with the largest coverage gain over
  // the running per-texel max; ties go to the lowest frame index.
  for (int step = 1; step < k; ++step) {
    int pick = -1;
    double pick_gain = -1.0;
    for (int i = 0; i < n; ++i) {
      if (taken[i]) continue;
      double gain = 0.0;
      for (size_t t = 0; t < covered.size(); ++t)
        gain += std::max(0.0, visibilities[i].data()[t] - covered.data()[t]);
      if (gain > pick_gain) {
        pick_gain = gain;
        pick = i;
      }
    }
    taken[pick] = 1;
    sel.indices.push_back(pick);
    sel.marginal_gains.push_back(pick_gain);
    for (size_t t = 0; t < covered.size(); ++t)
      covered.data()[t] = std::max(covered.data()[t], visibilities[pick].data()[t]);
  }

  recompute_weights(sel);
  return sel;
}

KeyframeSelection augment_adjacent(const KeyframeSelection& selection, int frame_count) {
  KeyframeSelection out = selection;
  std::vector<char> present(frame_count, 0);
  for (int idx : selection.indices) present[idx] = 1;

  // neighbor frame -> best half-gain seen so far
  std::vector<double> neighbor_gain(frame_count, -1.0);
  for (size_t i = 0; i < selection.indices.size(); ++i) {
    for (int d : {-1, 1}) {
      const int nb = selection.indices[i] + d;
      if (nb < 0 || nb >= frame_count || present[nb]) continue;
      neighbor_gain[nb] = std::max(neighbor_gain[nb], selection.marginal_gains[i] / 2.0);
    }
  }
  // Append in parent order (-1 neighbor first) so the result is stable.
  for (size_t i = 0; i < selection.indices.size(); ++i) {
    for (int d : {-1, 1}) {
      const int nb = selection.indices[i] + d;
      if (nb < 0 || nb >= frame_count || present[nb]) continue;
      if (neighbor_gain[nb] != selection.marginal_gains[i] / 2.0) continue;
      present[nb] = 1;
      out.indices.push_back(nb);
      out.marginal_gains.push_back(neighbor_gain[nb]);
    }
  }
  recompute_weights(out);
  return out;
}

Image fuse_coarse_texture(const std::vector<PartialTexture>& partials,
                          const std::vector<double>& gains, Image* valid) {
  if (partials.empty()) throw std::invalid_argument("fuse_coarse_texture: no inputs");
  if (partials.size() != gains.size())
    throw std::invalid_argument("fuse_coarse_texture: gain count mismatch");
  const Image& first = partials[0].albedo;
  Image num = Image::zeros_like(first);
  Image den(first.height(), first.width(), 1);
  for (size_t i = 0; i < partials.size(); ++i) {
    const auto& p = partials[i];
    if (!p.albedo.same_shape(first))
      throw std::invalid_argument("fuse_coarse_texture: resolution mismatch");
    for (int y = 0; y < first.height(); ++y)
      for (int x = 0; x < first.width(); ++x) {
        const double wv = gains[i] * p.visibility.at(y, x, 0);
        if (wv == 0.0) continue;
        den.at(y, x, 0) += wv;
        for (int c = 0; c < first.channels(); ++c)
          num.at(y, x, c) += wv * p.albedo.at(y, x, c);
      }
  }
  Image out = Image::zeros_like(first);
  if (valid) *valid = Image(first.height(), first.width(), 1);
  for (int y = 0; y < first.height(); ++y)
    for (int x = 0; x < first.width(); ++x) {
      if (den.at(y, x, 0) <= 0.0) continue;
      for (int c = 0; c < first.channels(); ++c)
        out.at(y, x, c) = num.at(y, x, c) / den.at(y, x, 0);
      if (valid) valid->at(y, x, 0) = 1.0;
    }
  return out;
}

namespace {

// lambda_l1 |(R - A) M|_1 with gradient in image space.
double masked_l1(const Image& r, const Image& a, const Image& mask, double weight,
                 Image* grad_r) {
  double total = 0.0;
  for (int y = 0; y < r.height(); ++y)
    for (int x = 0; x < r.width(); ++x) {
      const double m = mask.at(y, x, 0);
      if (m <= 0.0) continue;
      for (int c = 0; c < r.channels(); ++c) {
        const double d = (r.at(y, x, c) - a.at(y, x, c)) * m;
        total += std::abs(d);
        if (grad_r && d != 0.0) grad_r->at(y, x, c) += weight * (d > 0 ? m : -m);
      }
    }
  return weight * total;
}

Image masked(const Image& img, const Image& mask) {
  Image out = img;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) *= mask.at(y, x, 0);
  return out;
}

double tv_loss(const Image& tex, double weight, Image* grad) {
  if (weight <= 0.0) return 0.0;
  double total = 0.0;
  for (int y = 0; y < tex.height(); ++y)
    for (int x = 0; x < tex.width(); ++x)
      for (int c = 0; c < tex.channels(); ++c) {
        if (x + 1 < tex.width()) {
          const double d = tex.at(y, x + 1, c) - tex.at(y, x, c);
          total += std::abs(d);
          if (grad && d != 0.0) {
            const double s = d > 0 ? weight : -weight;
            grad->at(y, x + 1, c) += s;
            grad->at(y, x, c) -= s;
          }
        }
        if (y + 1 < tex.height()) {
          const double d = tex.at(y + 1, x, c) - tex.at(y, x, c);
          total += std::abs(d);
          if (grad && d != 0.0) {
            const double s = d > 0 ? weight : -weight;
            grad->at(y + 1, x, c) += s;
            grad->at(y, x, c) -= s;
          }
        }
      }
  return weight * total;
}

}  // namespace

double loss_texgen(const SoftRasterResult& rendered, const Image& albedo, const Image& mask,
                   const Mesh& mesh, const Camera& camera, const Image& texture,
                   const std::vector<Eigen::Vector3d>& verts_orig,
                   const std::vector<std::vector<int>>& neighbors, const TexGenConfig& config,
                   const PerceptualDistance& pct, TexGenLossGrads* grads) {
  Image grad_image;
  if (grads) grad_image = Image(rendered.color.height(), rendered.color.width(), 3);

  double total = masked_l1(rendered.color, albedo, mask, config.lambda_l1,
                           grads ? &grad_image : nullptr);

  if (config.lambda_pct > 0.0) {
    const Image rm = masked(rendered.color, mask);
    const Image am = masked(albedo, mask);
    if (grads) {
      Image pg(rm.height(), rm.width(), rm.channels());
      total += config.lambda_pct * pct.eval_with_grad(rm, am, pg);
      for (int y = 0; y < pg.height(); ++y)
        for (int x = 0; x < pg.width(); ++x)
          for (int c = 0; c < 3; ++c)
            grad_image.at(y, x, c) += config.lambda_pct * pg.at(y, x, c) * mask.at(y, x, 0);
    } else {
      total += config.lambda_pct * pct.eval(rm, am);
    }
  }

  // Laplacian anchor on the (possibly adjusted) vertices.
  std::vector<Eigen::Vector3d> grad_delta;
  if (config.lambda_lap > 0.0) {
    const auto delta_p = laplacian_coords(mesh.vertices, neighbors);
    const auto delta_o = laplacian_coords(verts_orig, neighbors);
    if (grads) grad_delta.assign(mesh.vertices.size(), Eigen::Vector3d::Zero());
    double lap = 0.0;
    for (size_t i = 0; i < delta_p.size(); ++i) {
      const Eigen::Vector3d d = delta_p[i] - delta_o[i];
      lap += d.cwiseAbs().sum();
      if (grads)
        grad_delta[i] = config.lambda_lap *
                        d.unaryExpr([](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
    }
    total += config.lambda_lap * lap;
  }

  total += tv_loss(texture, config.tv_weight, grads ? &grads->texture : nullptr);

  if (grads) {
    SoftRasterGrads rg;
    rg.texture = Image::zeros_like(grads->texture);
    if (!grads->vertices.empty())
      rg.vertices.assign(mesh.vertices.size(), Eigen::Vector3d::Zero());
    soft_rasterize_backward(mesh, camera, &texture, nullptr, config.raster, rendered,
                            grad_image, Image(), rg);
    for (size_t i = 0; i < grads->texture.size(); ++i)
      grads->texture.data()[i] += rg.texture.data()[i];
    if (!grads->vertices.empty()) {
      for (size_t i = 0; i < rg.vertices.size(); ++i) grads->vertices[i] += rg.vertices[i];
      if (config.lambda_lap > 0.0)
        laplacian_coords_backward(neighbors, grad_delta, grads->vertices);
    }
  }
  return total;
}

Image optimize_texture(std::vector<TexGenFrame>& frames, const Camera& camera,
                       const Image& init, const TexGenConfig& config,
                       const PerceptualDistance& pct, const std::vector<char>& locked_vertices,
                       TexGenReport* report,
                       std::vector<std::vector<Eigen::Vector3d>>* refined_vertices) {
  if (frames.empty()) throw std::invalid_argument("optimize_texture: no frames");

  Image texture = init;
  std::vector<double> weights;
  for (const auto& f : frames) weights.push_back(f.weight);

  const auto neighbors = vertex_neighbors(frames[0].mesh);
  std::vector<std::vector<Eigen::Vector3d>> orig_verts;
  for (const auto& f : frames) orig_verts.push_back(f.mesh.vertices);

  const size_t tex_n = texture.size();
  const size_t vert_n = config.optimize_vertices ? frames.size() * frames[0].mesh.vertices.size() * 3 : 0;
  Adam opt(tex_n + vert_n, config.learning_rate);

  Rng rng(config.seed);
  double best_avg = std::numeric_limits<double>::max();
  Image best_texture = texture;
  std::vector<std::vector<Eigen::Vector3d>> best_verts = orig_verts;
  std::vector<double> window;
  const int window_len = 20;
  int high_loss_streak = 0;
  double initial_loss = -1.0;

  std::vector<double> flat_grads(tex_n + vert_n, 0.0);
  std::vector<double> flat_params(tex_n + vert_n, 0.0);

  for (int iter = 0; iter < config.iterations; ++iter) {
    const int pick = rng.sample_discrete(weights);
    TexGenFrame& frame = frames[pick];

    const SoftRasterResult rendered =
        soft_rasterize(frame.mesh, camera, &texture, nullptr, config.raster);

    TexGenLossGrads grads;
    grads.texture = Image::zeros_like(texture);
    if (config.optimize_vertices)
      grads.vertices.assign(frame.mesh.vertices.size(), Eigen::Vector3d::Zero());

    const double loss =
        loss_texgen(rendered, frame.albedo, frame.mask, frame.mesh, camera, texture,
                    orig_verts[pick], neighbors, config, pct, &grads);

    if (report) {
      report->loss_curve.push_back(loss);
      report->sampled_frames.push_back(frame.frame_index);
    }
    if (initial_loss < 0.0) initial_loss = loss;
    if (loss > 10.0 * initial_loss && initial_loss > 0.0) {
      if (++high_loss_streak >= 100) {
        if (report) report->diverged = true;
        throw DivergenceError("optimize_texture: loss exceeded 10x initial for 100 steps");
      }
    } else {
      high_loss_streak = 0;
    }

    window.push_back(loss);
    if (static_cast<int>(window.size()) > window_len) window.erase(window.begin());
    const double avg = std::accumulate(window.begin(), window.end(), 0.0) / window.size();
    if (static_cast<int>(window.size()) == window_len && avg < best_avg) {
      best_avg = avg;
      best_texture = texture;
      if (config.optimize_vertices) {
        best_verts.clear();
        for (const auto& f : frames) best_verts.push_back(f.mesh.vertices);
      }
      if (report) report->best_iteration = iter;
    }

    // Flatten, step, unflatten.
    std::fill(flat_grads.begin(), flat_grads.end(), 0.0);
    std::copy(grads.texture.data(), grads.texture.data() + tex_n, flat_grads.begin());
    std::copy(texture.data(), texture.data() + tex_n, flat_params.begin());
    if (config.optimize_vertices) {
      const size_t per_frame = frames[0].mesh.vertices.size() * 3;
      for (size_t i = 0; i < frame.mesh.vertices.size(); ++i) {
        if (!locked_vertices.empty() && locked_vertices[i]) continue;
        for (int c = 0; c < 3; ++c)
          flat_grads[tex_n + pick * per_frame + i * 3 + c] = grads.vertices[i][c];
      }
      for (size_t fi = 0; fi < frames.size(); ++fi)
        for (size_t i = 0; i < frames[fi].mesh.vertices.size(); ++i)
          for (int c = 0; c < 3; ++c)
            flat_params[tex_n + fi * per_frame + i * 3 + c] = frames[fi].mesh.vertices[i][c];
    }
    opt.step(flat_params.data(), flat_grads.data(), flat_params.size());
    std::copy(flat_params.begin(), flat_params.begin() + tex_n, texture.data());
    if (config.optimize_vertices) {
      const size_t per_frame = frames[0].mesh.vertices.size() * 3;
      for (size_t fi = 0; fi < frames.size(); ++fi)
        for (size_t i = 0; i < frames[fi].mesh.vertices.size(); ++i)
          for (int c = 0; c < 3; ++c)
            frames[fi].mesh.vertices[i][c] = flat_params[tex_n + fi * per_frame + i * 3 + c];
    }
  }

  if (static_cast<int>(window.size()) < window_len) best_texture = texture;
  if (refined_vertices) {
    *refined_vertices =
        config.optimize_vertices ? best_verts : orig_verts;
  }
  return best_texture;
}

void save_selection_json(const std::string& path, const KeyframeSelection& sel) {
  nlohmann::ordered_json j;
  j["indices"] = sel.indices;
  j["marginal_gains"] = sel.marginal_gains;
  j["weights"] = sel.weights;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("selection: cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace texrec
