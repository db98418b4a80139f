#include "texrec/metrics.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "texrec/raster.h"
#include "texrec/ssim.h"

namespace texrec {

namespace {

struct NormalRender {
  Image normals;  // unit normals inside silhouette, zero outside
  Image silhouette;
};

NormalRender render_normals(const Mesh& mesh, const Camera& camera) {
  const auto vn = vertex_normals(mesh);
  std::vector<double> attr(mesh.vertices.size() * 3);
  for (size_t i = 0; i < vn.size(); ++i)
    for (int c = 0; c < 3; ++c) attr[i * 3 + c] = vn[i][c];
  RasterOutput ras = rasterize_hard(mesh, camera, attr, 3);

  NormalRender out;
  out.silhouette = ras.silhouette;
  out.normals = Image(camera.height, camera.width, 3);
  for (int y = 0; y < camera.height; ++y)
    for (int x = 0; x < camera.width; ++x) {
      if (ras.face_at(y, x) < 0) continue;
      Eigen::Vector3d n(ras.color.at(y, x, 0), ras.color.at(y, x, 1), ras.color.at(y, x, 2));
      const double len = n.norm();
      if (len > 1e-12) n /= len;
      for (int c = 0; c < 3; ++c) out.normals.at(y, x, c) = n[c];
    }
  return out;
}

}  // namespace

EvalReport eval_meshes(const std::vector<Mesh>& predicted,
                       const std::vector<Mesh>& ground_truth,
                       const std::vector<Camera>& cameras) {
  if (predicted.size() != ground_truth.size() || predicted.empty())
    throw std::invalid_argument("eval_meshes: frame count mismatch");

  EvalReport report;
  for (size_t f = 0; f < predicted.size(); ++f) {
    const Camera& cam = cameras.size() == 1 ? cameras[0] : cameras.at(f);
    const NormalRender p = render_normals(predicted[f], cam);
    const NormalRender g = render_normals(ground_truth[f], cam);

    // Silhouette IoU.
    long inter = 0, uni = 0;
    int x_lo = cam.width, x_hi = -1, y_lo = cam.height, y_hi = -1;
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x) {
        const bool a = p.silhouette.at(y, x, 0) > 0.5;
        const bool b = g.silhouette.at(y, x, 0) > 0.5;
        if (a && b) ++inter;
        if (a || b) {
          ++uni;
          x_lo = std::min(x_lo, x);
          x_hi = std::max(x_hi, x);
          y_lo = std::min(y_lo, y);
          y_hi = std::max(y_hi, y);
        }
      }
    report.iou.push_back(uni == 0 ? 1.0 : static_cast<double>(inter) / uni);

    // Normal RMSE inside the silhouette intersection.
    double se = 0.0;
    long n = 0;
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x) {
        if (p.silhouette.at(y, x, 0) <= 0.5 || g.silhouette.at(y, x, 0) <= 0.5) continue;
        for (int c = 0; c < 3; ++c) {
          const double d = p.normals.at(y, x, c) - g.normals.at(y, x, c);
          se += d * d;
        }
        n += 3;
      }
    report.normal_rmse.push_back(n == 0 ? 0.0 : std::sqrt(se / n));

    // MS-SSIM of [0,1]-mapped normals inside the union bounding box.
    if (x_hi < x_lo) {
      report.ms_ssim.push_back(1.0);
    } else {
      const int bw = x_hi - x_lo + 1, bh = y_hi - y_lo + 1;
      Image a(bh, bw, 3), b(bh, bw, 3);
      for (int y = 0; y < bh; ++y)
        for (int x = 0; x < bw; ++x)
          for (int c = 0; c < 3; ++c) {
            a.at(y, x, c) = 0.5 * (p.normals.at(y + y_lo, x + x_lo, c) + 1.0);
            b.at(y, x, c) = 0.5 * (g.normals.at(y + y_lo, x + x_lo, c) + 1.0);
          }
      report.ms_ssim.push_back(ms_ssim(a, b));
    }
  }

  const auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / v.size();
  };
  report.mean_iou = mean(report.iou);
  report.mean_rmse = mean(report.normal_rmse);
  report.mean_ms_ssim = mean(report.ms_ssim);
  return report;
}

void eval_texture(const Image& predicted, const Image& ground_truth, const Image& valid,
                  EvalReport& report) {
  if (!predicted.same_shape(ground_truth))
    throw std::invalid_argument("eval_texture: shape mismatch");
  double se = 0.0;
  long n = 0;
  for (int y = 0; y < predicted.height(); ++y)
    for (int x = 0; x < predicted.width(); ++x) {
      if (valid.at(y, x, 0) <= 0.0) continue;
      for (int c = 0; c < predicted.channels(); ++c) {
        const double d = predicted.at(y, x, c) - ground_truth.at(y, x, c);
        se += d * d;
      }
      n += predicted.channels();
    }
  report.texture_rmse = n == 0 ? 0.0 : std::sqrt(se / n);
  report.texture_ms_ssim = ms_ssim(predicted, ground_truth);
}

Image render_textured_hard(const Mesh& mesh, const Camera& camera, const Image& texture,
                           const SHLight& light, const Eigen::Vector3d& background,
                           Image* mask_out) {
  // Interpolate normals and UVs, then shade per pixel.
  const auto vn = vertex_normals(mesh);
  std::vector<double> attr(mesh.vertices.size() * 5);
  for (size_t i = 0; i < vn.size(); ++i) {
    for (int c = 0; c < 3; ++c) attr[i * 5 + c] = vn[i][c];
    attr[i * 5 + 3] = mesh.uv[i].x();
    attr[i * 5 + 4] = mesh.uv[i].y();
  }
  RasterOutput ras = rasterize_hard(mesh, camera, attr, 5);

  Image out(camera.height, camera.width, 3);
  if (mask_out) *mask_out = Image(camera.height, camera.width, 1);
  double tex[4] = {1, 1, 1, 1};
  for (int y = 0; y < camera.height; ++y)
    for (int x = 0; x < camera.width; ++x) {
      if (ras.face_at(y, x) < 0) {
        for (int c = 0; c < 3; ++c) out.at(y, x, c) = background[c];
        continue;
      }
      Eigen::Vector3d n(ras.color.at(y, x, 0), ras.color.at(y, x, 1), ras.color.at(y, x, 2));
      const double len = n.norm();
      if (len > 1e-9) n /= len;
      const Eigen::Vector3d e = shade_normal(n, light);
      texture.sample_bilinear(ras.color.at(y, x, 3) * texture.width(),
                              ras.color.at(y, x, 4) * texture.height(), tex);
      for (int c = 0; c < 3; ++c) {
        const double albedo = tex[std::min(c, texture.channels() - 1)];
        out.at(y, x, c) = albedo * e[c];
      }
      if (mask_out) mask_out->at(y, x, 0) = 1.0;
    }
  return out;
}

Image render_novel(const Mesh& mesh, const Image& texture, const SHLight& light,
                   const Camera& camera) {
  Image mask;
  const Image rgb =
      render_textured_hard(mesh, camera, texture, light, Eigen::Vector3d::Zero(), &mask);
  Image rgba(camera.height, camera.width, 4);
  for (int y = 0; y < camera.height; ++y)
    for (int x = 0; x < camera.width; ++x) {
      for (int c = 0; c < 3; ++c) rgba.at(y, x, c) = rgb.at(y, x, c);
      rgba.at(y, x, 3) = mask.at(y, x, 0);
    }
  return rgba;
}

Image relight(const Mesh& mesh, const Image& texture, const SHLight& new_light,
              const Camera& camera) {
  return render_novel(mesh, texture, new_light, camera);
}

void EvalReport::save_json(const std::string& path) const {
  nlohmann::ordered_json j;
  j["mean_iou"] = mean_iou;
  j["mean_normal_rmse"] = mean_rmse;
  j["mean_ms_ssim"] = mean_ms_ssim;
  j["iou"] = iou;
  j["normal_rmse"] = normal_rmse;
  j["ms_ssim"] = ms_ssim;
  if (texture_rmse) j["texture_rmse"] = *texture_rmse;
  if (texture_ms_ssim) j["texture_ms_ssim"] = *texture_ms_ssim;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("eval: cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace texrec
