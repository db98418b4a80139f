#include "texrec/pipeline.h"

#include <fstream>
#include <set>

#include <json.hpp>

#include "texrec/png_io.h"
#include "texrec/raster.h"

namespace texrec {

namespace fs = std::filesystem;

namespace {

void write_loss_csv(const fs::path& path, const std::vector<double>& losses,
                    const std::vector<int>& frames) {
  std::ofstream out(path);
  out << "iteration,frame,loss\n";
  char buf[64];
  for (size_t i = 0; i < losses.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%d,%.9g\n", i, frames[i], losses[i]);
    out << buf;
  }
}

// Albedo image for one frame: coarse-mesh normals rendered hard, SH
// shading, division, and consolidation against the blurred baseline
// prediction.
Image albedo_for_frame(const FrameBundle& frame, const Camera& camera, const SHLight& light) {
  const auto vn = vertex_normals(frame.coarse);
  std::vector<double> attr(frame.coarse.vertices.size() * 3);
  for (size_t i = 0; i < vn.size(); ++i)
    for (int c = 0; c < 3; ++c) attr[i * 3 + c] = vn[i][c];
  const RasterOutput ras = rasterize_hard(frame.coarse, camera, attr, 3);

  Image normals(camera.height, camera.width, 3);
  Image mask(camera.height, camera.width, 1);
  for (int y = 0; y < camera.height; ++y)
    for (int x = 0; x < camera.width; ++x) {
      if (ras.face_at(y, x) < 0 || frame.mask.at(y, x, 0) <= 0.0) continue;
      Eigen::Vector3d n(ras.color.at(y, x, 0), ras.color.at(y, x, 1), ras.color.at(y, x, 2));
      const double len = n.norm();
      if (len < 1e-9) continue;
      n /= len;
      for (int c = 0; c < 3; ++c) normals.at(y, x, c) = n[c];
      mask.at(y, x, 0) = 1.0;
    }

  const Image shading = shading_image(normals, light, mask);
  const Image a_div = albedo_by_division(frame.image, shading, mask);
  const Image a_pred = baseline_albedo_prediction(a_div, mask);
  return consolidate_albedo(a_pred, a_div, mask);
}

}  // namespace

PipelineConfig PipelineConfig::load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  nlohmann::json j;
  in >> j;
  PipelineConfig cfg;
  cfg.seed = j.value("seed", cfg.seed);
  cfg.uv_resolution = j.value("uv_resolution", cfg.uv_resolution);
  cfg.uv_tolerance_texels = j.value("uv_tolerance_texels", cfg.uv_tolerance_texels);
  cfg.run_meshref = j.value("run_meshref", cfg.run_meshref);
  cfg.evaluate = j.value("evaluate", cfg.evaluate);
  if (j.contains("texgen")) {
    const auto& t = j["texgen"];
    cfg.texgen.keyframes = t.value("keyframes", cfg.texgen.keyframes);
    cfg.texgen.lambda_l1 = t.value("lambda_l1", cfg.texgen.lambda_l1);
    cfg.texgen.lambda_pct = t.value("lambda_pct", cfg.texgen.lambda_pct);
    cfg.texgen.lambda_lap = t.value("lambda_lap", cfg.texgen.lambda_lap);
    cfg.texgen.learning_rate = t.value("learning_rate", cfg.texgen.learning_rate);
    cfg.texgen.iterations = t.value("iterations", cfg.texgen.iterations);
    cfg.texgen.augment_adjacent = t.value("augment_adjacent", cfg.texgen.augment_adjacent);
    cfg.texgen.optimize_vertices = t.value("optimize_vertices", cfg.texgen.optimize_vertices);
    cfg.texgen.tv_weight = t.value("tv_weight", cfg.texgen.tv_weight);
  }
  if (j.contains("meshref")) {
    const auto& m = j["meshref"];
    cfg.meshref.lambda_pct = m.value("lambda_pct", cfg.meshref.lambda_pct);
    cfg.meshref.lambda_sil = m.value("lambda_sil", cfg.meshref.lambda_sil);
    cfg.meshref.lambda_temp = m.value("lambda_temp", cfg.meshref.lambda_temp);
    cfg.meshref.lambda_pos = m.value("lambda_pos", cfg.meshref.lambda_pos);
    cfg.meshref.lambda_lap = m.value("lambda_lap", cfg.meshref.lambda_lap);
    cfg.meshref.lambda_deform = m.value("lambda_deform", cfg.meshref.lambda_deform);
    cfg.meshref.learning_rate = m.value("learning_rate", cfg.meshref.learning_rate);
    cfg.meshref.iterations = m.value("iterations", cfg.meshref.iterations);
    cfg.meshref.d_max = m.value("d_max", cfg.meshref.d_max);
    cfg.meshref.uv_resolution = m.value("uv_resolution", cfg.meshref.uv_resolution);
  }
  return cfg;
}

PipelineResult run_pipeline(const fs::path& scene_dir, const fs::path& out_dir,
                            const PipelineConfig& config) {
  const Scene scene = Scene::load(scene_dir);
  const int n = scene.manifest.frame_count;
  fs::create_directories(out_dir / "visibility");
  fs::create_directories(out_dir / "albedo");

  const UvLookup lookup = uv_lookup_table(scene.atlas, config.uv_resolution);
  const double tol = config.uv_tolerance_texels / config.uv_resolution;

  // --- Stage 1: per-frame visibility maps -------------------------------
  std::vector<Image> visibilities(n);
  for (int i = 0; i < n; ++i) {
    const fs::path file = out_dir / "visibility" / frame_name(i, "png");
    if (fs::exists(file)) {
      visibilities[i] = read_png(file.string());
      continue;
    }
    const FrameBundle frame = scene.load_frame(i);
    visibilities[i] = visibility_map(frame.coarse, scene.camera, lookup, tol);
    write_png(file.string(), visibilities[i], 8);
  }
  const Image v_rest = visibility_map(scene.rest_pose, scene.camera, lookup, tol);

  // --- Stage 2: keyframe selection --------------------------------------
  PipelineResult result;
  const int k = std::min(config.texgen.keyframes, n);
  result.selection = select_keyframes(visibilities, v_rest, k);
  KeyframeSelection expanded = config.texgen.augment_adjacent
                                   ? augment_adjacent(result.selection, n)
                                   : result.selection;
  save_selection_json((out_dir / "selection.json").string(), expanded);

  // --- Stage 3: albedo images for the selected frames -------------------
  std::vector<Image> albedos(expanded.indices.size());
  std::vector<FrameBundle> bundles(expanded.indices.size());
  for (size_t s = 0; s < expanded.indices.size(); ++s) {
    const int i = expanded.indices[s];
    bundles[s] = scene.load_frame(i);
    const fs::path file = out_dir / "albedo" / frame_name(i, "png");
    if (fs::exists(file)) {
      albedos[s] = read_png(file.string());
      continue;
    }
    albedos[s] = albedo_for_frame(bundles[s], scene.camera, scene.light);
    write_png(file.string(), albedos[s], 8);
  }

  // --- Stage 4: partial textures and fusion -----------------------------
  const fs::path fused_file = out_dir / "fused.png";
  Image fused;
  if (fs::exists(fused_file)) {
    fused = read_png(fused_file.string());
  } else {
    std::vector<PartialTexture> partials;
    for (size_t s = 0; s < expanded.indices.size(); ++s)
      partials.push_back(
          partial_texture(albedos[s], bundles[s].coarse, scene.camera, lookup, tol));
    fused = fuse_coarse_texture(partials, expanded.marginal_gains);
    write_png(fused_file.string(), fused, 8);
  }

  // --- Stage 5: texture optimization -------------------------------------
  const fs::path texture_file = out_dir / "texture.png";
  if (fs::exists(texture_file)) {
    result.texture = read_png(texture_file.string());
  } else {
    std::vector<TexGenFrame> tg_frames(expanded.indices.size());
    for (size_t s = 0; s < expanded.indices.size(); ++s) {
      tg_frames[s].albedo = albedos[s];
      tg_frames[s].mask = bundles[s].mask;
      tg_frames[s].mesh = bundles[s].coarse;
      tg_frames[s].frame_index = expanded.indices[s];
      tg_frames[s].weight = expanded.weights[s];
    }
    std::vector<char> locked(scene.atlas.vertex_count(), 0);
    for (int i = 0; i < scene.atlas.vertex_count(); ++i)
      locked[i] = scene.groups[i] != BodyGroup::kBody;

    TexGenConfig tg = config.texgen;
    tg.seed = config.seed + 1;
    TexGenReport tg_report;
    result.texture = optimize_texture(tg_frames, scene.camera, fused, tg,
                                      default_perceptual_distance(), locked, &tg_report);
    write_png(texture_file.string(), result.texture, 8);
    write_loss_csv(out_dir / "texgen_loss.csv", tg_report.loss_curve, tg_report.sampled_frames);
  }

  // --- Stage 6: displacement optimization --------------------------------
  const TwoLevelMesh levels = subdivide(scene.atlas);
  if (config.run_meshref) {
    fs::create_directories(out_dir / "disp");
    fs::create_directories(out_dir / "meshes");
    bool have_all = true;
    for (int i = 0; i < n && have_all; ++i)
      have_all = fs::exists(out_dir / "disp" / frame_name(i, "png")) &&
                 fs::exists(out_dir / "meshes" / frame_name(i, "obj"));

    if (have_all) {
      result.displacement_maps.resize(n);
      for (int i = 0; i < n; ++i)
        result.displacement_maps[i] = load_displacement_png(
            (out_dir / "disp" / frame_name(i, "png")).string(), config.meshref.d_max);
    } else {
      MeshRefSequence seq;
      seq.fine_topology = levels.fine;
      seq.camera = scene.camera;
      seq.light = scene.light;
      seq.texture = result.texture;
      seq.groups = derive_fine_groups(levels, scene.groups);
      seq.keyframes = result.selection.indices;
      seq.frames.resize(n);
      for (int i = 0; i < n; ++i) {
        const FrameBundle fb = scene.load_frame(i);
        MeshRefFrame& mf = seq.frames[i];
        mf.image = fb.image;
        mf.mask = fb.mask;
        mf.confidence = fb.confidence;
        mf.base_fine = levels.fine_positions(fb.coarse.vertices);
        Mesh fine = levels.fine;
        fine.vertices = mf.base_fine;
        mf.visible = visible_vertex_mask(fine, scene.camera, config.meshref.depth_tolerance);
        mf.tangent = tangent_frames(fine);
      }

      MeshRefConfig mr = config.meshref;
      mr.seed = config.seed + 2;
      MeshRefReport mr_report;
      result.displacement_maps = optimize_displacements(seq, mr, default_perceptual_distance(),
                                                        &mr_report);
      for (int i = 0; i < n; ++i) {
        save_displacement_png((out_dir / "disp" / frame_name(i, "png")).string(),
                              result.displacement_maps[i], mr.d_max);
        Mesh fine = levels.fine;
        fine.vertices = displaced_positions(seq.frames[i].base_fine, levels.fine.uv,
                                            result.displacement_maps[i]);
        write_obj((out_dir / "meshes" / frame_name(i, "obj")).string(), fine);
      }
      write_loss_csv(out_dir / "meshref_loss.csv", mr_report.loss_curve,
                     mr_report.sampled_frames);
    }
  }

  // --- Stage 7: evaluation ------------------------------------------------
  if (config.evaluate && fs::exists(scene_dir / "gt" / "fine")) {
    std::vector<Mesh> predicted, truth;
    for (int i = 0; i < n; ++i) {
      truth.push_back(read_obj((scene_dir / "gt" / "fine" / frame_name(i, "obj")).string()));
      if (config.run_meshref) {
        predicted.push_back(read_obj((out_dir / "meshes" / frame_name(i, "obj")).string()));
      } else {
        const FrameBundle fb = scene.load_frame(i);
        Mesh fine = levels.fine;
        fine.vertices = levels.fine_positions(fb.coarse.vertices);
        predicted.push_back(fine);
      }
    }
    EvalReport report = eval_meshes(predicted, truth, {scene.camera});
    const fs::path gt_tex = scene_dir / "gt" / "texture.png";
    if (fs::exists(gt_tex)) {
      Image valid(config.uv_resolution, config.uv_resolution, 1);
      const Image gt_texture = read_png(gt_tex.string());
      if (gt_texture.same_shape(result.texture)) {
        for (int y = 0; y < valid.height(); ++y)
          for (int x = 0; x < valid.width(); ++x)
            valid.at(y, x, 0) = lookup.face_at(y, x) >= 0 ? 1.0 : 0.0;
        eval_texture(result.texture, gt_texture, valid, report);
      }
    }
    report.save_json((out_dir / "report.json").string());
    result.report = report;
  }
  return result;
}

}  // namespace texrec
