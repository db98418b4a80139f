// Command-line front end: scene synthesis, texture generation, mesh
// refinement, rendering, relighting, and evaluation.
//
// Exit codes: 0 success, 1 unexpected error, 2 manifest/input error,
// 3 optimization divergence.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "texrec/meshref.h"
#include "texrec/metrics.h"
#include "texrec/pipeline.h"
#include "texrec/png_io.h"
#include "texrec/scene.h"
#include "texrec/synth.h"

namespace fs = std::filesystem;
using namespace texrec;

namespace {

PipelineConfig load_config(const std::string& config_file, uint64_t seed) {
  PipelineConfig cfg;
  if (!config_file.empty()) cfg = PipelineConfig::load_json(config_file);
  cfg.seed = seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Albedo texture fusion and mesh refinement from calibrated video"};
  app.require_subcommand(1);

  uint64_t seed = 0;
  app.add_option("--seed", seed, "Random seed")->capture_default_str();

  // --- synth ---------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Generate a synthetic scene with ground truth");
  SynthSpec spec;
  std::string synth_out;
  synth->add_option("--out", synth_out, "Output scene directory")->required();
  synth->add_option("--shape", spec.shape, "sphere | icosphere")->capture_default_str();
  synth->add_option("--detail", spec.shape_detail, "Sphere rows / icosphere subdivisions")
      ->capture_default_str();
  synth->add_option("--frames", spec.frames, "Frame count")->capture_default_str();
  synth->add_option("--width", spec.width, "Image width")->capture_default_str();
  synth->add_option("--height", spec.height, "Image height")->capture_default_str();
  synth->add_option("--uv-res", spec.uv_resolution, "Texture resolution")->capture_default_str();
  synth->add_option("--checker-cells", spec.checker_cells, "Checkerboard cells")
      ->capture_default_str();
  synth->add_option("--texture", spec.texture_file, "Texture PNG instead of checkerboard");
  synth->add_option("--rotation-deg", spec.rotation_per_frame_deg, "Rotation per frame")
      ->capture_default_str();
  synth->add_option("--bump-height", spec.bump_height, "Ground-truth bump height (m)")
      ->capture_default_str();
  synth->add_option("--bump-sigma", spec.bump_sigma_uv, "Bump width in UV units")
      ->capture_default_str();
  synth->add_option("--coarse-noise", spec.coarse_noise, "Coarse vertex noise (m)")
      ->capture_default_str();

  // --- texgen / pipeline ----------------------------------------------------
  std::string scene_dir, out_dir, config_file;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--scene", scene_dir, "Scene directory")->required();
    cmd->add_option("--out", out_dir, "Output directory")->required();
    cmd->add_option("--config", config_file, "JSON config file");
  };
  auto* texgen_cmd = app.add_subcommand("texgen", "Recover the shared albedo texture");
  add_common(texgen_cmd);
  auto* meshref_cmd = app.add_subcommand("meshref", "Optimize per-frame displacement maps");
  add_common(meshref_cmd);
  std::string meshref_texture;
  meshref_cmd->add_option("--texture", meshref_texture, "Texture PNG (defaults to <out>/texture.png)");
  auto* pipeline_cmd = app.add_subcommand("pipeline", "Run every stage end to end");
  add_common(pipeline_cmd);

  // --- render / relight ------------------------------------------------------
  std::string mesh_file, texture_file, light_file, camera_file, out_png;
  auto add_render_opts = [&](CLI::App* cmd) {
    cmd->add_option("--mesh", mesh_file, "Mesh OBJ")->required();
    cmd->add_option("--texture", texture_file, "Texture PNG")->required();
    cmd->add_option("--light", light_file, "SH light JSON")->required();
    cmd->add_option("--camera", camera_file, "Camera JSON")->required();
    cmd->add_option("--out", out_png, "Output PNG")->required();
  };
  auto* render_cmd = app.add_subcommand("render", "Render a textured mesh from a camera");
  add_render_opts(render_cmd);
  auto* relight_cmd = app.add_subcommand("relight", "Render under a substituted environment");
  add_render_opts(relight_cmd);

  // --- eval -------------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "Score reconstructed meshes against ground truth");
  std::string eval_meshes_dir, eval_report;
  eval_cmd->add_option("--scene", scene_dir, "Scene directory (with gt/)")->required();
  eval_cmd->add_option("--meshes", eval_meshes_dir, "Directory of %06d.obj predictions")
      ->required();
  eval_cmd->add_option("--out", eval_report, "Report JSON path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      spec.seed = seed;
      synth_scene(spec, synth_out);
      std::cout << "scene written to " << synth_out << "\n";
      return 0;
    }
    if (texgen_cmd->parsed()) {
      PipelineConfig cfg = load_config(config_file, seed);
      cfg.run_meshref = false;
      run_pipeline(scene_dir, out_dir, cfg);
      std::cout << "texture written to " << (fs::path(out_dir) / "texture.png").string() << "\n";
      return 0;
    }
    if (meshref_cmd->parsed() || pipeline_cmd->parsed()) {
      PipelineConfig cfg = load_config(config_file, seed);
      if (meshref_cmd->parsed() && !meshref_texture.empty()) {
        // Reuse an existing texture by placing it where the pipeline resumes.
        fs::create_directories(out_dir);
        fs::copy_file(meshref_texture, fs::path(out_dir) / "texture.png",
                      fs::copy_options::overwrite_existing);
      }
      const PipelineResult result = run_pipeline(scene_dir, out_dir, cfg);
      if (result.report) {
        std::cout << "mean IoU " << result.report->mean_iou << ", normal RMSE "
                  << result.report->mean_rmse << ", MS-SSIM " << result.report->mean_ms_ssim
                  << "\n";
      }
      std::cout << "outputs written to " << out_dir << "\n";
      return 0;
    }
    if (render_cmd->parsed() || relight_cmd->parsed()) {
      const Mesh mesh = read_obj(mesh_file);
      const Image texture = read_png(texture_file);
      const SHLight light = SHLight::load_json(light_file);
      const Camera camera = Camera::load_json(camera_file);
      const Image rgba = render_novel(mesh, texture, light, camera);
      write_png(out_png, rgba, 8);
      std::cout << "image written to " << out_png << "\n";
      return 0;
    }
    if (eval_cmd->parsed()) {
      const Scene scene = Scene::load(scene_dir);
      std::vector<Mesh> predicted, truth;
      for (int i = 0; i < scene.manifest.frame_count; ++i) {
        truth.push_back(
            read_obj((fs::path(scene_dir) / "gt" / "fine" / frame_name(i, "obj")).string()));
        predicted.push_back(
            read_obj((fs::path(eval_meshes_dir) / frame_name(i, "obj")).string()));
      }
      const EvalReport report = eval_meshes(predicted, truth, {scene.camera});
      report.save_json(eval_report);
      std::cout << "mean IoU " << report.mean_iou << ", normal RMSE " << report.mean_rmse
                << ", MS-SSIM " << report.mean_ms_ssim << "\n";
      return 0;
    }
  } catch (const ManifestError& e) {
    std::cerr << "manifest error: " << e.what() << "\n";
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
