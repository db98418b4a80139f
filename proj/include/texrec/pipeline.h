#pragma once

#include <filesystem>
#include <optional>

#include "texrec/meshref.h"
#include "texrec/metrics.h"
#include "texrec/scene.h"
#include "texrec/texgen.h"

namespace texrec {

struct PipelineConfig {
  uint64_t seed = 0;
  int uv_resolution = 512;
  double uv_tolerance_texels = 1.5;  // visibility tolerance, in texel widths
  TexGenConfig texgen;
  MeshRefConfig meshref;
  bool run_meshref = true;
  bool evaluate = true;  // score against gt/ when present

  static PipelineConfig load_json(const std::string& path);
};

struct PipelineResult {
  Image texture;
  KeyframeSelection selection;
  std::vector<Image> displacement_maps;
  std::optional<EvalReport> report;
};

/// Full reconstruction: visibility maps -> keyframe selection -> albedo
/// estimation -> partial-texture fusion -> texture optimization ->
/// displacement optimization -> evaluation. Every stage persists its
/// outputs under `out_dir` and is skipped when they already exist, so a
/// partial run resumes where it stopped.
PipelineResult run_pipeline(const std::filesystem::path& scene_dir,
                            const std::filesystem::path& out_dir,
                            const PipelineConfig& config);

}  // namespace texrec
