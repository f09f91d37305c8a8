#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "facepad/data_pipeline.hpp"
#include "facepad/desk_dataset.hpp"
#include "facepad/ensemble.hpp"
#include "facepad/member_model.hpp"

namespace facepad {

// Everything one train/evaluate run needs, read from a flat `key = value`
// file. Lines starting with '#' are comments. Unknown keys are errors and
// `seed` has no default. Relative paths resolve against the file's directory.
struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path output_dir = "out";
  std::optional<std::filesystem::path> protocol;
  std::uint64_t seed = 0;
  std::string locator = "center";
  int workers = 0;  // 0 = one per hardware thread

  EnsembleConfig ensemble = default_ensemble_config();
  TrainingConfig training;
  AugmentationConfig augmentation;

  std::optional<double> threshold;  // empty = calibrate on the val split
  CalibrationTarget calibration;

  DeskDatasetOptions dataset;

  std::filesystem::path bundle_dir() const { return output_dir / "bundle"; }
  std::filesystem::path report_dir() const { return output_dir / "report"; }
};

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

// Canonical key/value rendering; parse_run_config(render_run_config(c)) == c.
std::string render_run_config(const RunConfig& config);

// Applies a seed override to every seeded component.
void set_seed(RunConfig& config, std::uint64_t seed);

}  // namespace facepad
