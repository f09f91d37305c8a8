#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "facepad/data_pipeline.hpp"

namespace facepad {

// Procedural stand-in for a capture campaign: a cartoon head-and-shoulders
// "selfie" whose colours and proportions are fixed per subject and whose
// backdrop, lighting, clutter and accessories vary per session.
struct SubjectStyle {
  std::array<float, 3> skin{};
  std::array<float, 3> hair{};
  std::array<float, 3> clothing{};
  double face_scale = 1.0;
  std::uint64_t seed = 0;
};

struct SceneStyle {
  std::array<float, 3> backdrop_top{};
  std::array<float, 3> backdrop_bottom{};
  double brightness = 1.0;
  std::array<double, 3> tint{1.0, 1.0, 1.0};
  bool spectacles = false;
  int clutter = 4;
  std::uint64_t seed = 0;
};

SubjectStyle make_subject_style(const std::string& subject_id, std::uint64_t seed);
// `session` names one capture setting, e.g. a scenario id plus the subject;
// the keywords outdoor/natural/artificial/spectacles/shades steer lighting
// and accessories.
SceneStyle make_scene_style(const std::string& session, std::uint64_t seed);

Image render_bonafide(const SubjectStyle& subject, const SceneStyle& scene, int size, std::uint64_t frame_seed);

// Adds i.i.d. Gaussian noise and clamps to [0, 1].
void add_sensor_noise(Image& image, double sigma, Rng& rng);

// Randomized attack parameters in the ranges the desk dataset uses.
SyntheticAttackConfig sample_attack_config(AttackType kind, Rng& rng);

struct DeskDatasetOptions {
  std::filesystem::path out_dir;
  int subjects = 30;
  int bonafide_per_subject = 6;
  int attacks_per_subject = 6;
  int image_size = 96;
  std::uint64_t seed = 0;
  SplitFractions fractions{0.6, 0.2, 0.2};
};

// Renders images under out_dir/images and writes out_dir/manifest.jsonl.
// Attack types rotate per subject so all four are equally represented.
DatasetManifest generate_desk_dataset(const DeskDatasetOptions& options);

// One scenario row of an evaluation protocol to render.
struct ScenarioRequest {
  std::string scenario_id;
  Label label = Label::bonafide;
  std::optional<AttackType> attack_type;
  int case_count = 1;
};

// Renders case_count images per (subject, scenario) into out_dir and writes
// out_dir/manifest.jsonl with every sample in `split`.
DatasetManifest generate_scenario_dataset(const std::filesystem::path& out_dir,
                                          std::span<const std::string> subjects,
                                          std::span<const ScenarioRequest> scenarios, int image_size,
                                          std::uint64_t seed, Split split = Split::test);

}  // namespace facepad
