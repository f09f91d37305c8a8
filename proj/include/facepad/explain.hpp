#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "facepad/member_model.hpp"

namespace facepad {

// The model has one logit z; the bonafide score is z and the attack score −z.
enum class GradCamTarget { bonafide_score, attack_score };

std::string_view to_string(GradCamTarget t);
std::optional<GradCamTarget> parse_gradcam_target(std::string_view s);

struct GradCamConfig {
  GradCamTarget target = GradCamTarget::bonafide_score;
  std::optional<int> layer;  // conv block index; defaults to the last block
};

struct SaliencyMap {
  int height = 0;
  int width = 0;
  std::vector<double> values;  // row-major, in [0, 1]
  double raw_max = 0.0;        // peak of the rectified map before upsampling
  std::string member_id;
  GradCamTarget target = GradCamTarget::bonafide_score;

  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * width + c]; }
};

// Activations of one conv block and the analytic gradient of the target
// score with respect to them, both in planar CHW layout.
struct ActivationGradient {
  int block = 0;
  TensorShape shape;
  double score = 0.0;
  std::vector<double> activations;
  std::vector<double> gradient;
};

ActivationGradient activation_gradient(const ModelParameters& params, const Image& pixels, GradCamTarget target,
                                       std::optional<int> layer = std::nullopt);

// Central differences (f(a+h) − f(a−h)) / 2h over every activation entry of
// the chosen block. Validation oracle only; refuses blocks above 10^4 entries.
std::vector<double> finite_difference_gradient(const ModelParameters& params, const Image& pixels,
                                               GradCamTarget target, double step,
                                               std::optional<int> layer = std::nullopt);

inline constexpr std::size_t kMaxFiniteDifferenceEntries = 10000;

// Channel weights are the spatial means of the gradient; the map is the
// rectified weighted sum of activations, bilinearly upsampled to the input
// resolution and max-normalized (all-zero maps stay zero).
SaliencyMap grad_cam(const MemberModel& model, const Image& pixels, const GradCamConfig& config = {});
SaliencyMap grad_cam(const MemberModel& model, const RegionView& view, const GradCamConfig& config = {});

// Blue (m = 0) to red (m = 1).
std::array<float, 3> heat_color(double m);

// (1 − αm)·frame + αm·colour(m) per pixel. The map must match the frame size.
Image overlay_heatmap(const Image& frame, const SaliencyMap& map, double alpha);

// Grayscale rendering of the normalized map.
Image saliency_image(const SaliencyMap& map);

// Resamples a map to another resolution (bilinear, corner-aligned).
SaliencyMap resize_map(const SaliencyMap& map, int height, int width);

}  // namespace facepad
