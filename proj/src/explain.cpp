#include "facepad/explain.hpp"

#include <algorithm>
#include <cmath>

#include "facepad/error.hpp"

namespace facepad {

std::string_view to_string(GradCamTarget t) {
  return t == GradCamTarget::bonafide_score ? "bonafide_score" : "attack_score";
}

std::optional<GradCamTarget> parse_gradcam_target(std::string_view s) {
  if (s == "bonafide_score" || s == "bonafide") return GradCamTarget::bonafide_score;
  if (s == "attack_score" || s == "attack") return GradCamTarget::attack_score;
  return std::nullopt;
}

namespace {

double sign_of(GradCamTarget t) { return t == GradCamTarget::bonafide_score ? 1.0 : -1.0; }

struct Prepared {
  Network net;
  std::vector<double> weights;
  int block;
};

Prepared prepare(const ModelParameters& params, const Image& pixels, std::optional<int> layer) {
  Network net(params.backbone);
  if (params.values.size() != net.parameter_count())
    fail(ErrorKind::ShapeMismatch, "parameter buffer does not match the backbone");
  if (pixels.height != params.backbone.input_height || pixels.width != params.backbone.input_width ||
      pixels.channels != params.backbone.input_channels)
    fail(ErrorKind::ShapeMismatch, "view does not match the member's input resolution");
  const int blocks = static_cast<int>(net.conv_layers().size());
  const int block = layer.value_or(blocks - 1);
  if (block < 0 || block >= blocks) fail(ErrorKind::InvalidConfig, "Grad-CAM layer index out of range");
  return {std::move(net), params.widened(), block};
}

}  // namespace

ActivationGradient activation_gradient(const ModelParameters& params, const Image& pixels, GradCamTarget target,
                                       std::optional<int> layer) {
  const Prepared p = prepare(params, pixels, layer);
  Network::Trace trace;
  const double logit = p.net.forward(p.weights, to_planar(pixels), trace);
  ActivationGradient g;
  g.block = p.block;
  g.shape = p.net.block_output_shape(p.block);
  g.score = sign_of(target) * logit;
  g.activations = trace.activations[static_cast<std::size_t>(p.block) + 1];
  p.net.backward(p.weights, trace, sign_of(target), {}, p.block, &g.gradient);
  return g;
}

std::vector<double> finite_difference_gradient(const ModelParameters& params, const Image& pixels,
                                               GradCamTarget target, double step, std::optional<int> layer) {
  if (!(step > 0.0)) fail(ErrorKind::InvalidConfig, "finite-difference step must be > 0");
  const Prepared p = prepare(params, pixels, layer);
  if (p.net.block_output_shape(p.block).size() > kMaxFiniteDifferenceEntries)
    fail(ErrorKind::ModelTooLarge, "block has more than 10^4 activation entries");

  Network::Trace trace;
  p.net.forward(p.weights, to_planar(pixels), trace);
  std::vector<double> act = trace.activations[static_cast<std::size_t>(p.block) + 1];
  std::vector<double> grad(act.size());
  const double s = sign_of(target);
  for (std::size_t i = 0; i < act.size(); ++i) {
    const double original = act[i];
    act[i] = original + step;
    const double up = s * p.net.forward_from(p.weights, p.block, act, trace);
    act[i] = original - step;
    const double down = s * p.net.forward_from(p.weights, p.block, act, trace);
    act[i] = original;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

SaliencyMap grad_cam(const MemberModel& model, const Image& pixels, const GradCamConfig& config) {
  const ActivationGradient g = activation_gradient(model.params, pixels, config.target, config.layer);
  const std::size_t plane = static_cast<std::size_t>(g.shape.height) * g.shape.width;

  std::vector<double> raw(plane, 0.0);
  for (int k = 0; k < g.shape.channels; ++k) {
    double alpha = 0.0;
    for (std::size_t p = 0; p < plane; ++p) alpha += g.gradient[k * plane + p];
    alpha /= static_cast<double>(plane);
    if (alpha == 0.0) continue;
    for (std::size_t p = 0; p < plane; ++p) raw[p] += alpha * g.activations[k * plane + p];
  }
  for (double& v : raw) v = std::max(v, 0.0);

  SaliencyMap map;
  map.height = pixels.height;
  map.width = pixels.width;
  map.member_id = model.config.member_id;
  map.target = config.target;
  map.raw_max = *std::max_element(raw.begin(), raw.end());
  map.values = resize_bilinear(raw, g.shape.height, g.shape.width, map.height, map.width);
  const double peak = *std::max_element(map.values.begin(), map.values.end());
  if (peak > 0.0)
    for (double& v : map.values) v /= peak;
  return map;
}

SaliencyMap grad_cam(const MemberModel& model, const RegionView& view, const GradCamConfig& config) {
  if (view.kind != model.config.region)
    fail(ErrorKind::ConfigMismatch, "view region does not match member '" + model.config.member_id + "'");
  return grad_cam(model, view.pixels, config);
}

std::array<float, 3> heat_color(double m) {
  const auto t = static_cast<float>(std::clamp(m, 0.0, 1.0));
  return {t, 0.0f, 1.0f - t};
}

Image overlay_heatmap(const Image& frame, const SaliencyMap& map, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorKind::BadAlpha, "alpha must lie in [0, 1]");
  if (frame.height != map.height || frame.width != map.width)
    fail(ErrorKind::ShapeMismatch, "saliency map must be resized to the frame first");
  Image out = frame;
  for (int r = 0; r < frame.height; ++r)
    for (int c = 0; c < frame.width; ++c) {
      const double m = map.at(r, c);
      const double w = alpha * m;
      if (w == 0.0) continue;
      const auto color = heat_color(m);
      for (int ch = 0; ch < frame.channels; ++ch)
        out.at(r, c, ch) = static_cast<float>((1.0 - w) * frame.at(r, c, ch) + w * color[std::min(ch, 2)]);
    }
  return out;
}

Image saliency_image(const SaliencyMap& map) {
  Image out(map.height, map.width, 1);
  for (std::size_t i = 0; i < map.values.size(); ++i) out.data[i] = static_cast<float>(map.values[i]);
  return out;
}

SaliencyMap resize_map(const SaliencyMap& map, int height, int width) {
  SaliencyMap out = map;
  out.height = height;
  out.width = width;
  out.values = resize_bilinear(map.values, map.height, map.width, height, width);
  return out;
}

}  // namespace facepad
