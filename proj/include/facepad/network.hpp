#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "facepad/image.hpp"
#include "facepad/random.hpp"

namespace facepad {

struct ConvBlockConfig {
  int out_channels = 16;
  int kernel_size = 3;
  int stride = 2;

  friend bool operator==(const ConvBlockConfig&, const ConvBlockConfig&) = default;
};

// Light CNN: conv blocks (valid padding, ReLU) → global average pool →
// dense (ReLU, dropout) → single logit.
struct BackboneConfig {
  int input_height = 128;
  int input_width = 128;
  int input_channels = 3;
  std::vector<ConvBlockConfig> conv_blocks = {{16, 3, 2}, {32, 3, 2}, {64, 3, 2}};
  int dense_units = 64;
  double dropout_rate = 0.5;

  friend bool operator==(const BackboneConfig&, const BackboneConfig&) = default;
};

struct TensorShape {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::size_t size() const { return static_cast<std::size_t>(channels) * height * width; }
};

// Image (HWC) to the planar CHW layout the network consumes.
std::vector<double> to_planar(const Image& image);

// Architecture and parameter layout of one backbone, plus the numerical
// kernels. Parameters live in a flat buffer in declaration order: for each
// conv block its weights [out][in][k][k] then bias [out]; dense weights
// [units][features], dense bias; head weights [units], head bias.
class Network {
 public:
  struct ConvLayer {
    std::size_t weight_offset;
    std::size_t bias_offset;
    int kernel;
    int stride;
    TensorShape in;
    TensorShape out;
  };

  // Per-sample forward cache. activations[0] is the input, activations[b+1]
  // the post-ReLU output of conv block b.
  struct Trace {
    std::vector<std::vector<double>> activations;
    std::vector<double> pooled;
    std::vector<double> hidden;  // post-ReLU dense output, before dropout
    std::vector<double> mask;    // inverted-dropout scale per unit (1 in inference)
    double logit = 0.0;
  };

  // Throws InvalidConfig or SpatialCollapse.
  explicit Network(BackboneConfig config);

  const BackboneConfig& config() const { return config_; }
  const std::vector<ConvLayer>& conv_layers() const { return conv_; }
  std::size_t parameter_count() const { return count_; }
  std::size_t dense_weight_offset() const { return dense_w_; }
  std::size_t dense_bias_offset() const { return dense_b_; }
  std::size_t head_weight_offset() const { return head_w_; }
  std::size_t head_bias_offset() const { return head_b_; }
  int feature_count() const { return conv_.back().out.channels; }
  TensorShape input_shape() const { return conv_.front().in; }
  TensorShape block_output_shape(int block) const { return conv_.at(static_cast<std::size_t>(block)).out; }

  // He-uniform weights (limit √(6/fan_in)), zero biases.
  std::vector<double> initialize(std::uint64_t seed) const;

  // `dropout` == nullptr selects inference mode.
  double forward(std::span<const double> weights, std::span<const double> input, Trace& trace,
                 Rng* dropout = nullptr) const;

  // Inference from the given activations of conv block `block` onward.
  double forward_from(std::span<const double> weights, int block, std::span<const double> activation,
                      Trace& trace) const;

  // Backpropagates d(objective)/d(logit). Parameter gradients are accumulated
  // into `grad` when it is non-empty. When `activation_grad` is given, it
  // receives d(objective)/d(activations of conv block `activation_block`).
  void backward(std::span<const double> weights, const Trace& trace, double dlogit, std::span<double> grad,
                int activation_block = -1, std::vector<double>* activation_grad = nullptr) const;

 private:
  void run_head(std::span<const double> weights, Trace& trace, Rng* dropout) const;

  BackboneConfig config_;
  std::vector<ConvLayer> conv_;
  std::size_t dense_w_ = 0, dense_b_ = 0, head_w_ = 0, head_b_ = 0, count_ = 0;
};

}  // namespace facepad
