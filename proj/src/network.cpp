#include "facepad/network.hpp"

#include <algorithm>
#include <cmath>

#include "facepad/error.hpp"

namespace facepad {

std::vector<double> to_planar(const Image& image) {
  std::vector<double> out(image.data.size());
  const std::size_t plane = static_cast<std::size_t>(image.height) * image.width;
  for (int r = 0; r < image.height; ++r)
    for (int c = 0; c < image.width; ++c)
      for (int ch = 0; ch < image.channels; ++ch)
        out[ch * plane + static_cast<std::size_t>(r) * image.width + c] = 2.0 * image.at(r, c, ch) - 1.0;
  return out;
}

namespace {

void conv_forward(const double* in, const TensorShape& is, const double* w, const double* bias, int k, int s,
                  double* out, const TensorShape& os) {
  const std::size_t in_plane = static_cast<std::size_t>(is.height) * is.width;
  const std::size_t out_plane = static_cast<std::size_t>(os.height) * os.width;
  for (int o = 0; o < os.channels; ++o) {
    double* op = out + o * out_plane;
    std::fill(op, op + out_plane, bias[o]);
    for (int i = 0; i < is.channels; ++i) {
      const double* ip = in + i * in_plane;
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          const double wv = w[((static_cast<std::size_t>(o) * is.channels + i) * k + ky) * k + kx];
          for (int y = 0; y < os.height; ++y) {
            const double* row = ip + static_cast<std::size_t>(y * s + ky) * is.width + kx;
            double* orow = op + static_cast<std::size_t>(y) * os.width;
            if (s == 1) {
              for (int x = 0; x < os.width; ++x) orow[x] += wv * row[x];
            } else {
              for (int x = 0; x < os.width; ++x) orow[x] += wv * row[x * s];
            }
          }
        }
    }
    for (std::size_t p = 0; p < out_plane; ++p) op[p] = op[p] > 0.0 ? op[p] : 0.0;
  }
}

// dz: gradient w.r.t. the pre-activation output. Accumulates weight/bias
// gradients (when gw != nullptr) and input gradients (when din != nullptr).
void conv_backward(const double* in, const TensorShape& is, const double* w, int k, int s, const double* dz,
                   const TensorShape& os, double* gw, double* gb, double* din) {
  const std::size_t in_plane = static_cast<std::size_t>(is.height) * is.width;
  const std::size_t out_plane = static_cast<std::size_t>(os.height) * os.width;
  for (int o = 0; o < os.channels; ++o) {
    const double* dp = dz + o * out_plane;
    if (gb != nullptr) {
      double acc = 0.0;
      for (std::size_t p = 0; p < out_plane; ++p) acc += dp[p];
      gb[o] += acc;
    }
    for (int i = 0; i < is.channels; ++i) {
      const double* ip = in + i * in_plane;
      double* dip = din != nullptr ? din + i * in_plane : nullptr;
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          const std::size_t widx = ((static_cast<std::size_t>(o) * is.channels + i) * k + ky) * k + kx;
          const double wv = w[widx];
          double acc = 0.0;
          for (int y = 0; y < os.height; ++y) {
            const std::size_t base = static_cast<std::size_t>(y * s + ky) * is.width + kx;
            const double* row = ip + base;
            const double* drow = dp + static_cast<std::size_t>(y) * os.width;
            if (gw != nullptr)
              for (int x = 0; x < os.width; ++x) acc += drow[x] * row[x * s];
            if (dip != nullptr) {
              double* dirow = dip + base;
              for (int x = 0; x < os.width; ++x) dirow[x * s] += wv * drow[x];
            }
          }
          if (gw != nullptr) gw[widx] += acc;
        }
    }
  }
}

}  // namespace

Network::Network(BackboneConfig config) : config_(std::move(config)) {
  if (config_.input_height < 1 || config_.input_width < 1 || config_.input_channels < 1)
    fail(ErrorKind::InvalidConfig, "input resolution must be positive");
  if (config_.conv_blocks.empty()) fail(ErrorKind::InvalidConfig, "backbone needs at least one conv block");
  if (config_.dense_units < 1) fail(ErrorKind::InvalidConfig, "dense_units must be positive");
  if (!(config_.dropout_rate >= 0.0 && config_.dropout_rate < 1.0))
    fail(ErrorKind::InvalidConfig, "dropout_rate must lie in [0, 1)");

  TensorShape shape{config_.input_channels, config_.input_height, config_.input_width};
  std::size_t offset = 0;
  for (std::size_t b = 0; b < config_.conv_blocks.size(); ++b) {
    const auto& blk = config_.conv_blocks[b];
    if (blk.out_channels < 1 || blk.kernel_size < 1 || blk.stride < 1)
      fail(ErrorKind::InvalidConfig, "conv block " + std::to_string(b) + " has a non-positive field");
    const int oh = shape.height >= blk.kernel_size ? (shape.height - blk.kernel_size) / blk.stride + 1 : 0;
    const int ow = shape.width >= blk.kernel_size ? (shape.width - blk.kernel_size) / blk.stride + 1 : 0;
    if (oh < 1 || ow < 1)
      fail(ErrorKind::SpatialCollapse, "conv block " + std::to_string(b) + " reduces " + std::to_string(shape.height) +
                                           "x" + std::to_string(shape.width) + " below 1x1");
    const TensorShape out{blk.out_channels, oh, ow};
    ConvLayer layer{offset, 0, blk.kernel_size, blk.stride, shape, out};
    offset += static_cast<std::size_t>(blk.out_channels) * shape.channels * blk.kernel_size * blk.kernel_size;
    layer.bias_offset = offset;
    offset += static_cast<std::size_t>(blk.out_channels);
    conv_.push_back(layer);
    shape = out;
  }
  dense_w_ = offset;
  offset += static_cast<std::size_t>(config_.dense_units) * shape.channels;
  dense_b_ = offset;
  offset += static_cast<std::size_t>(config_.dense_units);
  head_w_ = offset;
  offset += static_cast<std::size_t>(config_.dense_units);
  head_b_ = offset;
  count_ = offset + 1;
}

std::vector<double> Network::initialize(std::uint64_t seed) const {
  std::vector<double> w(count_, 0.0);
  Rng rng(seed);
  auto fill = [&](std::size_t begin, std::size_t n, double fan_in) {
    const double limit = std::sqrt(6.0 / fan_in);
    for (std::size_t i = 0; i < n; ++i) w[begin + i] = rng.uniform(-limit, limit);
  };
  for (const auto& l : conv_)
    fill(l.weight_offset, l.bias_offset - l.weight_offset, static_cast<double>(l.in.channels) * l.kernel * l.kernel);
  fill(dense_w_, dense_b_ - dense_w_, feature_count());
  fill(head_w_, head_b_ - head_w_, config_.dense_units);
  return w;
}

void Network::run_head(std::span<const double> w, Trace& t, Rng* dropout) const {
  const auto& last = t.activations.back();
  const int features = feature_count();
  const std::size_t plane = static_cast<std::size_t>(conv_.back().out.height) * conv_.back().out.width;
  t.pooled.assign(static_cast<std::size_t>(features), 0.0);
  for (int k = 0; k < features; ++k) {
    double acc = 0.0;
    for (std::size_t p = 0; p < plane; ++p) acc += last[k * plane + p];
    t.pooled[k] = acc / static_cast<double>(plane);
  }
  const int units = config_.dense_units;
  t.hidden.assign(static_cast<std::size_t>(units), 0.0);
  t.mask.assign(static_cast<std::size_t>(units), 1.0);
  double logit = w[head_b_];
  for (int u = 0; u < units; ++u) {
    double z = w[dense_b_ + u];
    const double* row = w.data() + dense_w_ + static_cast<std::size_t>(u) * features;
    for (int k = 0; k < features; ++k) z += row[k] * t.pooled[k];
    t.hidden[u] = z > 0.0 ? z : 0.0;
    if (dropout != nullptr && config_.dropout_rate > 0.0)
      t.mask[u] = dropout->uniform() < config_.dropout_rate ? 0.0 : 1.0 / (1.0 - config_.dropout_rate);
    logit += w[head_w_ + u] * t.hidden[u] * t.mask[u];
  }
  t.logit = logit;
}

double Network::forward(std::span<const double> w, std::span<const double> input, Trace& t, Rng* dropout) const {
  if (input.size() != input_shape().size())
    fail(ErrorKind::ShapeMismatch, "input has " + std::to_string(input.size()) + " values, network expects " +
                                       std::to_string(input_shape().size()));
  t.activations.resize(conv_.size() + 1);
  t.activations[0].assign(input.begin(), input.end());
  for (std::size_t b = 0; b < conv_.size(); ++b) {
    const auto& l = conv_[b];
    t.activations[b + 1].assign(l.out.size(), 0.0);
    conv_forward(t.activations[b].data(), l.in, w.data() + l.weight_offset, w.data() + l.bias_offset, l.kernel,
                 l.stride, t.activations[b + 1].data(), l.out);
  }
  run_head(w, t, dropout);
  return t.logit;
}

double Network::forward_from(std::span<const double> w, int block, std::span<const double> activation,
                             Trace& t) const {
  const auto start = static_cast<std::size_t>(block);
  if (start >= conv_.size() || activation.size() != conv_[start].out.size())
    fail(ErrorKind::ShapeMismatch, "activation does not match conv block " + std::to_string(block));
  t.activations.resize(conv_.size() + 1);
  t.activations[start + 1].assign(activation.begin(), activation.end());
  for (std::size_t b = start + 1; b < conv_.size(); ++b) {
    const auto& l = conv_[b];
    t.activations[b + 1].assign(l.out.size(), 0.0);
    conv_forward(t.activations[b].data(), l.in, w.data() + l.weight_offset, w.data() + l.bias_offset, l.kernel,
                 l.stride, t.activations[b + 1].data(), l.out);
  }
  run_head(w, t, nullptr);
  return t.logit;
}

void Network::backward(std::span<const double> w, const Trace& t, double dlogit, std::span<double> grad,
                       int activation_block, std::vector<double>* activation_grad) const {
  const bool want_params = !grad.empty();
  const int features = feature_count();
  const int units = config_.dense_units;

  std::vector<double> dpooled(static_cast<std::size_t>(features), 0.0);
  if (want_params) grad[head_b_] += dlogit;
  for (int u = 0; u < units; ++u) {
    if (want_params) grad[head_w_ + u] += dlogit * t.hidden[u] * t.mask[u];
    if (t.hidden[u] <= 0.0) continue;
    const double dz = dlogit * w[head_w_ + u] * t.mask[u];
    if (dz == 0.0) continue;
    if (want_params) grad[dense_b_ + u] += dz;
    const std::size_t row = dense_w_ + static_cast<std::size_t>(u) * features;
    for (int k = 0; k < features; ++k) {
      if (want_params) grad[row + k] += dz * t.pooled[k];
      dpooled[k] += dz * w[row + k];
    }
  }

  const auto& last = conv_.back().out;
  const std::size_t plane = static_cast<std::size_t>(last.height) * last.width;
  std::vector<double> dact(last.size());
  for (int k = 0; k < features; ++k)
    std::fill(dact.begin() + static_cast<std::ptrdiff_t>(k * plane),
              dact.begin() + static_cast<std::ptrdiff_t>((k + 1) * plane), dpooled[k] / static_cast<double>(plane));

  const int lowest = want_params ? 0 : std::max(activation_block, 0);
  for (int b = static_cast<int>(conv_.size()) - 1; b >= lowest; --b) {
    if (b == activation_block && activation_grad != nullptr) *activation_grad = dact;
    if (!want_params && b == activation_block) return;
    const auto& l = conv_[static_cast<std::size_t>(b)];
    const auto& out = t.activations[static_cast<std::size_t>(b) + 1];
    for (std::size_t i = 0; i < dact.size(); ++i)
      if (out[i] <= 0.0) dact[i] = 0.0;
    std::vector<double> din;
    if (b > 0 && (want_params || b - 1 >= activation_block)) din.assign(l.in.size(), 0.0);
    conv_backward(t.activations[static_cast<std::size_t>(b)].data(), l.in, w.data() + l.weight_offset, l.kernel,
                  l.stride, dact.data(), l.out, want_params ? grad.data() + l.weight_offset : nullptr,
                  want_params ? grad.data() + l.bias_offset : nullptr, din.empty() ? nullptr : din.data());
    dact = std::move(din);
  }
}

}  // namespace facepad
