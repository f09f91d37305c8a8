#include "facepad/image.hpp"

#include <algorithm>
#include <cmath>

namespace facepad {
namespace {

struct Tap {
  int lo;
  int hi;
  double frac;
};

std::vector<Tap> sample_axis(int in, int out) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  for (int i = 0; i < out; ++i) {
    const double pos = out > 1 ? static_cast<double>(i) * (in - 1) / (out - 1) : (in - 1) / 2.0;
    const int lo = std::clamp(static_cast<int>(std::floor(pos)), 0, in - 1);
    const int hi = std::min(lo + 1, in - 1);
    taps[i] = {lo, hi, pos - lo};
  }
  return taps;
}

}  // namespace

Image resize_bilinear(const Image& src, int out_height, int out_width) {
  Image out(out_height, out_width, src.channels);
  if (src.empty() || out.empty()) return out;
  const auto ys = sample_axis(src.height, out_height);
  const auto xs = sample_axis(src.width, out_width);
  for (int r = 0; r < out_height; ++r) {
    const Tap& ty = ys[r];
    for (int c = 0; c < out_width; ++c) {
      const Tap& tx = xs[c];
      for (int ch = 0; ch < src.channels; ++ch) {
        const double a = src.at(ty.lo, tx.lo, ch);
        const double b = src.at(ty.lo, tx.hi, ch);
        const double d = src.at(ty.hi, tx.lo, ch);
        const double e = src.at(ty.hi, tx.hi, ch);
        const double top = (1.0 - tx.frac) * a + tx.frac * b;
        const double bottom = (1.0 - tx.frac) * d + tx.frac * e;
        out.at(r, c, ch) = static_cast<float>((1.0 - ty.frac) * top + ty.frac * bottom);
      }
    }
  }
  return out;
}

std::vector<double> resize_bilinear(const std::vector<double>& src, int height, int width,
                                    int out_height, int out_width) {
  std::vector<double> out(static_cast<std::size_t>(out_height) * out_width, 0.0);
  if (src.empty() || out.empty()) return out;
  const auto ys = sample_axis(height, out_height);
  const auto xs = sample_axis(width, out_width);
  for (int r = 0; r < out_height; ++r) {
    const Tap& ty = ys[r];
    for (int c = 0; c < out_width; ++c) {
      const Tap& tx = xs[c];
      const double a = src[ty.lo * width + tx.lo];
      const double b = src[ty.lo * width + tx.hi];
      const double d = src[ty.hi * width + tx.lo];
      const double e = src[ty.hi * width + tx.hi];
      const double top = (1.0 - tx.frac) * a + tx.frac * b;
      const double bottom = (1.0 - tx.frac) * d + tx.frac * e;
      out[r * out_width + c] = (1.0 - ty.frac) * top + ty.frac * bottom;
    }
  }
  return out;
}

Image gaussian_blur(const Image& src, double sigma) {
  if (sigma <= 0.0 || src.empty()) return src;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[k + radius] = std::exp(-(k * k) / (2.0 * sigma * sigma));
    total += kernel[k + radius];
  }
  for (double& k : kernel) k /= total;

  const int h = src.height, w = src.width, nc = src.channels;
  std::vector<double> tmp(src.data.size());
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int ch = 0; ch < nc; ++ch) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k)
          acc += kernel[k + radius] * src.at(r, std::clamp(c + k, 0, w - 1), ch);
        tmp[src.index(r, c, ch)] = acc;
      }
  Image out(h, w, nc);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int ch = 0; ch < nc; ++ch) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k)
          acc += kernel[k + radius] * tmp[src.index(std::clamp(r + k, 0, h - 1), c, ch)];
        out.at(r, c, ch) = static_cast<float>(acc);
      }
  return out;
}

Image flip_horizontal(const Image& src) {
  Image out(src.height, src.width, src.channels);
  for (int r = 0; r < src.height; ++r)
    for (int c = 0; c < src.width; ++c)
      for (int ch = 0; ch < src.channels; ++ch)
        out.at(r, c, ch) = src.at(r, src.width - 1 - c, ch);
  return out;
}

Image crop(const Image& src, int row0, int col0, int h, int w) {
  Image out(h, w, src.channels);
  for (int r = 0; r < h; ++r) {
    const auto begin = src.data.begin() + static_cast<std::ptrdiff_t>(src.index(row0 + r, col0, 0));
    std::copy(begin, begin + static_cast<std::ptrdiff_t>(w) * src.channels,
              out.data.begin() + static_cast<std::ptrdiff_t>(out.index(r, 0, 0)));
  }
  return out;
}

std::vector<double> luminance(const Image& src) {
  std::vector<double> lum(static_cast<std::size_t>(src.height) * src.width);
  for (int r = 0; r < src.height; ++r)
    for (int c = 0; c < src.width; ++c) {
      double v;
      if (src.channels >= 3)
        v = 0.299 * src.at(r, c, 0) + 0.587 * src.at(r, c, 1) + 0.114 * src.at(r, c, 2);
      else
        v = src.at(r, c, 0);
      lum[static_cast<std::size_t>(r) * src.width + c] = v;
    }
  return lum;
}

}  // namespace facepad
