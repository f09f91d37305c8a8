#pragma once

#include <cstddef>
#include <vector>

namespace facepad {

// Row-major H×W×C image with channel-interleaved real values in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w, int c, float fill = 0.0f)
      : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

  bool empty() const noexcept { return data.empty(); }
  std::size_t index(int row, int col, int ch) const noexcept {
    return (static_cast<std::size_t>(row) * width + col) * channels + ch;
  }
  float& at(int row, int col, int ch) noexcept { return data[index(row, col, ch)]; }
  float at(int row, int col, int ch) const noexcept { return data[index(row, col, ch)]; }
  bool same_shape(const Image& other) const noexcept {
    return height == other.height && width == other.width && channels == other.channels;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

// Bilinear resampling with corner-aligned sampling: output pixel i maps to
// source coordinate i·(in−1)/(out−1), so the four corners are reproduced
// exactly and equal sizes are a bit-exact copy. A 1-pixel output axis samples
// the source centre.
Image resize_bilinear(const Image& src, int out_height, int out_width);

// Same convention on a single-channel real grid.
std::vector<double> resize_bilinear(const std::vector<double>& src, int height, int width,
                                    int out_height, int out_width);

// Separable Gaussian blur, radius ceil(3σ), edges clamped. σ ≤ 0 copies.
Image gaussian_blur(const Image& src, double sigma);

Image flip_horizontal(const Image& src);

// Copies the window [row0,row0+h) × [col0,col0+w). Caller guarantees bounds.
Image crop(const Image& src, int row0, int col0, int h, int w);

// Rec.601 luma for RGB, identity for one channel.
std::vector<double> luminance(const Image& src);

}  // namespace facepad
