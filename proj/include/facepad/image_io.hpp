#pragma once

#include <filesystem>

#include "facepad/image.hpp"

namespace facepad {

// Reads PNG/JPEG as 8-bit RGB and normalizes to [0, 1].
// Throws MissingFile or ImageDecode.
Image load_image(const std::filesystem::path& path);

// Writes an 8-bit PNG (RGB or grayscale); values are clamped and rounded.
void save_png(const std::filesystem::path& path, const Image& image);

// Quantizes to the 8-bit grid the PNG writer uses, so an in-memory image
// matches what a reload would produce.
Image quantize_8bit(const Image& image);

}  // namespace facepad
