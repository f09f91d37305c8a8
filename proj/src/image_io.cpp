#include "facepad/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "facepad/error.hpp"

namespace facepad {
namespace {

unsigned char to_byte(float v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec))
    fail(ErrorKind::MissingFile, "image not found: " + path.string());
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) fail(ErrorKind::ImageDecode, "cannot decode image: " + path.string());
  Image out(bgr.rows, bgr.cols, 3);
  for (int r = 0; r < bgr.rows; ++r) {
    const auto* row = bgr.ptr<cv::Vec3b>(r);
    for (int c = 0; c < bgr.cols; ++c) {
      out.at(r, c, 0) = row[c][2] / 255.0f;
      out.at(r, c, 1) = row[c][1] / 255.0f;
      out.at(r, c, 2) = row[c][0] / 255.0f;
    }
  }
  return out;
}

void save_png(const std::filesystem::path& path, const Image& image) {
  if (image.empty()) fail(ErrorKind::EmptyImage, "refusing to write empty image " + path.string());
  cv::Mat mat;
  if (image.channels == 1) {
    mat.create(image.height, image.width, CV_8UC1);
    for (int r = 0; r < image.height; ++r)
      for (int c = 0; c < image.width; ++c) mat.at<unsigned char>(r, c) = to_byte(image.at(r, c, 0));
  } else if (image.channels == 3) {
    mat.create(image.height, image.width, CV_8UC3);
    for (int r = 0; r < image.height; ++r) {
      auto* row = mat.ptr<cv::Vec3b>(r);
      for (int c = 0; c < image.width; ++c)
        row[c] = cv::Vec3b(to_byte(image.at(r, c, 2)), to_byte(image.at(r, c, 1)), to_byte(image.at(r, c, 0)));
    }
  } else {
    fail(ErrorKind::ShapeMismatch, "PNG output needs 1 or 3 channels");
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), mat)) fail(ErrorKind::IoError, "cannot write " + path.string());
}

Image quantize_8bit(const Image& image) {
  Image out = image;
  for (float& v : out.data) v = to_byte(v) / 255.0f;
  return out;
}

}  // namespace facepad
