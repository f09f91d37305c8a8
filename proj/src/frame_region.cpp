#include "facepad/frame_region.hpp"

#include <algorithm>
#include <cmath>

#include "facepad/error.hpp"
#include "facepad/image_io.hpp"

namespace facepad {

void VideoFrames::validate() const {
  if (frames.empty()) fail(ErrorKind::EmptyVideo, "video '" + source_id + "' has no frames");
  for (const Image& f : frames) {
    if (f.empty()) fail(ErrorKind::EmptyImage, "video '" + source_id + "' contains an empty frame");
    if (!f.same_shape(frames.front()))
      fail(ErrorKind::ShapeMismatch, "video '" + source_id + "' mixes frame dimensions");
  }
}

VideoFrames load_video(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::exists(path, ec)) fail(ErrorKind::MissingFile, "input not found: " + path.string());
  VideoFrames video;
  video.source_id = path.filename().string();
  if (fs::is_regular_file(path, ec)) {
    video.frames.push_back(load_image(path));
    return video;
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(path)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.starts_with("frame_") && entry.path().extension() == ".png")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) video.frames.push_back(load_image(f));
  video.validate();
  return video;
}

bool FaceBox::valid_for(int h, int w) const {
  return row0 >= 0 && row0 < row1 && row1 <= h && col0 >= 0 && col0 < col1 && col1 <= w &&
         confidence >= 0.0 && confidence <= 1.0;
}

std::optional<FaceBox> CenterBoxLocator::locate(const Image& frame) const {
  const int r0 = frame.height / 4, c0 = frame.width / 4;
  return FaceBox{r0, c0, r0 + std::max(1, frame.height / 2), c0 + std::max(1, frame.width / 2), 1.0};
}

FaceBox locate_face(const FaceLocator& locator, const Image& frame) {
  if (frame.empty()) fail(ErrorKind::EmptyImage, "locate_face on empty frame");
  const auto box = locator.locate(frame);
  if (!box) fail(ErrorKind::NoFaceFound, "no face in frame");
  if (!box->valid_for(frame.height, frame.width))
    fail(ErrorKind::InvalidFaceBox,
         "locator returned rows [" + std::to_string(box->row0) + "," + std::to_string(box->row1) + ") cols [" +
             std::to_string(box->col0) + "," + std::to_string(box->col1) + ")");
  return *box;
}

void QualityWeights::validate() const {
  if (!(sharpness >= 0 && exposure >= 0 && face >= 0) || std::abs(sharpness + exposure + face - 1.0) > 1e-9)
    fail(ErrorKind::BadWeights, "quality weights must be nonnegative and sum to 1");
}

double laplacian_variance(const Image& frame) {
  if (frame.height < 3 || frame.width < 3) return 0.0;
  const auto lum = luminance(frame);
  const int h = frame.height, w = frame.width;
  auto at = [&](int r, int c) { return lum[static_cast<std::size_t>(r) * w + c]; };
  std::vector<double> response;
  response.reserve(static_cast<std::size_t>(h - 2) * (w - 2));
  for (int r = 1; r < h - 1; ++r)
    for (int c = 1; c < w - 1; ++c) {
      const double centre = at(r, c);
      // Differences first so a flat neighbourhood yields exactly zero.
      response.push_back((at(r - 1, c) - centre) + (at(r + 1, c) - centre) + (at(r, c - 1) - centre) +
                         (at(r, c + 1) - centre));
    }
  double mean = 0.0;
  for (double v : response) mean += v;
  mean /= static_cast<double>(response.size());
  double var = 0.0;
  for (double v : response) var += (v - mean) * (v - mean);
  return var / static_cast<double>(response.size());
}

FrameQualityScore score_frame_quality(const Image& frame, const FaceLocator& locator,
                                      const QualityWeights& weights) {
  weights.validate();
  if (frame.empty()) fail(ErrorKind::EmptyImage, "score_frame_quality on empty frame");
  FrameQualityScore s;
  s.sharpness = laplacian_variance(frame);

  const auto lum = luminance(frame);
  double mean = 0.0;
  for (double v : lum) mean += v;
  mean /= static_cast<double>(lum.size());
  s.exposure = std::clamp(1.0 - std::abs(mean - 0.5) / 0.5, 0.0, 1.0);

  const auto box = locator.locate(frame);
  s.face_presence = box && box->valid_for(frame.height, frame.width) ? box->confidence : 0.0;

  s.total = weights.sharpness * (s.sharpness / (1.0 + s.sharpness)) + weights.exposure * s.exposure +
            weights.face * s.face_presence;
  return s;
}

FrameSelection select_best_frame(const VideoFrames& video, const FaceLocator& locator,
                                 const QualityWeights& weights) {
  video.validate();
  weights.validate();
  FrameSelection best{0, score_frame_quality(video.frames[0], locator, weights)};
  for (std::size_t i = 1; i < video.frames.size(); ++i) {
    const auto s = score_frame_quality(video.frames[i], locator, weights);
    if (s.total > best.score.total) best = {i, s};
  }
  return best;
}

std::string_view to_string(RegionKind kind) {
  switch (kind) {
    case RegionKind::full_frame: return "full_frame";
    case RegionKind::face: return "face";
    case RegionKind::background: return "background";
    case RegionKind::face_band: return "face_band";
  }
  return "unknown";
}

std::optional<RegionKind> parse_region_kind(std::string_view s) {
  for (RegionKind k : kRegionKinds)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

FaceBox dilate_box(const FaceBox& box, double band_fraction, int frame_height, int frame_width) {
  const int dr = static_cast<int>(std::lround(band_fraction * box.height()));
  const int dc = static_cast<int>(std::lround(band_fraction * box.width()));
  return FaceBox{std::max(0, box.row0 - dr), std::max(0, box.col0 - dc), std::min(frame_height, box.row1 + dr),
                 std::min(frame_width, box.col1 + dc), box.confidence};
}

namespace {

void neutralize(Image& img, int row0, int col0, int row1, int col1) {
  for (int r = row0; r < row1; ++r)
    for (int c = col0; c < col1; ++c)
      for (int ch = 0; ch < img.channels; ++ch) img.at(r, c, ch) = kNeutralFill;
}

}  // namespace

RegionView extract_region(const Image& frame, const FaceBox& box, RegionKind kind, int out_height,
                          int out_width, double band_fraction) {
  if (frame.empty()) fail(ErrorKind::EmptyImage, "extract_region on empty frame");
  if (!box.valid_for(frame.height, frame.width)) fail(ErrorKind::BoxOutOfBounds, "face box does not fit the frame");
  if (!(band_fraction > 0.0 && band_fraction <= 0.5))
    fail(ErrorKind::BadBandFraction, "band_fraction must lie in (0, 0.5]");
  if (out_height < 1 || out_width < 1) fail(ErrorKind::InvalidConfig, "output resolution must be positive");

  RegionView view{kind, {}, box};
  switch (kind) {
    case RegionKind::full_frame:
      view.pixels = resize_bilinear(frame, out_height, out_width);
      break;
    case RegionKind::face:
      view.pixels = resize_bilinear(crop(frame, box.row0, box.col0, box.height(), box.width()), out_height, out_width);
      break;
    case RegionKind::background: {
      Image masked = frame;
      neutralize(masked, box.row0, box.col0, box.row1, box.col1);
      view.pixels = resize_bilinear(masked, out_height, out_width);
      break;
    }
    case RegionKind::face_band: {
      const FaceBox outer = dilate_box(box, band_fraction, frame.height, frame.width);
      Image band = crop(frame, outer.row0, outer.col0, outer.height(), outer.width());
      neutralize(band, box.row0 - outer.row0, box.col0 - outer.col0, box.row1 - outer.row0, box.col1 - outer.col0);
      view.pixels = resize_bilinear(band, out_height, out_width);
      break;
    }
  }
  return view;
}

}  // namespace facepad
