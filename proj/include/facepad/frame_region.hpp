#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "facepad/image.hpp"

namespace facepad {

struct VideoFrames {
  std::vector<Image> frames;
  std::string source_id;

  void validate() const;  // EmptyVideo, ShapeMismatch
};

// Loads frame_*.png from a directory; lexicographic filename order is frame
// order. A path to a single image yields a one-frame video.
VideoFrames load_video(const std::filesystem::path& path);

// Half-open pixel bounds.
struct FaceBox {
  int row0 = 0;
  int col0 = 0;
  int row1 = 0;
  int col1 = 0;
  double confidence = 1.0;

  int height() const { return row1 - row0; }
  int width() const { return col1 - col0; }
  bool valid_for(int h, int w) const;

  friend bool operator==(const FaceBox&, const FaceBox&) = default;
};

class FaceLocator {
 public:
  virtual ~FaceLocator() = default;
  // std::nullopt means no face was found.
  virtual std::optional<FaceBox> locate(const Image& frame) const = 0;
};

// Deterministic default: the centred box over the middle half of each axis,
// confidence 1. Never reports a miss.
class CenterBoxLocator final : public FaceLocator {
 public:
  std::optional<FaceBox> locate(const Image& frame) const override;
};

// Adapter seam for an external detector.
class CallbackLocator final : public FaceLocator {
 public:
  using Callback = std::function<std::optional<FaceBox>(const Image&)>;
  explicit CallbackLocator(Callback cb) : cb_(std::move(cb)) {}
  std::optional<FaceBox> locate(const Image& frame) const override { return cb_(frame); }

 private:
  Callback cb_;
};

// Runs the locator and enforces the FaceBox invariants at the boundary.
// Throws EmptyImage, NoFaceFound or InvalidFaceBox.
FaceBox locate_face(const FaceLocator& locator, const Image& frame);

struct QualityWeights {
  double sharpness = 0.5;
  double exposure = 0.25;
  double face = 0.25;

  void validate() const;  // BadWeights
};

struct FrameQualityScore {
  double sharpness = 0.0;      // variance of the Laplacian of luma
  double exposure = 0.0;       // 1 − |mean luma − 0.5| / 0.5
  double face_presence = 0.0;  // locator confidence, 0 on a miss
  double total = 0.0;
};

double laplacian_variance(const Image& frame);

FrameQualityScore score_frame_quality(const Image& frame, const FaceLocator& locator,
                                      const QualityWeights& weights = {});

struct FrameSelection {
  std::size_t index = 0;
  FrameQualityScore score;
};

// Argmax of total quality; the lowest index wins ties.
FrameSelection select_best_frame(const VideoFrames& video, const FaceLocator& locator,
                                 const QualityWeights& weights = {});

enum class RegionKind { full_frame, face, background, face_band };
inline constexpr std::array<RegionKind, 4> kRegionKinds = {RegionKind::full_frame, RegionKind::face,
                                                           RegionKind::background, RegionKind::face_band};

std::string_view to_string(RegionKind kind);
std::optional<RegionKind> parse_region_kind(std::string_view s);

inline constexpr float kNeutralFill = 0.5f;

struct RegionView {
  RegionKind kind = RegionKind::full_frame;
  Image pixels;
  FaceBox provenance;
};

// Box of `box` grown by band_fraction × its size on each side, clipped to the frame.
FaceBox dilate_box(const FaceBox& box, double band_fraction, int frame_height, int frame_width);

RegionView extract_region(const Image& frame, const FaceBox& box, RegionKind kind, int out_height,
                          int out_width, double band_fraction = 0.25);

}  // namespace facepad
