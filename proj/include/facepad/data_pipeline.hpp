#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "facepad/image.hpp"
#include "facepad/random.hpp"

namespace facepad {

// The four presentation-attack categories. Declaration order is the
// serialization order and must not change.
enum class AttackType { printed_photo, digital_photo, replay, card_mask };
inline constexpr std::array<AttackType, 4> kAttackTypes = {
    AttackType::printed_photo, AttackType::digital_photo, AttackType::replay, AttackType::card_mask};

enum class Label { bonafide, attack };
enum class Split { train, val, test };

std::string_view to_string(AttackType t);
std::string_view to_string(Label l);
std::string_view to_string(Split s);
std::optional<AttackType> parse_attack_type(std::string_view s);
std::optional<Label> parse_label(std::string_view s);
std::optional<Split> parse_split(std::string_view s);

struct Sample {
  std::string path;  // relative to the manifest root
  Label label = Label::bonafide;
  std::optional<AttackType> attack_type;  // present iff label == attack
  std::string subject_id;
  std::string scenario_id;
  Split split = Split::train;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<Sample> samples;
  int version = 1;

  std::vector<Sample> in_split(Split s) const;
  std::filesystem::path resolve(const Sample& s) const { return root / s.path; }

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

// Checks every Sample and manifest invariant; throws the matching error kind.
void validate_manifest(const DatasetManifest& manifest);

// JSON Lines: a header {"version":1,"root":"<dir>"} then one sample per line.
// A relative root is resolved against the manifest file's directory.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

struct SplitFractions {
  double train = 0.0;
  double val = 0.0;
  double test = 0.0;
};

// Subject-disjoint assignment: distinct subjects are sorted, shuffled with
// `seed`, and cut into consecutive train/val/test prefixes.
DatasetManifest split_by_subject(std::vector<Sample> samples, SplitFractions fractions,
                                 std::uint64_t seed, std::filesystem::path root = {});

// Number of subjects that each split receives for `subject_count` subjects.
std::array<std::size_t, 3> split_sizes(std::size_t subject_count, SplitFractions fractions);

// ---------------------------------------------------------------------------
// Augmentation

struct AugmentationConfig {
  double flip_probability = 0.5;
  double crop_fraction = 0.9;
  std::uint64_t seed = 0;

  void validate() const;
  int crop_side(int side) const;
};

struct CropOffset {
  int row = 0;
  int col = 0;
};

// Mirrors columns when draw < flip_probability.
Image augment_flip(const Image& image, const AugmentationConfig& config, double draw);

// Contiguous window of size round(crop_fraction·H) × round(crop_fraction·W).
Image augment_crop(const Image& image, const AugmentationConfig& config, CropOffset offset);

// Seeded wrapper used by the training loop: draws a flip and a crop offset,
// applies both, then resamples back to the input size.
class Augmenter {
 public:
  explicit Augmenter(const AugmentationConfig& config, std::uint64_t stream = 0);
  Image operator()(const Image& image);

 private:
  AugmentationConfig config_;
  Rng rng_;
};

// ---------------------------------------------------------------------------
// Synthetic attacks

struct SyntheticAttackConfig {
  AttackType kind = AttackType::printed_photo;
  std::uint64_t seed = 0;
  double border_fraction = 0.1;     // printed_photo paper margin, digital_photo bezel width
  double blur_sigma = 1.5;          // replay
  double occlusion_fraction = 0.3;  // card_mask
  double warp_magnitude = 0.0;      // printed/digital perspective jitter, fraction of inner side
  double moire_amplitude = 0.05;    // replay
  double moire_period = 5.0;        // replay, pixels

  void validate() const;
};

struct SynthesizedAttack {
  Image image;
  Sample sample;
};

// Renders one presentation attack from a bonafide source. `source_sample`
// supplies subject/scenario/split; the result is always labeled attack.
SynthesizedAttack synthesize_attack(const Image& source, const SyntheticAttackConfig& config,
                                    const Sample& source_sample = {});

// Margin in pixels of the printed_photo paper border / digital_photo bezel.
int attack_margin(int side, double border_fraction);

}  // namespace facepad
