#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "facepad/data_pipeline.hpp"
#include "facepad/frame_region.hpp"
#include "facepad/network.hpp"

namespace facepad {

struct MemberConfig {
  RegionKind region = RegionKind::full_frame;
  BackboneConfig backbone;
  std::string member_id;

  friend bool operator==(const MemberConfig&, const MemberConfig&) = default;
};

// Flat float32 parameter buffer in the Network's declaration order.
struct ModelParameters {
  BackboneConfig backbone;
  std::vector<float> values;

  std::vector<double> widened() const { return {values.begin(), values.end()}; }
  friend bool operator==(const ModelParameters&, const ModelParameters&) = default;
};

struct MemberModel {
  MemberConfig config;
  ModelParameters params;
};

struct TrainingConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 16;
  int epochs = 10;
  std::uint64_t seed = 0;

  void validate() const;  // InvalidConfig
};

struct EpochRecord {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acer = 0.0;
  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainingRecord {
  std::vector<EpochRecord> epochs;
  friend bool operator==(const TrainingRecord&, const TrainingRecord&) = default;
};

struct MemberScore {
  std::string member_id;
  double p_bonafide = 0.5;
  friend bool operator==(const MemberScore&, const MemberScore&) = default;
};

inline constexpr double kProbabilityClamp = 1e-7;

double sigmoid(double logit);

// −[y ln p + (1−y) ln(1−p)] with p clamped to [1e-7, 1−1e-7].
double bce_loss(double p, int y);

ModelParameters build_model(const MemberConfig& config, std::uint64_t seed);

// Adam with bias-corrected moments, operating on a double master copy.
class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t parameter_count, const TrainingConfig& config);
  void step(std::span<double> weights, std::span<const double> grad);
  long steps() const { return t_; }

 private:
  TrainingConfig cfg_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

// One training example: a region view already at the member's input size.
struct LabeledView {
  Image pixels;
  Label label = Label::bonafide;
};

struct TrainedMember {
  MemberModel model;
  TrainingRecord record;
};

using EpochCallback = std::function<void(int epoch, const EpochRecord&)>;

// Seeded mini-batch loop: shuffle → augment → forward (dropout on) → BCE →
// backward → Adam. Single-threaded and deterministic for fixed seeds.
TrainedMember train_member(const MemberConfig& config, const TrainingConfig& tconfig,
                           const AugmentationConfig& augmentation, std::span<const LabeledView> train,
                           std::span<const LabeledView> val, const EpochCallback& on_epoch = {});

// Locates the face and crops the region bound to a member.
struct RegionExtractor {
  const FaceLocator* locator = nullptr;
  double band_fraction = 0.25;

  RegionView operator()(const Image& frame, const MemberConfig& member) const;
};

std::vector<LabeledView> extract_views(std::span<const Image> frames, std::span<const Label> labels,
                                       const MemberConfig& member, const RegionExtractor& extractor);

// Manifest-level entry point: loads the train/val splits, extracts the
// member's region and trains.
TrainedMember train_member(const MemberConfig& config, const TrainingConfig& tconfig,
                           const AugmentationConfig& augmentation, const DatasetManifest& manifest,
                           const RegionExtractor& extractor, const EpochCallback& on_epoch = {});

double predict_logit(const ModelParameters& params, const Image& pixels);
MemberScore predict_member(const MemberModel& model, const RegionView& view);

// Checkpoint directory: member.json (config, parameter count, digest) and
// weights.bin (little-endian float32).
void save_checkpoint(const MemberModel& model, const std::filesystem::path& dir);
MemberModel load_checkpoint(const std::filesystem::path& dir);
// Also checks the stored config against the slot it is loaded into.
MemberModel load_checkpoint(const std::filesystem::path& dir, const MemberConfig& expected);

nlohmann::json to_json(const BackboneConfig& b);
BackboneConfig backbone_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MemberConfig& m);
MemberConfig member_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainingRecord& r);

}  // namespace facepad
