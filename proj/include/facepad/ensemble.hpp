#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "facepad/frame_region.hpp"
#include "facepad/member_model.hpp"
#include "facepad/metrics.hpp"

namespace facepad {

enum class AggregationKind { mean_probability, majority_vote, attack_veto };

std::string_view to_string(AggregationKind k);
std::optional<AggregationKind> parse_aggregation_kind(std::string_view s);

struct AggregationRule {
  AggregationKind kind = AggregationKind::mean_probability;
  double threshold = 0.5;   // τ
  double veto_floor = 0.05;  // attack_veto only

  void validate() const;  // InvalidConfig
  friend bool operator==(const AggregationRule&, const AggregationRule&) = default;
};

struct EnsembleConfig {
  std::vector<MemberConfig> members;
  AggregationRule rule;
  double band_fraction = 0.25;
  QualityWeights quality;

  // ≥ 2 members, distinct ids and regions, odd count under majority_vote.
  void validate() const;
};

// The default four members, one per region, sharing one backbone.
EnsembleConfig default_ensemble_config(const BackboneConfig& backbone = {});

struct EnsembleDecision {
  std::vector<MemberScore> member_scores;
  double aggregate = 0.0;
  Label verdict = Label::attack;
  AggregationRule rule_used;
};

// mean_probability: aggregate = mean p, bonafide iff aggregate ≥ τ.
// majority_vote: each member votes bonafide iff p ≥ τ, aggregate = vote share,
//                bonafide iff the bonafide votes are a strict majority.
// attack_veto: attack if any p < veto_floor, otherwise as mean_probability.
// The mean is computed from a correctly rounded sum, so it does not depend
// on member order.
EnsembleDecision aggregate(std::span<const MemberScore> scores, const AggregationRule& rule);

struct CalibrationTarget {
  enum class Kind { min_acer, bpcer_at_apcer } kind = Kind::min_acer;
  double max_apcer = 0.0;  // α for bpcer_at_apcer
};

// Candidate thresholds: 0, 1 and every midpoint between adjacent distinct
// aggregates. min_acer picks the lowest ACER; bpcer_at_apcer the lowest BPCER
// among candidates with APCER ≤ α (falling back to the lowest APCER when none
// qualifies). Ties go to the smallest threshold.
double calibrate_threshold(std::span<const ScoredLabel> scores, const CalibrationTarget& target);

std::vector<double> calibration_candidates(std::span<const ScoredLabel> scores);

struct InferenceResult {
  EnsembleDecision decision;
  std::size_t frame_index = 0;
  FrameQualityScore quality;
  FaceBox box;
};

class Ensemble {
 public:
  // Throws ConfigMismatch when a member's config differs from its slot.
  Ensemble(EnsembleConfig config, std::vector<MemberModel> members);

  // Bundle directory: ensemble.json plus one checkpoint directory per member_id.
  static Ensemble load(const std::filesystem::path& bundle);
  void save(const std::filesystem::path& bundle) const;

  const EnsembleConfig& config() const { return config_; }
  const std::vector<MemberModel>& members() const { return members_; }
  const MemberModel& member(std::string_view member_id) const;  // UnknownMember
  void set_rule(const AggregationRule& rule);

  std::vector<MemberScore> score_members(const Image& frame, const FaceBox& box) const;
  EnsembleDecision decide(const Image& frame, const FaceLocator& locator) const;

  // Frame selection → face location → per-member regions → aggregation.
  InferenceResult infer(const VideoFrames& video, const FaceLocator& locator) const;
  InferenceResult infer(const Image& frame, const FaceLocator& locator) const;

 private:
  EnsembleConfig config_;
  std::vector<MemberModel> members_;
};

}  // namespace facepad
