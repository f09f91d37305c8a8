#pragma once

#include <span>
#include <string>
#include <vector>

#include "facepad/data_pipeline.hpp"

namespace facepad {

// Positive class is BONAFIDE throughout:
//   TP = bonafide accepted,  FN = bonafide rejected,
//   TN = attack rejected,    FP = attack accepted.
// So APCER = FP/(TN+FP) is measured on the attack population and
// BPCER = FN/(TP+FN) on the bonafide population.

struct ScoredLabel {
  double score = 0.0;  // P(bonafide)
  Label label = Label::bonafide;
};

struct ConfusionCounts {
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;

  long bonafide_total() const { return tp + fn; }
  long attack_total() const { return tn + fp; }
  long total() const { return tp + fp + tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp, fp += o.fp, tn += o.tn, fn += o.fn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// Decision rule shared by every consumer: bonafide iff score ≥ threshold.
inline bool accepts_bonafide(double score, double threshold) { return score >= threshold; }

void tally(ConfusionCounts& counts, Label truth, bool predicted_bonafide);
ConfusionCounts confusion_from_scores(std::span<const ScoredLabel> pairs, double threshold);

double apcer(const ConfusionCounts& c);  // throws NoAttackSamples
double bpcer(const ConfusionCounts& c);  // throws NoBonafideSamples
double acer(double apcer_value, double bpcer_value);

struct MetricsReport {
  double apcer = 0.0;
  double bpcer = 0.0;
  double acer = 0.0;
  ConfusionCounts counts;
  double threshold = 0.5;
};

MetricsReport metrics_at(std::span<const ScoredLabel> pairs, double threshold);

// ROC: x = FP/(TN+FP), y = TP/(TP+FN). PR: x = recall, y = precision.
struct CurvePoint {
  double threshold = 0.0;
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

// Distinct scores in descending order, bracketed by one sentinel just above
// the maximum and one just below the minimum.
std::vector<double> sweep_thresholds(std::span<const ScoredLabel> pairs);

std::vector<CurvePoint> roc_curve(std::span<const ScoredLabel> pairs);
std::vector<CurvePoint> pr_curve(std::span<const ScoredLabel> pairs);

// Trapezoidal area under points already sorted by x.
double auc(std::span<const CurvePoint> points);

// Percent string truncated (not rounded) to `decimals`, e.g. 0.026775 → "2.67%".
std::string format_percent(double fraction, int decimals = 2);

}  // namespace facepad
