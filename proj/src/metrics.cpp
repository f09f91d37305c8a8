#include "facepad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "facepad/error.hpp"

namespace facepad {

void tally(ConfusionCounts& c, Label truth, bool predicted_bonafide) {
  if (truth == Label::bonafide)
    (predicted_bonafide ? c.tp : c.fn) += 1;
  else
    (predicted_bonafide ? c.fp : c.tn) += 1;
}

ConfusionCounts confusion_from_scores(std::span<const ScoredLabel> pairs, double threshold) {
  if (pairs.empty()) fail(ErrorKind::EmptyScores, "confusion_from_scores needs at least one score");
  ConfusionCounts c;
  for (const auto& p : pairs) tally(c, p.label, accepts_bonafide(p.score, threshold));
  return c;
}

double apcer(const ConfusionCounts& c) {
  if (c.attack_total() == 0) fail(ErrorKind::NoAttackSamples, "APCER undefined without attack samples");
  return static_cast<double>(c.fp) / static_cast<double>(c.tn + c.fp);
}

double bpcer(const ConfusionCounts& c) {
  if (c.bonafide_total() == 0) fail(ErrorKind::NoBonafideSamples, "BPCER undefined without bonafide samples");
  return static_cast<double>(c.fn) / static_cast<double>(c.tp + c.fn);
}

double acer(double apcer_value, double bpcer_value) { return (apcer_value + bpcer_value) / 2.0; }

MetricsReport metrics_at(std::span<const ScoredLabel> pairs, double threshold) {
  MetricsReport r;
  r.counts = confusion_from_scores(pairs, threshold);
  r.apcer = apcer(r.counts);
  r.bpcer = bpcer(r.counts);
  r.acer = acer(r.apcer, r.bpcer);
  r.threshold = threshold;
  return r;
}

std::vector<double> sweep_thresholds(std::span<const ScoredLabel> pairs) {
  if (pairs.empty()) fail(ErrorKind::EmptyScores, "threshold sweep needs at least one score");
  std::vector<double> scores;
  for (const auto& p : pairs) scores.push_back(p.score);
  std::sort(scores.begin(), scores.end(), std::greater<>());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> out;
  out.reserve(scores.size() + 2);
  out.push_back(std::nextafter(scores.front(), inf));
  out.insert(out.end(), scores.begin(), scores.end());
  out.push_back(std::nextafter(scores.back(), -inf));
  return out;
}

namespace {

void require_both_classes(std::span<const ScoredLabel> pairs, bool need_attack) {
  if (pairs.empty()) fail(ErrorKind::EmptyScores, "curve needs at least one score");
  const bool bona = std::any_of(pairs.begin(), pairs.end(), [](const auto& p) { return p.label == Label::bonafide; });
  const bool att = std::any_of(pairs.begin(), pairs.end(), [](const auto& p) { return p.label == Label::attack; });
  if (!bona || (need_attack && !att)) fail(ErrorKind::SingleClassScores, "curve needs both labels present");
}

// Keeps the first (highest-threshold) occurrence of each (x, y) and orders by x.
std::vector<CurvePoint> dedupe_sorted(std::vector<CurvePoint> pts, bool y_ascending) {
  std::vector<CurvePoint> out;
  for (const auto& p : pts)
    if (std::none_of(out.begin(), out.end(), [&](const CurvePoint& q) { return q.x == p.x && q.y == p.y; }))
      out.push_back(p);
  std::stable_sort(out.begin(), out.end(), [y_ascending](const CurvePoint& a, const CurvePoint& b) {
    if (a.x != b.x) return a.x < b.x;
    return y_ascending ? a.y < b.y : false;
  });
  return out;
}

}  // namespace

std::vector<CurvePoint> roc_curve(std::span<const ScoredLabel> pairs) {
  require_both_classes(pairs, true);
  std::vector<CurvePoint> pts;
  for (double t : sweep_thresholds(pairs)) {
    const auto c = confusion_from_scores(pairs, t);
    pts.push_back({t, apcer(c), static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn)});
  }
  return dedupe_sorted(std::move(pts), true);
}

std::vector<CurvePoint> pr_curve(std::span<const ScoredLabel> pairs) {
  require_both_classes(pairs, false);
  std::vector<CurvePoint> pts;
  for (double t : sweep_thresholds(pairs)) {
    const auto c = confusion_from_scores(pairs, t);
    const double recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    const double precision = c.tp + c.fp == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    pts.push_back({t, recall, precision});
  }
  return dedupe_sorted(std::move(pts), false);
}

double auc(std::span<const CurvePoint> points) {
  if (points.size() < 2) return 0.0;
  // Interior points on an exactly horizontal or vertical run add nothing to
  // the area; dropping them avoids accumulating rounding across the run.
  std::vector<CurvePoint> kept{points.front()};
  for (std::size_t i = 1; i + 1 < points.size(); ++i) {
    const auto& prev = kept.back();
    const auto& cur = points[i];
    const auto& next = points[i + 1];
    const bool horizontal = prev.y == cur.y && cur.y == next.y;
    const bool vertical = prev.x == cur.x && cur.x == next.x;
    if (!horizontal && !vertical) kept.push_back(cur);
  }
  kept.push_back(points.back());
  double area = 0.0;
  for (std::size_t i = 1; i < kept.size(); ++i)
    area += (kept[i].x - kept[i - 1].x) * (kept[i].y + kept[i - 1].y) / 2.0;
  return area;
}

std::string format_percent(double fraction, int decimals) {
  const double scale = std::pow(10.0, decimals);
  const double truncated = std::trunc(fraction * 100.0 * scale + (fraction >= 0 ? 1e-9 : -1e-9)) / scale;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f%%", decimals, truncated);
  return buf;
}

}  // namespace facepad
