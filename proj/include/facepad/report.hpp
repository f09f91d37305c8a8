#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "facepad/data_pipeline.hpp"
#include "facepad/ensemble.hpp"
#include "facepad/metrics.hpp"

namespace facepad {

struct ScoredSample {
  Sample sample;
  EnsembleDecision decision;
};

struct ScenarioBreakdown {
  std::string scenario_id;
  ConfusionCounts counts;
};

struct Provenance {
  std::string config_digest;
  std::string bundle_digest;
  std::uint64_t seed = 0;
  std::string created_at;  // UTC, ISO 8601
};

struct ReportDocument {
  MetricsReport metrics;
  std::string aggregation;
  double auc_roc = 0.0;
  double auc_pr = 0.0;
  std::vector<CurvePoint> roc;
  std::vector<CurvePoint> pr;
  std::vector<ScenarioBreakdown> scenarios;  // sorted by scenario_id
  Provenance provenance;
};

inline constexpr int kReportVersion = 1;

// Counts follow each sample's verdict (so veto and vote rules are honoured);
// curves sweep the aggregate score. APCER or BPCER
// is reported as 0 when its class is absent; the counts show why.
ReportDocument build_report(std::span<const ScoredSample> scored, double threshold, AggregationKind aggregation);

// The provenance block sits under "provenance" so it can be dropped before
// comparing two runs.
nlohmann::json to_json(const ReportDocument& report);
nlohmann::json to_json(const ConfusionCounts& counts);

// report.json, scores.jsonl, scenarios.tsv, roc.png and pr.png.
void write_report(const std::filesystem::path& dir, const ReportDocument& report,
                  std::span<const ScoredSample> scored);

// Renders a curve on [0,1]² axes as an RGB image.
Image plot_curve(std::span<const CurvePoint> points, const std::string& title, const std::string& x_label,
                 const std::string& y_label, int size = 480);

// Human-readable summary of a report.json document.
std::string summarize_report(const nlohmann::json& report);

std::string utc_timestamp();

}  // namespace facepad
