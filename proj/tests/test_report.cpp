#include <doctest.h>

#include <json.hpp>

#include "expect_error.hpp"
#include "facepad/report.hpp"
#include "support.hpp"

using namespace facepad;
using testing::kind_of;

namespace {

ScoredSample scored(const std::string& path, const std::string& scenario, Label label, double aggregate,
                    Label verdict) {
  ScoredSample s;
  s.sample = {path, label, label == Label::attack ? std::optional(AttackType::replay) : std::nullopt, "s1", scenario,
              Split::test};
  s.decision.aggregate = aggregate;
  s.decision.verdict = verdict;
  s.decision.member_scores = {{"face", aggregate}, {"full_frame", aggregate}};
  return s;
}

std::vector<ScoredSample> sample_set() {
  return {scored("a.png", "live", Label::bonafide, 0.9, Label::bonafide),
          scored("b.png", "live", Label::bonafide, 0.4, Label::attack),
          scored("c.png", "replay", Label::attack, 0.2, Label::attack),
          scored("d.png", "replay", Label::attack, 0.7, Label::bonafide),
          scored("e.png", "print", Label::attack, 0.1, Label::attack)};
}

}  // namespace

TEST_CASE("report metrics follow verdicts and scenarios sum to the total") {
  const auto set = sample_set();
  const auto r = build_report(set, 0.5, AggregationKind::mean_probability);
  CHECK(r.metrics.counts == ConfusionCounts{1, 1, 2, 1});
  CHECK(r.metrics.apcer == doctest::Approx(1.0 / 3.0));
  CHECK(r.metrics.bpcer == doctest::Approx(0.5));
  CHECK(r.metrics.acer == doctest::Approx(5.0 / 12.0));
  REQUIRE(r.scenarios.size() == 3);
  CHECK(r.scenarios[0].scenario_id == "live");
  CHECK(r.scenarios[1].scenario_id == "print");
  ConfusionCounts sum;
  for (const auto& s : r.scenarios) sum += s.counts;
  CHECK(sum == r.metrics.counts);
  CHECK(r.auc_roc == doctest::Approx(5.0 / 6.0));
}

TEST_CASE("a veto verdict is counted even when the aggregate clears the threshold") {
  std::vector<ScoredSample> set = {scored("a.png", "live", Label::bonafide, 0.8, Label::attack),
                                   scored("b.png", "x", Label::attack, 0.1, Label::attack)};
  const auto r = build_report(set, 0.5, AggregationKind::attack_veto);
  CHECK(r.metrics.counts.fn == 1);
  CHECK(r.aggregation == "attack_veto");
}

TEST_CASE("single-class reports have no curves") {
  std::vector<ScoredSample> set = {scored("a.png", "live", Label::bonafide, 0.8, Label::bonafide)};
  const auto r = build_report(set, 0.5, AggregationKind::mean_probability);
  CHECK(r.roc.empty());
  CHECK(r.metrics.apcer == 0.0);
  CHECK(kind_of([] { build_report({}, 0.5, AggregationKind::mean_probability); }) == ErrorKind::EmptyScores);
}

TEST_CASE("report files") {
  const auto dir = testing::scratch_dir("report_files");
  const auto set = sample_set();
  auto r = build_report(set, 0.5, AggregationKind::mean_probability);
  r.provenance = {"sha256:aa", "sha256:bb", 42, "2026-01-01T00:00:00Z"};
  write_report(dir, r, set);
  for (const char* name : {"report.json", "scores.jsonl", "scenarios.tsv", "roc.png", "pr.png"})
    CHECK(std::filesystem::exists(dir / name));

  const auto doc = nlohmann::json::parse(testing::read_bytes(dir / "report.json"));
  CHECK(doc["report_version"] == kReportVersion);
  CHECK(doc["sample_count"] == 5);
  CHECK(doc["metrics"]["acer_percent"] == "41.66%");
  CHECK(doc["provenance"]["seed"] == 42);
  CHECK(doc["counts"]["tn"] == 2);

  const std::string scores = testing::read_bytes(dir / "scores.jsonl");
  CHECK(std::count(scores.begin(), scores.end(), '\n') == 5);

  const std::string summary = summarize_report(doc);
  CHECK(summary.find("41.66%") != std::string::npos);
}
