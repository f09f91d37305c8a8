#include "facepad/report.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

#include <opencv2/imgproc.hpp>

#include "facepad/error.hpp"
#include "facepad/image_io.hpp"

namespace facepad {

ReportDocument build_report(std::span<const ScoredSample> scored, double threshold, AggregationKind aggregation) {
  if (scored.empty()) fail(ErrorKind::EmptyScores, "no scored samples to report");
  std::vector<ScoredLabel> pairs;
  std::map<std::string, ConfusionCounts> per_scenario;
  for (const auto& s : scored) {
    pairs.push_back({s.decision.aggregate, s.sample.label});
    tally(per_scenario[s.sample.scenario_id], s.sample.label, s.decision.verdict == Label::bonafide);
  }

  ReportDocument r;
  r.aggregation = std::string(to_string(aggregation));
  r.metrics.threshold = threshold;
  for (const auto& [id, counts] : per_scenario) r.metrics.counts += counts;
  const auto& c = r.metrics.counts;
  r.metrics.apcer = c.attack_total() ? apcer(c) : 0.0;
  r.metrics.bpcer = c.bonafide_total() ? bpcer(c) : 0.0;
  r.metrics.acer = acer(r.metrics.apcer, r.metrics.bpcer);
  if (c.attack_total() && c.bonafide_total()) {
    r.roc = roc_curve(pairs);
    r.pr = pr_curve(pairs);
    r.auc_roc = auc(r.roc);
    r.auc_pr = auc(r.pr);
  }
  for (auto& [id, counts] : per_scenario) r.scenarios.push_back({id, counts});
  return r;
}

nlohmann::json to_json(const ConfusionCounts& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

namespace {

nlohmann::json points_json(std::span<const CurvePoint> points) {
  auto arr = nlohmann::json::array();
  for (const auto& p : points) arr.push_back({{"threshold", p.threshold}, {"x", p.x}, {"y", p.y}});
  return arr;
}

}  // namespace

nlohmann::json to_json(const ReportDocument& r) {
  nlohmann::json doc;
  doc["report_version"] = kReportVersion;
  doc["aggregation"] = r.aggregation;
  doc["threshold"] = r.metrics.threshold;
  doc["metrics"] = {{"apcer", r.metrics.apcer},
                    {"bpcer", r.metrics.bpcer},
                    {"acer", r.metrics.acer},
                    {"apcer_percent", format_percent(r.metrics.apcer)},
                    {"bpcer_percent", format_percent(r.metrics.bpcer)},
                    {"acer_percent", format_percent(r.metrics.acer)},
                    {"auc_roc", r.auc_roc},
                    {"auc_pr", r.auc_pr}};
  doc["counts"] = to_json(r.metrics.counts);
  doc["sample_count"] = r.metrics.counts.total();
  auto scenarios = nlohmann::json::array();
  for (const auto& s : r.scenarios) scenarios.push_back({{"scenario_id", s.scenario_id}, {"counts", to_json(s.counts)}});
  doc["scenarios"] = scenarios;
  doc["curves"] = {{"roc", points_json(r.roc)}, {"pr", points_json(r.pr)}};
  doc["provenance"] = {{"config_digest", r.provenance.config_digest},
                       {"bundle_digest", r.provenance.bundle_digest},
                       {"seed", r.provenance.seed},
                       {"created_at", r.provenance.created_at}};
  return doc;
}

Image plot_curve(std::span<const CurvePoint> points, const std::string& title, const std::string& x_label,
                 const std::string& y_label, int size) {
  const int margin = size / 8;
  const int span = size - 2 * margin;
  cv::Mat canvas(size, size, CV_8UC3, cv::Scalar(255, 255, 255));
  auto to_px = [&](double x, double y) {
    return cv::Point(margin + static_cast<int>(std::lround(x * span)), size - margin - static_cast<int>(std::lround(y * span)));
  };
  const cv::Scalar black(0, 0, 0), grid(220, 220, 220), blue(180, 80, 20);
  const int font = cv::FONT_HERSHEY_SIMPLEX;
  for (int i = 0; i <= 4; ++i) {
    const double t = i / 4.0;
    cv::line(canvas, to_px(t, 0), to_px(t, 1), grid, 1);
    cv::line(canvas, to_px(0, t), to_px(1, t), grid, 1);
    char label[8];
    std::snprintf(label, sizeof label, "%.2f", t);
    cv::putText(canvas, label, to_px(t, 0) + cv::Point(-14, 18), font, 0.35, black, 1, cv::LINE_AA);
    cv::putText(canvas, label, to_px(0, t) + cv::Point(-40, 4), font, 0.35, black, 1, cv::LINE_AA);
  }
  cv::rectangle(canvas, to_px(0, 1), to_px(1, 0), black, 1);

  std::vector<CurvePoint> sorted(points.begin(), points.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const CurvePoint& a, const CurvePoint& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  std::vector<cv::Point> poly;
  for (const auto& p : sorted) poly.push_back(to_px(std::clamp(p.x, 0.0, 1.0), std::clamp(p.y, 0.0, 1.0)));
  if (poly.size() > 1) cv::polylines(canvas, poly, false, blue, 2, cv::LINE_AA);
  for (const auto& pt : poly) cv::circle(canvas, pt, 2, blue, cv::FILLED, cv::LINE_AA);

  cv::putText(canvas, title, cv::Point(margin, margin / 2), font, 0.5, black, 1, cv::LINE_AA);
  cv::putText(canvas, x_label, cv::Point(size / 2 - 30, size - margin / 4), font, 0.4, black, 1, cv::LINE_AA);
  cv::putText(canvas, y_label, cv::Point(4, margin - 8), font, 0.4, black, 1, cv::LINE_AA);

  Image out(size, size, 3);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) {
      const auto& px = canvas.at<cv::Vec3b>(r, c);
      for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = px[2 - ch] / 255.0f;
    }
  return out;
}

void write_report(const std::filesystem::path& dir, const ReportDocument& report, std::span<const ScoredSample> scored) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) fail(ErrorKind::IoError, "cannot write " + (dir / name).string());
    return out;
  };
  open("report.json") << to_json(report).dump(2) << "\n";

  auto scores = open("scores.jsonl");
  for (const auto& s : scored) {
    nlohmann::json members = nlohmann::json::object();
    for (const auto& m : s.decision.member_scores) members[m.member_id] = m.p_bonafide;
    nlohmann::json line = {{"sample_path", s.sample.path},
                           {"subject_id", s.sample.subject_id},
                           {"scenario_id", s.sample.scenario_id},
                           {"label", to_string(s.sample.label)},
                           {"p_aggregate", s.decision.aggregate},
                           {"verdict", to_string(s.decision.verdict)},
                           {"member_scores", members}};
    scores << line.dump() << "\n";
  }

  auto table = open("scenarios.tsv");
  table << "scenario_id\ttp\tfp\ttn\tfn\n";
  for (const auto& s : report.scenarios)
    table << s.scenario_id << "\t" << s.counts.tp << "\t" << s.counts.fp << "\t" << s.counts.tn << "\t" << s.counts.fn
          << "\n";

  save_png(dir / "roc.png", plot_curve(report.roc, "ROC", "APCER (attacks accepted)", "1 - BPCER"));
  save_png(dir / "pr.png", plot_curve(report.pr, "Precision-Recall", "recall", "precision"));
}

std::string summarize_report(const nlohmann::json& report) {
  std::ostringstream out;
  const auto& m = report.at("metrics");
  const auto& c = report.at("counts");
  out << "Metric\tScore\n";
  out << "APCER\t" << m.at("apcer_percent").get<std::string>() << "\n";
  out << "BPCER\t" << m.at("bpcer_percent").get<std::string>() << "\n";
  out << "ACER\t" << m.at("acer_percent").get<std::string>() << "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", m.at("auc_roc").get<double>());
  out << "AUC-ROC\t" << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.4f", m.at("auc_pr").get<double>());
  out << "AUC-PR\t" << buf << "\n";
  out << "threshold=" << report.at("threshold").get<double>() << " aggregation=" << report.at("aggregation").get<std::string>()
      << " cases=" << report.at("sample_count").get<long>() << " (tp=" << c.at("tp") << " fp=" << c.at("fp")
      << " tn=" << c.at("tn") << " fn=" << c.at("fn") << ")\n\n";
  out << "scenario\ttp\tfp\ttn\tfn\n";
  for (const auto& s : report.at("scenarios")) {
    const auto& sc = s.at("counts");
    out << s.at("scenario_id").get<std::string>() << "\t" << sc.at("tp") << "\t" << sc.at("fp") << "\t" << sc.at("tn")
        << "\t" << sc.at("fn") << "\n";
  }
  return out.str();
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace facepad
