// Acceptance gate: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "facepad/commands.hpp"
#include "facepad/desk_dataset.hpp"
#include "facepad/explain.hpp"
#include "facepad/image_io.hpp"
#include "facepad/metrics.hpp"
#include "facepad/protocol.hpp"
#include "support.hpp"

using namespace facepad;

namespace {

// Tolerances and sizes pinned here, one place.
constexpr double kMetricTolerance = 1e-12;
constexpr double kGradientStep = 1e-4;
constexpr double kGradientMaxRelError = 1e-3;
constexpr double kGradientFloor = 1e-7;  // entries with |a|,|f| below this count as equal
constexpr double kDeskMaxAcer = 0.10;
constexpr double kDeskMinAuc = 0.95;
constexpr double kDeskMaxSeconds = 600.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome metric_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  long checked = 0, mismatches = 0;
  double worst_identity = 0.0;
  for (long tp = 0; tp <= 12; ++tp)
    for (long fp = 0; fp <= 12; ++fp)
      for (long tn = 0; tn <= 12; ++tn)
        for (long fn = 0; fn <= 12; ++fn) {
          const ConfusionCounts c{tp, fp, tn, fn};
          ++checked;
          bool apcer_threw = false, bpcer_threw = false;
          double a = 0, b = 0;
          try {
            a = apcer(c);
          } catch (const Error& e) {
            apcer_threw = e.kind() == ErrorKind::NoAttackSamples;
          }
          try {
            b = bpcer(c);
          } catch (const Error& e) {
            bpcer_threw = e.kind() == ErrorKind::NoBonafideSamples;
          }
          if ((tn + fp == 0) != apcer_threw || (tp + fn == 0) != bpcer_threw) {
            ++mismatches;
            continue;
          }
          if (apcer_threw || bpcer_threw) continue;
          // Exact rational check: a·(TN+FP) must reproduce FP when FP/(TN+FP)
          // is evaluated directly.
          const double direct_a = static_cast<double>(fp) / static_cast<double>(tn + fp);
          const double direct_b = static_cast<double>(fn) / static_cast<double>(tp + fn);
          if (a != direct_a || b != direct_b) ++mismatches;
          const double identity = std::abs(acer(a, b) - (direct_a + direct_b) / 2.0);
          worst_identity = std::max(worst_identity, identity);
          if (identity > std::numeric_limits<double>::epsilon()) ++mismatches;
        }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 5.0, std::to_string(checked) + " count tuples, " + std::to_string(mismatches) +
                                             " mismatches, max |acer-(a+b)/2| " + fmt("%.1e", worst_identity) + ", " +
                                             fmt("%.2f", secs) + " s"};
}

Outcome acer_consistency() {
  const double value = acer(0.0, 0.05355);
  const std::string shown = format_percent(value, 2);
  const bool pass = std::abs(value - 0.026775) <= kMetricTolerance && shown == "2.67%";
  return {pass, "acer(0, 0.05355) = " + fmt("%.15g", value) + ", displayed " + shown};
}

Outcome protocol_structure() {
  const auto protocol = load_protocol(default_protocol_path());
  const auto rows = protocol_expand(protocol);
  const auto bona = std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r.label == Label::bonafide; });
  const auto attack = static_cast<long>(rows.size()) - bona;
  const bool pass = protocol.subjects.size() == 6 && rows.size() == 228 && bona == 84 && attack == 144;
  return {pass, std::to_string(protocol.subjects.size()) + " subjects, " + std::to_string(rows.size()) + " rows (" +
                    std::to_string(bona) + " bonafide, " + std::to_string(attack) + " attack)"};
}

Outcome gradient_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  BackboneConfig tiny;
  tiny.input_height = 8;
  tiny.input_width = 8;
  tiny.conv_blocks = {{4, 3, 1}, {4, 3, 1}};
  tiny.dense_units = 4;
  tiny.dropout_rate = 0.0;
  const MemberConfig member{RegionKind::full_frame, tiny, "tiny"};
  Rng rng(4242);
  double worst = 0.0;
  std::size_t params = 0;
  int cases = 0;
  for (int trial = 0; trial < 6; ++trial) {
    ModelParameters p = build_model(member, 1000 + trial);
    params = p.values.size();
    for (auto& v : p.values) v += static_cast<float>(0.1 * rng.normal());  // move biases off zero
    const Image input = testing::random_image(rng, 8, 8);
    for (auto target : {GradCamTarget::bonafide_score, GradCamTarget::attack_score})
      for (int layer : {0, 1}) {
        const auto analytic = activation_gradient(p, input, target, layer).gradient;
        const auto numeric = finite_difference_gradient(p, input, target, kGradientStep, layer);
        for (std::size_t i = 0; i < analytic.size(); ++i) {
          const double a = analytic[i], f = numeric[i];
          const double scale = std::max(std::abs(a), std::abs(f));
          if (scale < kGradientFloor) continue;
          worst = std::max(worst, std::abs(a - f) / scale);
        }
        ++cases;
      }
  }
  const double secs = seconds_since(t0);
  const bool pass = params <= 500 && worst <= kGradientMaxRelError && secs < 30.0;
  return {pass, std::to_string(params) + " parameters, " + std::to_string(cases) + " input/target/layer cases, max rel error " +
                    fmt("%.2e", worst) + ", " + fmt("%.2f", secs) + " s"};
}

Outcome desk_end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = testing::scratch_dir("desk_e2e");
  RunConfig config = load_run_config(std::filesystem::path(FACEPAD_DATA_DIR) / "configs" / "desk.conf");
  config.manifest = dir / "data" / "manifest.jsonl";
  config.output_dir = dir / "run";
  const CommandIo io = default_io(true);

  if (cmd_generate(config, false, io) != 0) return {false, "generate failed"};
  const auto manifest = load_manifest(config.manifest);
  long bona = 0, attack = 0;
  std::set<AttackType> kinds;
  std::map<Split, std::set<std::string>> subjects;
  for (const auto& s : manifest.samples) {
    (s.label == Label::bonafide ? bona : attack)++;
    if (s.attack_type) kinds.insert(*s.attack_type);
    subjects[s.split].insert(s.subject_id);
  }
  bool disjoint = true;
  for (auto a : {Split::train, Split::val, Split::test})
    for (auto b : {Split::train, Split::val, Split::test})
      if (a < b)
        for (const auto& id : subjects[a]) disjoint = disjoint && !subjects[b].contains(id);
  if (bona < 150 || attack < 150 || kinds.size() != 4 || !disjoint)
    return {false, "dataset does not meet the size/type/disjointness floor"};

  const int train_rc = cmd_train(config, io);
  if (train_rc != 0) return {false, "train exited " + std::to_string(train_rc)};
  const int eval_rc = cmd_evaluate(config, config.bundle_dir(), io);
  if (eval_rc != 0) return {false, "evaluate exited " + std::to_string(eval_rc)};
  const auto report = nlohmann::json::parse(testing::read_bytes(config.report_dir() / "report.json"));
  const double acer_v = report["metrics"]["acer"].get<double>();
  const double auc_v = report["metrics"]["auc_roc"].get<double>();
  const double secs = seconds_since(t0);
  const bool pass = acer_v <= kDeskMaxAcer && auc_v >= kDeskMinAuc && secs <= kDeskMaxSeconds;
  return {pass, std::to_string(bona) + " bonafide / " + std::to_string(attack) + " attacks, held-out ACER " +
                    fmt("%.4f", acer_v) + " (APCER " + fmt("%.4f", report["metrics"]["apcer"].get<double>()) +
                    ", BPCER " + fmt("%.4f", report["metrics"]["bpcer"].get<double>()) + "), AUC " + fmt("%.4f", auc_v) +
                    ", tau " + fmt("%.4f", report["threshold"].get<double>()) + ", " + fmt("%.0f", secs) +
                    " s wall on " + std::to_string(std::thread::hardware_concurrency()) + " hardware thread(s)"};
}

Outcome frame_selection() {
  int trials = 0, correct = 0;
  const CenterBoxLocator locator;
  for (std::uint64_t seed = 1; seed <= 24; ++seed) {
    Rng rng(seed);
    const auto subject = make_subject_style("s" + std::to_string(seed), seed);
    const Image sharp = render_bonafide(subject, make_scene_style("indoor", seed), 64, seed);
    const int frames = 3 + static_cast<int>(rng.below(4));
    const auto sharp_at = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(frames)));
    VideoFrames video;
    for (int i = 0; i < frames; ++i)
      video.frames.push_back(static_cast<std::size_t>(i) == sharp_at ? sharp : gaussian_blur(sharp, rng.uniform(1.0, 3.0)));
    ++trials;
    if (select_best_frame(video, locator).index == sharp_at) ++correct;
  }
  return {correct == trials, std::to_string(correct) + "/" + std::to_string(trials) + " trials picked the sharp frame"};
}

Outcome determinism() {
  std::vector<std::string> reports, checkpoints;
  for (int run = 0; run < 2; ++run) {
    const auto dir = testing::scratch_dir("determinism_" + std::to_string(run));
    // Different worker counts must not change anything either.
    const RunConfig config = testing::tiny_run_config(dir, 99, run == 0 ? 1 : 4);
    const CommandIo io = default_io(true);
    if (cmd_generate(config, false, io) != 0 || cmd_train(config, io) != 0 ||
        cmd_evaluate(config, config.bundle_dir(), io) != 0)
      return {false, "run " + std::to_string(run) + " failed"};
    auto report = nlohmann::json::parse(testing::read_bytes(config.report_dir() / "report.json"));
    report.erase("provenance");
    reports.push_back(report.dump());
    std::string bytes;
    for (const auto& m : config.ensemble.members) {
      bytes += testing::read_bytes(config.bundle_dir() / m.member_id / "weights.bin");
      bytes += testing::read_bytes(config.bundle_dir() / m.member_id / "member.json");
    }
    bytes += testing::read_bytes(config.bundle_dir() / "ensemble.json");
    checkpoints.push_back(bytes);
  }
  const bool same_report = reports[0] == reports[1];
  const bool same_ckpt = checkpoints[0] == checkpoints[1];
  return {same_report && same_ckpt, std::string("report JSON ") + (same_report ? "identical" : "DIFFERS") +
                                        ", checkpoints " + (same_ckpt ? "bit-identical" : "DIFFER") + " (" +
                                        std::to_string(checkpoints[0].size()) + " bytes)"};
}

Outcome roc_pr_oracle() {
  Rng rng(808);
  int sets = 0, bad_points = 0, points = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const auto n = 2 + static_cast<std::size_t>(rng.below(19));
    std::vector<ScoredLabel> pairs;
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse grid so ties are common.
      const double score = static_cast<double>(rng.below(11)) / 10.0;
      pairs.push_back({score, rng.uniform() < 0.5 ? Label::bonafide : Label::attack});
    }
    if (std::none_of(pairs.begin(), pairs.end(), [](auto& p) { return p.label == Label::bonafide; }) ||
        std::none_of(pairs.begin(), pairs.end(), [](auto& p) { return p.label == Label::attack; }))
      continue;
    ++sets;
    for (const auto& pt : roc_curve(pairs)) {
      ++points;
      long tp = 0, fp = 0, tn = 0, fn = 0;  // brute force, independent of the library tally
      for (const auto& p : pairs) {
        const bool accept = p.score >= pt.threshold;
        if (p.label == Label::bonafide) (accept ? tp : fn)++;
        else (accept ? fp : tn)++;
      }
      const auto lib = confusion_from_scores(pairs, pt.threshold);
      const bool ok = lib == ConfusionCounts{tp, fp, tn, fn} &&
                      pt.x == static_cast<double>(fp) / static_cast<double>(tn + fp) &&
                      pt.y == static_cast<double>(tp) / static_cast<double>(tp + fn);
      if (!ok) ++bad_points;
    }
    for (const auto& pt : pr_curve(pairs)) {
      ++points;
      long tp = 0, fp = 0, fn = 0;
      for (const auto& p : pairs) {
        const bool accept = p.score >= pt.threshold;
        if (p.label == Label::bonafide) (accept ? tp : fn)++;
        else if (accept) ++fp;
      }
      const double precision = tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
      const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
      if (pt.x != recall || pt.y != precision) ++bad_points;
    }
  }
  std::vector<ScoredLabel> separable, constant;
  for (int i = 0; i < 10; ++i) {
    separable.push_back({0.6 + 0.04 * i, Label::bonafide});
    separable.push_back({0.04 * i, Label::attack});
    constant.push_back({0.5, i % 2 ? Label::bonafide : Label::attack});
  }
  const double auc_sep = auc(roc_curve(separable));
  const double auc_const = auc(roc_curve(constant));
  const bool pass = sets >= 10 && bad_points == 0 && auc_sep == 1.0 && auc_const == 0.5;
  return {pass, std::to_string(sets) + " score sets, " + std::to_string(points) + " ROC/PR points, " +
                    std::to_string(bad_points) + " mismatches; separable AUC " + fmt("%.17g", auc_sep) +
                    ", constant AUC " + fmt("%.17g", auc_const)};
}

Outcome augmentation_properties() {
  Rng rng(9);
  int flip_ok = 0, crop_ok = 0;
  const int cases = 1000;
  for (int i = 0; i < cases; ++i) {
    const int h = 1 + static_cast<int>(rng.below(12)), w = 1 + static_cast<int>(rng.below(12));
    const int c = rng.uniform() < 0.5 ? 1 : 3;
    const Image img = testing::random_image(rng, h, w, c);
    const AugmentationConfig always{1.0, 1.0, 0};
    const double draw = rng.uniform();
    if (augment_flip(augment_flip(img, always, draw), always, draw) == img) ++flip_ok;

    const AugmentationConfig cfg{0.5, rng.uniform(0.05, 1.0), 0};
    const int ch = cfg.crop_side(h), cw = cfg.crop_side(w);
    const CropOffset off{static_cast<int>(rng.below(static_cast<std::uint64_t>(h - ch + 1))),
                         static_cast<int>(rng.below(static_cast<std::uint64_t>(w - cw + 1)))};
    const Image out = augment_crop(img, cfg, off);
    bool sub = out.height == ch && out.width == cw && out.channels == c;
    for (int r = 0; sub && r < ch; ++r)
      for (int col = 0; sub && col < cw; ++col)
        for (int k = 0; k < c; ++k) sub = sub && out.at(r, col, k) == img.at(r + off.row, col + off.col, k);
    if (sub) ++crop_ok;
  }
  return {flip_ok == cases && crop_ok == cases,
          "flip involution " + std::to_string(flip_ok) + "/" + std::to_string(cases) + ", crop sub-window " +
              std::to_string(crop_ok) + "/" + std::to_string(cases)};
}

Outcome saliency_plausibility() {
  // A full-frame member trained only on bonafide vs printed_photo.
  constexpr int kSide = 96, kSubjects = 30, kPerClass = 4;
  RunConfig desk = load_run_config(std::filesystem::path(FACEPAD_DATA_DIR) / "configs" / "desk.conf");
  MemberConfig member = desk.ensemble.members.front();
  member.region = RegionKind::full_frame;
  member.member_id = "printed_full_frame";

  struct Shot {
    Image image;
    Label label;
    double border_fraction;
  };
  std::vector<Shot> train, val, test;
  Rng attack_rng(31337);
  for (int s = 0; s < kSubjects; ++s) {
    const std::string subject = "p" + std::to_string(s);
    const auto style = make_subject_style(subject, 5);
    auto& bucket = s < 18 ? train : (s < 24 ? val : test);
    for (int k = 0; k < 2 * kPerClass; ++k) {
      const auto scene = make_scene_style("scene" + std::to_string(k % 4) + "/" + subject, 5);
      Image img = render_bonafide(style, scene, kSide, derive_seed(5, static_cast<std::uint64_t>(s * 100 + k)));
      if (k < kPerClass) {
        bucket.push_back({quantize_8bit(img), Label::bonafide, 0.0});
      } else {
        const auto cfg = sample_attack_config(AttackType::printed_photo, attack_rng);
        auto attack = synthesize_attack(img, cfg);
        add_sensor_noise(attack.image, 0.02, attack_rng);
        bucket.push_back({quantize_8bit(attack.image), Label::attack, cfg.border_fraction});
      }
    }
  }
  const CenterBoxLocator locator;
  const RegionExtractor extractor{&locator, desk.ensemble.band_fraction};
  auto views = [&](const std::vector<Shot>& shots) {
    std::vector<LabeledView> out;
    for (const auto& s : shots) out.push_back({extractor(s.image, member).pixels, s.label});
    return out;
  };
  TrainingConfig tconfig = desk.training;
  tconfig.seed = 77;
  AugmentationConfig aug = desk.augmentation;
  aug.seed = 77;
  const auto trained = train_member(member, tconfig, aug, views(train), views(val));

  const int h = member.backbone.input_height, w = member.backbone.input_width;
  int images = 0, band_wins = 0;
  double band_sum = 0.0, rest_sum = 0.0;
  for (const auto& shot : test) {
    if (shot.label != Label::attack) continue;
    const RegionView view = extractor(shot.image, member);
    const SaliencyMap map = grad_cam(trained.model, view, {GradCamTarget::attack_score, std::nullopt});
    // Band: map pixels whose source coordinate lies inside the white margin.
    const int margin = attack_margin(kSide, shot.border_fraction);
    auto in_margin = [&](int i, int n) {
      const double src = n > 1 ? i * static_cast<double>(kSide - 1) / (n - 1) : 0.0;
      return src <= margin - 1 || src >= kSide - margin;
    };
    double band = 0.0, rest = 0.0;
    long nb = 0, nr = 0;
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        if (in_margin(r, h) || in_margin(c, w)) band += map.at(r, c), ++nb;
        else rest += map.at(r, c), ++nr;
      }
    band /= static_cast<double>(std::max(1L, nb));
    rest /= static_cast<double>(std::max(1L, nr));
    ++images;
    band_sum += band;
    rest_sum += rest;
    if (band > rest) ++band_wins;
  }
  const bool pass = images >= 20 && 2 * band_wins > images;
  return {pass, std::to_string(band_wins) + "/" + std::to_string(images) +
                    " held-out printed photos have higher mean saliency in the border band (mean band " +
                    fmt("%.3f", band_sum / std::max(1, images)) + " vs interior " + fmt("%.3f", rest_sum / std::max(1, images)) +
                    ")"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"metric oracle equivalence", metric_oracle},
      {"ACER arithmetic and display", acer_consistency},
      {"scenario protocol structure", protocol_structure},
      {"Grad-CAM gradient fidelity", gradient_fidelity},
      {"desk-scale end-to-end training", desk_end_to_end},
      {"frame selection", frame_selection},
      {"train/evaluate determinism", determinism},
      {"ROC/PR oracle", roc_pr_oracle},
      {"augmentation properties", augmentation_properties},
      {"saliency plausibility", saliency_plausibility},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed;
}
