#include "facepad/commands.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "facepad/digest.hpp"
#include "facepad/image_io.hpp"

namespace facepad {
namespace {

using json = nlohmann::json;

unsigned worker_count(int configured, std::size_t jobs) {
  unsigned n = configured > 0 ? static_cast<unsigned>(configured) : std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

// Runs fn(i) for i in [0, n) on a pool of threads. Results must be written to
// per-index slots; the exception from the lowest failing index is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<Image> load_images(const DatasetManifest& manifest, std::span<const Sample> samples, unsigned workers) {
  std::vector<Image> images(samples.size());
  parallel_for(samples.size(), workers, [&](std::size_t i) { images[i] = load_image(manifest.resolve(samples[i])); });
  return images;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::MissingFile, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string bundle_digest(const std::filesystem::path& bundle, const Ensemble& ensemble) {
  std::string bytes = read_file(bundle / "ensemble.json");
  for (const auto& m : ensemble.members()) bytes += read_file(bundle / m.config.member_id / "member.json");
  return "sha256:" + sha256_hex(bytes);
}

void write_json(const std::filesystem::path& path, const json& doc) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << doc.dump(2) << "\n";
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
}

template <typename Fn>
int guarded(const CommandIo& io, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    const int code = exit_code_for(e.kind());
    *io.err << error_record(e, code) << std::endl;
    return code;
  } catch (const std::exception& e) {
    *io.err << json{{"error", "Internal"}, {"message", e.what()}, {"exit_code", 9}}.dump() << std::endl;
    return 9;
  }
}

const CenterBoxLocator kLocator;

}  // namespace

CommandIo default_io(bool quiet) { return {&std::cout, &std::cerr, quiet}; }

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigError:
    case ErrorKind::InvalidConfig:
    case ErrorKind::BadWeights:
    case ErrorKind::BadAlpha:
    case ErrorKind::BadBandFraction:
    case ErrorKind::EvenMajority:
    case ErrorKind::SpatialCollapse:
      return 1;
    case ErrorKind::MissingFile:
      return 2;
    case ErrorKind::MalformedRecord:
    case ErrorKind::LabelTaxonomyViolation:
    case ErrorKind::DuplicatePath:
    case ErrorKind::SplitLeakage:
    case ErrorKind::TooFewSubjects:
    case ErrorKind::BadFractions:
      return 3;
    case ErrorKind::SingleClassTrainingSet:
    case ErrorKind::SingleClassValidation:
      return 4;
    case ErrorKind::NonFiniteLoss:
      return 5;
    case ErrorKind::CorruptCheckpoint:
    case ErrorKind::ConfigMismatch:
    case ErrorKind::ShapeMismatch:
    case ErrorKind::UnknownMember:
      return 6;
    case ErrorKind::ImageDecode:
    case ErrorKind::IoError:
    case ErrorKind::EmptyImage:
    case ErrorKind::EmptyVideo:
    case ErrorKind::CropOutOfBounds:
    case ErrorKind::NoFaceFound:
    case ErrorKind::InvalidFaceBox:
    case ErrorKind::BoxOutOfBounds:
      return 7;
    case ErrorKind::EmptyProtocol:
    case ErrorKind::UnresolvedProtocolRows:
      return 8;
    case ErrorKind::EmptyScores:
    case ErrorKind::NoAttackSamples:
    case ErrorKind::NoBonafideSamples:
    case ErrorKind::SingleClassScores:
    case ErrorKind::ModelTooLarge:
      return 9;
  }
  return 9;
}

std::string error_record(const Error& e, int exit_code) {
  json rec = {{"error", e.name()}, {"message", e.detail()}, {"exit_code", exit_code}};
  if (e.line) rec["line"] = *e.line;
  if (e.subject) rec["subject_id"] = *e.subject;
  if (e.epoch) rec["epoch"] = *e.epoch;
  return rec.dump();
}

DatasetManifest generate_dataset(const RunConfig& config) {
  if (config.manifest.empty()) fail(ErrorKind::ConfigError, "config has no manifest path");
  DeskDatasetOptions options = config.dataset;
  options.out_dir = config.manifest.parent_path();
  auto manifest = generate_desk_dataset(options);
  if (config.manifest.filename() != "manifest.jsonl") save_manifest(manifest, config.manifest);
  return manifest;
}

DatasetManifest generate_protocol_dataset(const RunConfig& config, const EvaluationProtocol& protocol) {
  if (config.manifest.empty()) fail(ErrorKind::ConfigError, "config has no manifest path");
  protocol_expand(protocol);
  const auto requests = scenario_requests(protocol);
  auto manifest = generate_scenario_dataset(config.manifest.parent_path(), protocol.subjects, requests,
                                            config.dataset.image_size, derive_seed(config.seed, 7));
  if (config.manifest.filename() != "manifest.jsonl") save_manifest(manifest, config.manifest);
  return manifest;
}

Ensemble train_ensemble(const RunConfig& config, const CommandIo& io) {
  const DatasetManifest manifest = load_manifest(config.manifest);
  const auto train = manifest.in_split(Split::train);
  const auto val = manifest.in_split(Split::val);
  const bool has_bona = std::any_of(train.begin(), train.end(), [](const Sample& s) { return s.label == Label::bonafide; });
  const bool has_attack = std::any_of(train.begin(), train.end(), [](const Sample& s) { return s.label == Label::attack; });
  if (!has_bona || !has_attack)
    fail(ErrorKind::SingleClassTrainingSet, "train split needs both bonafide and attack samples");

  const unsigned workers = worker_count(config.workers, std::max(train.size(), config.ensemble.members.size()));
  const auto train_images = load_images(manifest, train, workers);
  const auto val_images = load_images(manifest, val, workers);
  std::vector<Label> train_labels, val_labels;
  for (const auto& s : train) train_labels.push_back(s.label);
  for (const auto& s : val) val_labels.push_back(s.label);

  const RegionExtractor extractor{&kLocator, config.ensemble.band_fraction};
  const auto& members = config.ensemble.members;
  std::vector<TrainedMember> trained(members.size());
  std::mutex log_mutex;
  parallel_for(members.size(), worker_count(config.workers, members.size()), [&](std::size_t i) {
    TrainingConfig tconfig = config.training;
    tconfig.seed = derive_seed(config.seed, 100 + i);
    AugmentationConfig aug = config.augmentation;
    aug.seed = tconfig.seed;
    const auto train_views = extract_views(train_images, train_labels, members[i], extractor);
    const auto val_views = extract_views(val_images, val_labels, members[i], extractor);
    auto on_epoch = [&](int epoch, const EpochRecord& r) {
      if (io.quiet) return;
      std::lock_guard lock(log_mutex);
      *io.err << members[i].member_id << " epoch " << epoch + 1 << "/" << tconfig.epochs << " train_loss=" << r.train_loss
              << " val_loss=" << r.val_loss << " val_acer=" << r.val_acer << std::endl;
    };
    trained[i] = train_member(members[i], tconfig, aug, train_views, val_views, on_epoch);
  });

  std::vector<MemberModel> models;
  for (auto& t : trained) models.push_back(t.model);
  Ensemble ensemble(config.ensemble, std::move(models));

  AggregationRule rule = config.ensemble.rule;
  std::string threshold_source = "config";
  if (config.threshold) {
    rule.threshold = *config.threshold;
  } else if (rule.kind == AggregationKind::majority_vote) {
    threshold_source = "default";
  } else {
    std::vector<ScoredLabel> scores(val.size());
    parallel_for(val.size(), workers, [&](std::size_t i) {
      scores[i] = {ensemble.infer(val_images[i], kLocator).decision.aggregate, val[i].label};
    });
    rule.threshold = calibrate_threshold(scores, config.calibration);
    threshold_source = "val";
  }
  ensemble.set_rule(rule);

  const auto bundle = config.bundle_dir();
  ensemble.save(bundle);
  for (std::size_t i = 0; i < trained.size(); ++i)
    write_json(bundle / members[i].member_id / "training_record.json", to_json(trained[i].record));
  write_json(bundle / "calibration.json",
             {{"threshold", rule.threshold}, {"source", threshold_source}, {"val_samples", val.size()}});
  if (!io.quiet) *io.err << "bundle written to " << bundle.string() << " (threshold " << rule.threshold << ")" << std::endl;
  return ensemble;
}

ReportDocument evaluate_ensemble(const RunConfig& config, const std::filesystem::path& bundle, const CommandIo& io) {
  const Ensemble ensemble = Ensemble::load(bundle);
  const DatasetManifest manifest = load_manifest(config.manifest);
  std::vector<Sample> samples;
  if (config.protocol) samples = resolve_protocol(load_protocol(*config.protocol), manifest);
  else samples = manifest.in_split(Split::test);
  if (samples.empty()) fail(ErrorKind::EmptyScores, "nothing to evaluate: the test split is empty");

  std::vector<ScoredSample> scored(samples.size());
  parallel_for(samples.size(), worker_count(config.workers, samples.size()), [&](std::size_t i) {
    scored[i] = {samples[i], ensemble.infer(load_image(manifest.resolve(samples[i])), kLocator).decision};
  });

  ReportDocument report = build_report(scored, ensemble.config().rule.threshold, ensemble.config().rule.kind);
  report.provenance = {"sha256:" + sha256_hex(render_run_config(config)), bundle_digest(bundle, ensemble), config.seed,
                       utc_timestamp()};
  write_report(config.report_dir(), report, scored);
  if (!io.quiet) *io.out << summarize_report(to_json(report));
  return report;
}

int cmd_generate(const RunConfig& config, bool from_protocol, const CommandIo& io) {
  return guarded(io, [&] {
    const auto manifest = from_protocol
                              ? generate_protocol_dataset(config, load_protocol(config.protocol.value_or(default_protocol_path())))
                              : generate_dataset(config);
    if (!io.quiet)
      *io.out << "wrote " << manifest.samples.size() << " samples to " << config.manifest.parent_path().string() << "\n";
    return 0;
  });
}

int cmd_train(const RunConfig& config, const CommandIo& io) {
  return guarded(io, [&] {
    train_ensemble(config, io);
    return 0;
  });
}

int cmd_evaluate(const RunConfig& config, const std::filesystem::path& bundle, const CommandIo& io) {
  return guarded(io, [&] {
    evaluate_ensemble(config, bundle, io);
    return 0;
  });
}

int cmd_infer(const InferOptions& options, const CommandIo& io) {
  auto report = [&](const Error& e, int code) {
    *io.err << error_record(e, code) << std::endl;
    return code;
  };
  std::optional<Ensemble> ensemble;
  try {
    ensemble.emplace(Ensemble::load(options.bundle));
  } catch (const Error& e) {
    return report(e, kInferBadBundle);
  }
  VideoFrames video;
  try {
    if (!std::filesystem::exists(options.input)) fail(ErrorKind::MissingFile, "input not found: " + options.input.string());
    video = load_video(options.input);
  } catch (const Error& e) {
    return report(e, kInferBadInput);
  }
  try {
    const InferenceResult result = ensemble->infer(video, kLocator);
    const auto& d = result.decision;
    *io.out << "verdict=" << to_string(d.verdict) << " aggregate=" << d.aggregate << " frame=" << result.frame_index
            << std::endl;
    if (options.json_out) {
      json members = json::object();
      for (const auto& m : d.member_scores) members[m.member_id] = m.p_bonafide;
      write_json(*options.json_out, {{"verdict", to_string(d.verdict)},
                                     {"aggregate", d.aggregate},
                                     {"frame", result.frame_index},
                                     {"threshold", d.rule_used.threshold},
                                     {"aggregation", to_string(d.rule_used.kind)},
                                     {"member_scores", members}});
    }
    return d.verdict == Label::bonafide ? 0 : kInferAttack;
  } catch (const Error& e) {
    const bool input_problem = e.kind() == ErrorKind::EmptyImage || e.kind() == ErrorKind::NoFaceFound ||
                               e.kind() == ErrorKind::InvalidFaceBox || e.kind() == ErrorKind::BoxOutOfBounds;
    return report(e, input_problem ? kInferBadInput : kInferOther);
  }
}

int cmd_explain(const ExplainOptions& options, const CommandIo& io) {
  return guarded(io, [&] {
    if (!(options.alpha >= 0.0 && options.alpha <= 1.0)) fail(ErrorKind::BadAlpha, "alpha must be in [0, 1]");
    const Ensemble ensemble = Ensemble::load(options.bundle);
    const MemberModel& member = ensemble.member(options.member_id);
    const Image frame = load_image(options.image);
    const RegionExtractor extractor{&kLocator, ensemble.config().band_fraction};
    const RegionView view = extractor(frame, member.config);
    const SaliencyMap map = grad_cam(member, view, {options.target, std::nullopt});

    const std::string stem = options.image.stem().string() + "." + member.config.member_id;
    const auto overlay_path = options.out_dir / (stem + ".overlay.png");
    const auto map_path = options.out_dir / (stem + ".map.png");
    const auto meta_path = options.out_dir / (stem + ".json");
    save_png(overlay_path, overlay_heatmap(view.pixels, map, options.alpha));
    save_png(map_path, saliency_image(map));
    write_json(meta_path, {{"member_id", member.config.member_id},
                           {"region", to_string(member.config.region)},
                           {"target", to_string(options.target)},
                           {"height", map.height},
                           {"width", map.width},
                           {"raw_max", map.raw_max},
                           {"p_bonafide", predict_member(member, view).p_bonafide},
                           {"overlay", overlay_path.filename().string()},
                           {"map", map_path.filename().string()}});
    if (!io.quiet) *io.out << overlay_path.string() << "\n" << map_path.string() << "\n";
    return 0;
  });
}

int cmd_select_frame(const SelectFrameOptions& options, const CommandIo& io) {
  try {
    options.weights.validate();
  } catch (const Error& e) {
    *io.err << error_record(e, kInferUsage) << std::endl;
    return kInferUsage;
  }
  VideoFrames video;
  try {
    if (!std::filesystem::exists(options.video)) fail(ErrorKind::MissingFile, "input not found: " + options.video.string());
    video = load_video(options.video);
    video.validate();
  } catch (const Error& e) {
    *io.err << error_record(e, kInferBadInput) << std::endl;
    return kInferBadInput;
  }
  try {
    const FrameSelection sel = select_best_frame(video, kLocator, options.weights);
    *io.out << "index=" << sel.index << " sharpness=" << sel.score.sharpness << " exposure=" << sel.score.exposure
            << " face_presence=" << sel.score.face_presence << " total=" << sel.score.total << std::endl;
    return 0;
  } catch (const Error& e) {
    *io.err << error_record(e, kInferOther) << std::endl;
    return kInferOther;
  }
}

int cmd_report(const std::filesystem::path& report_json, const CommandIo& io) {
  return guarded(io, [&] {
    json doc;
    try {
      doc = json::parse(read_file(report_json));
      *io.out << summarize_report(doc);
    } catch (const json::exception& e) {
      fail(ErrorKind::MalformedRecord, report_json.string() + ": " + e.what());
    }
    return 0;
  });
}

}  // namespace facepad
