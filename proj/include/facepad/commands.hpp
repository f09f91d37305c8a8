#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "facepad/ensemble.hpp"
#include "facepad/error.hpp"
#include "facepad/explain.hpp"
#include "facepad/protocol.hpp"
#include "facepad/report.hpp"
#include "facepad/run_config.hpp"

namespace facepad {

struct CommandIo {
  std::ostream* out;
  std::ostream* err;
  bool quiet = false;
};

CommandIo default_io(bool quiet = false);

// Exit codes for generate/train/evaluate/explain/report:
//   1 usage or config   2 missing file      3 invalid manifest
//   4 single-class data 5 non-finite loss   6 checkpoint or bundle
//   7 image or region   8 protocol          9 anything else
int exit_code_for(ErrorKind kind);

// infer and select-frame: 0 bonafide, 10 attack, 11 usage, 12 unreadable
// input, 13 bundle, 14 anything else.
inline constexpr int kInferAttack = 10;
inline constexpr int kInferUsage = 11;
inline constexpr int kInferBadInput = 12;
inline constexpr int kInferBadBundle = 13;
inline constexpr int kInferOther = 14;

// One JSON object: {"error": kind, "message": ..., "exit_code": n, ...}.
std::string error_record(const Error& e, int exit_code);

// Library entry points; these throw facepad::Error.
DatasetManifest generate_dataset(const RunConfig& config);
DatasetManifest generate_protocol_dataset(const RunConfig& config, const EvaluationProtocol& protocol);
Ensemble train_ensemble(const RunConfig& config, const CommandIo& io);
ReportDocument evaluate_ensemble(const RunConfig& config, const std::filesystem::path& bundle, const CommandIo& io);

// Command wrappers: run, report errors on io.err, return an exit code.
int cmd_generate(const RunConfig& config, bool from_protocol, const CommandIo& io);
int cmd_train(const RunConfig& config, const CommandIo& io);
int cmd_evaluate(const RunConfig& config, const std::filesystem::path& bundle, const CommandIo& io);

struct InferOptions {
  std::filesystem::path bundle;
  std::filesystem::path input;  // image file or directory of frame_*.png
  std::optional<std::filesystem::path> json_out;
};
int cmd_infer(const InferOptions& options, const CommandIo& io);

struct ExplainOptions {
  std::filesystem::path bundle;
  std::filesystem::path image;
  std::string member_id;
  GradCamTarget target = GradCamTarget::attack_score;
  double alpha = 0.5;
  std::filesystem::path out_dir = ".";
};
int cmd_explain(const ExplainOptions& options, const CommandIo& io);

struct SelectFrameOptions {
  std::filesystem::path video;
  QualityWeights weights;
};
int cmd_select_frame(const SelectFrameOptions& options, const CommandIo& io);

int cmd_report(const std::filesystem::path& report_json, const CommandIo& io);

}  // namespace facepad
