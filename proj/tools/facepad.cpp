// facepad: train, evaluate and run the face presentation-attack ensemble.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "facepad/commands.hpp"

namespace {

using facepad::CommandIo;
using facepad::Error;

std::optional<facepad::RunConfig> load_config(const std::string& path, std::optional<std::uint64_t> seed,
                                              const std::string& out, const CommandIo& io, int& code) {
  if (path.empty()) {
    *io.err << R"({"error":"ConfigError","message":"--config is required","exit_code":1})" << std::endl;
    code = 1;
    return std::nullopt;
  }
  try {
    auto config = facepad::load_run_config(path);
    if (seed) facepad::set_seed(config, *seed);
    if (!out.empty()) config.output_dir = out;
    return config;
  } catch (const Error& e) {
    code = facepad::exit_code_for(e.kind());
    *io.err << facepad::error_record(e, code) << std::endl;
    return std::nullopt;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Face presentation-attack detection ensemble"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  app.add_option("--config", config_path, "run configuration file");
  app.add_option("--seed", seed, "override the config seed");
  app.add_option("--out", out_dir, "output directory");
  app.add_flag("--quiet", quiet, "suppress progress and summaries");

  auto* generate = app.add_subcommand("generate", "render the synthetic dataset named by the config manifest");
  bool from_protocol = false;
  generate->add_flag("--protocol", from_protocol, "render the scenario protocol instead of the desk dataset");

  auto* train = app.add_subcommand("train", "train every member and write the ensemble bundle");

  auto* evaluate = app.add_subcommand("evaluate", "score the test split or protocol and write the report");
  std::string eval_bundle;
  evaluate->add_option("--bundle", eval_bundle, "bundle directory (default: <out>/bundle)");

  auto* infer = app.add_subcommand("infer", "classify one image or frame directory");
  facepad::InferOptions infer_opts;
  std::string infer_json;
  infer->add_option("bundle", infer_opts.bundle)->required();
  infer->add_option("input", infer_opts.input)->required();
  infer->add_option("--json", infer_json, "also write the decision as JSON");

  auto* explain = app.add_subcommand("explain", "Grad-CAM heatmap for one member");
  facepad::ExplainOptions explain_opts;
  std::string target = "attack";
  explain->add_option("bundle", explain_opts.bundle)->required();
  explain->add_option("image", explain_opts.image)->required();
  explain->add_option("--member", explain_opts.member_id, "member_id")->required();
  explain->add_option("--target", target, "bonafide or attack")->capture_default_str();
  explain->add_option("--alpha", explain_opts.alpha, "overlay opacity")->capture_default_str();

  auto* select = app.add_subcommand("select-frame", "pick the best-quality frame of a frame directory");
  facepad::SelectFrameOptions select_opts;
  select->add_option("video", select_opts.video)->required();

  auto* report = app.add_subcommand("report", "print the summary table of a report.json");
  std::string report_path;
  report->add_option("report", report_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const bool verdict_command = infer->parsed() || select->parsed();
    const int rc = app.exit(e);
    return rc == 0 ? 0 : (verdict_command ? facepad::kInferUsage : 1);
  }

  const CommandIo io = facepad::default_io(quiet);
  int code = 0;
  if (infer->parsed()) {
    if (!infer_json.empty()) infer_opts.json_out = infer_json;
    return facepad::cmd_infer(infer_opts, io);
  }
  if (select->parsed()) return facepad::cmd_select_frame(select_opts, io);
  if (report->parsed()) return facepad::cmd_report(report_path, io);
  if (explain->parsed()) {
    const auto t = facepad::parse_gradcam_target(target);
    if (!t) {
      std::cerr << R"({"error":"ConfigError","message":"--target must be bonafide or attack","exit_code":1})" << std::endl;
      return 1;
    }
    explain_opts.target = *t;
    if (!out_dir.empty()) explain_opts.out_dir = out_dir;
    return facepad::cmd_explain(explain_opts, io);
  }

  const auto config = load_config(config_path, seed, out_dir, io, code);
  if (!config) return code;
  if (generate->parsed()) return facepad::cmd_generate(*config, from_protocol, io);
  if (train->parsed()) return facepad::cmd_train(*config, io);
  if (evaluate->parsed())
    return facepad::cmd_evaluate(*config, eval_bundle.empty() ? config->bundle_dir() : std::filesystem::path(eval_bundle), io);
  return 1;
}
