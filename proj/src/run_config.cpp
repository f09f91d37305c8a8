#include "facepad/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "facepad/error.hpp"

namespace facepad {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* want) {
  fail(ErrorKind::ConfigError, "key '" + std::string(key) + "': expected " + want + ", got '" + std::string(value) + "'");
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) bad_value(key, v, "a number");
  return out;
}

template <typename Int>
Int to_int(std::string_view key, std::string_view v) {
  Int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) bad_value(key, v, "an integer");
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// "16x3s2" → {16, 3, 2}
ConvBlockConfig parse_block(std::string_view key, std::string_view v) {
  const auto x = v.find('x'), s = v.find('s');
  if (x == std::string_view::npos || s == std::string_view::npos || s < x) bad_value(key, v, "blocks like 16x3s2");
  return {to_int<int>(key, v.substr(0, x)), to_int<int>(key, v.substr(x + 1, s - x - 1)), to_int<int>(key, v.substr(s + 1))};
}

}  // namespace

void set_seed(RunConfig& c, std::uint64_t seed) {
  c.seed = seed;
  c.training.seed = seed;
  c.augmentation.seed = seed;
  c.dataset.seed = seed;
}

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir) {
  RunConfig c;
  std::vector<RegionKind> regions;
  for (const auto& m : c.ensemble.members) regions.push_back(m.region);
  BackboneConfig backbone = c.ensemble.members.front().backbone;
  auto path_of = [&](std::string_view v) {
    std::filesystem::path p{std::string(v)};
    return p.is_relative() && !base_dir.empty() ? (base_dir / p).lexically_normal() : p;
  };

  using Setter = std::function<void(std::string_view key, std::string_view v)>;
  const std::map<std::string, Setter, std::less<>> setters = {
      {"manifest", [&](auto, auto v) { c.manifest = path_of(v); }},
      {"output_dir", [&](auto, auto v) { c.output_dir = path_of(v); }},
      {"protocol", [&](auto, auto v) { c.protocol = path_of(v); }},
      {"seed", [&](auto k, auto v) { set_seed(c, to_int<std::uint64_t>(k, v)); }},
      {"locator",
       [&](auto k, auto v) {
         if (v != "center") bad_value(k, v, "'center'");
         c.locator = std::string(v);
       }},
      {"workers", [&](auto k, auto v) { c.workers = to_int<int>(k, v); }},
      {"members",
       [&](auto k, auto v) {
         regions.clear();
         for (auto item : split(v, ',')) {
           const auto r = parse_region_kind(item);
           if (!r) bad_value(k, item, "a region (full_frame, face, background, face_band)");
           regions.push_back(*r);
         }
       }},
      {"input_size",
       [&](auto k, auto v) {
         const auto parts = split(v, 'x');
         if (parts.size() != 2) bad_value(k, v, "HxW");
         backbone.input_height = to_int<int>(k, parts[0]);
         backbone.input_width = to_int<int>(k, parts[1]);
       }},
      {"conv_blocks",
       [&](auto k, auto v) {
         backbone.conv_blocks.clear();
         for (auto item : split(v, ',')) backbone.conv_blocks.push_back(parse_block(k, item));
       }},
      {"dense_units", [&](auto k, auto v) { backbone.dense_units = to_int<int>(k, v); }},
      {"dropout_rate", [&](auto k, auto v) { backbone.dropout_rate = to_double(k, v); }},
      {"band_fraction", [&](auto k, auto v) { c.ensemble.band_fraction = to_double(k, v); }},
      {"quality_weights",
       [&](auto k, auto v) {
         const auto parts = split(v, ',');
         if (parts.size() != 3) bad_value(k, v, "sharpness,exposure,face");
         c.ensemble.quality = {to_double(k, parts[0]), to_double(k, parts[1]), to_double(k, parts[2])};
       }},
      {"learning_rate", [&](auto k, auto v) { c.training.learning_rate = to_double(k, v); }},
      {"beta1", [&](auto k, auto v) { c.training.beta1 = to_double(k, v); }},
      {"beta2", [&](auto k, auto v) { c.training.beta2 = to_double(k, v); }},
      {"epsilon", [&](auto k, auto v) { c.training.epsilon = to_double(k, v); }},
      {"batch_size", [&](auto k, auto v) { c.training.batch_size = to_int<int>(k, v); }},
      {"epochs", [&](auto k, auto v) { c.training.epochs = to_int<int>(k, v); }},
      {"flip_probability", [&](auto k, auto v) { c.augmentation.flip_probability = to_double(k, v); }},
      {"crop_fraction", [&](auto k, auto v) { c.augmentation.crop_fraction = to_double(k, v); }},
      {"aggregation",
       [&](auto k, auto v) {
         const auto a = parse_aggregation_kind(v);
         if (!a) bad_value(k, v, "mean_probability, majority_vote or attack_veto");
         c.ensemble.rule.kind = *a;
       }},
      {"threshold",
       [&](auto k, auto v) {
         if (v == "auto") c.threshold.reset();
         else c.threshold = to_double(k, v);
       }},
      {"veto_floor", [&](auto k, auto v) { c.ensemble.rule.veto_floor = to_double(k, v); }},
      {"calibration",
       [&](auto k, auto v) {
         if (v == "min_acer") c.calibration.kind = CalibrationTarget::Kind::min_acer;
         else if (v == "bpcer_at_apcer") c.calibration.kind = CalibrationTarget::Kind::bpcer_at_apcer;
         else bad_value(k, v, "min_acer or bpcer_at_apcer");
       }},
      {"calibration_max_apcer", [&](auto k, auto v) { c.calibration.max_apcer = to_double(k, v); }},
      {"dataset_subjects", [&](auto k, auto v) { c.dataset.subjects = to_int<int>(k, v); }},
      {"dataset_bonafide_per_subject", [&](auto k, auto v) { c.dataset.bonafide_per_subject = to_int<int>(k, v); }},
      {"dataset_attacks_per_subject", [&](auto k, auto v) { c.dataset.attacks_per_subject = to_int<int>(k, v); }},
      {"dataset_image_size", [&](auto k, auto v) { c.dataset.image_size = to_int<int>(k, v); }},
      {"split_fractions",
       [&](auto k, auto v) {
         const auto parts = split(v, ',');
         if (parts.size() != 3) bad_value(k, v, "train,val,test");
         c.dataset.fractions = {to_double(k, parts[0]), to_double(k, parts[1]), to_double(k, parts[2])};
       }},
  };

  std::set<std::string, std::less<>> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    try {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos)
        fail(ErrorKind::ConfigError, "line " + std::to_string(line_no) + ": expected key = value");
      const auto key = trim(line.substr(0, eq));
      const auto value = trim(line.substr(eq + 1));
      const auto it = setters.find(key);
      if (it == setters.end())
        fail(ErrorKind::ConfigError, "line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
      if (!seen.insert(std::string(key)).second)
        fail(ErrorKind::ConfigError, "line " + std::to_string(line_no) + ": duplicate key '" + std::string(key) + "'");
      it->second(key, value);
    } catch (Error& e) {
      if (!e.line) e.line = line_no;
      throw;
    }
  }
  if (!seen.contains("seed")) fail(ErrorKind::ConfigError, "missing required key 'seed'");
  if (!seen.contains("output_dir")) c.output_dir = path_of(c.output_dir.string());

  c.ensemble.members.clear();
  for (RegionKind r : regions) c.ensemble.members.push_back({r, backbone, std::string(to_string(r))});
  c.ensemble.validate();
  c.training.validate();
  c.augmentation.validate();
  if (c.threshold && (*c.threshold < 0.0 || *c.threshold > 1.0))
    fail(ErrorKind::ConfigError, "threshold must be in [0, 1] or 'auto'");
  if (c.workers < 0) fail(ErrorKind::ConfigError, "workers must be >= 0");
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingFile, "config not found: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path.parent_path());
}

std::string render_run_config(const RunConfig& c) {
  std::ostringstream out;
  const auto& b = c.ensemble.members.front().backbone;
  out << "manifest = " << c.manifest.string() << "\n";
  out << "output_dir = " << c.output_dir.string() << "\n";
  if (c.protocol) out << "protocol = " << c.protocol->string() << "\n";
  out << "seed = " << c.seed << "\n";
  out << "locator = " << c.locator << "\n";
  out << "workers = " << c.workers << "\n";
  out << "members = ";
  for (std::size_t i = 0; i < c.ensemble.members.size(); ++i)
    out << (i ? "," : "") << to_string(c.ensemble.members[i].region);
  out << "\ninput_size = " << b.input_height << "x" << b.input_width << "\nconv_blocks = ";
  for (std::size_t i = 0; i < b.conv_blocks.size(); ++i) {
    const auto& blk = b.conv_blocks[i];
    out << (i ? "," : "") << blk.out_channels << "x" << blk.kernel_size << "s" << blk.stride;
  }
  out << "\ndense_units = " << b.dense_units << "\n";
  out << "dropout_rate = " << fmt(b.dropout_rate) << "\n";
  out << "band_fraction = " << fmt(c.ensemble.band_fraction) << "\n";
  out << "quality_weights = " << fmt(c.ensemble.quality.sharpness) << "," << fmt(c.ensemble.quality.exposure) << ","
      << fmt(c.ensemble.quality.face) << "\n";
  out << "learning_rate = " << fmt(c.training.learning_rate) << "\n";
  out << "beta1 = " << fmt(c.training.beta1) << "\n";
  out << "beta2 = " << fmt(c.training.beta2) << "\n";
  out << "epsilon = " << fmt(c.training.epsilon) << "\n";
  out << "batch_size = " << c.training.batch_size << "\n";
  out << "epochs = " << c.training.epochs << "\n";
  out << "flip_probability = " << fmt(c.augmentation.flip_probability) << "\n";
  out << "crop_fraction = " << fmt(c.augmentation.crop_fraction) << "\n";
  out << "aggregation = " << to_string(c.ensemble.rule.kind) << "\n";
  out << "threshold = " << (c.threshold ? fmt(*c.threshold) : std::string("auto")) << "\n";
  out << "veto_floor = " << fmt(c.ensemble.rule.veto_floor) << "\n";
  out << "calibration = "
      << (c.calibration.kind == CalibrationTarget::Kind::min_acer ? "min_acer" : "bpcer_at_apcer") << "\n";
  out << "calibration_max_apcer = " << fmt(c.calibration.max_apcer) << "\n";
  out << "dataset_subjects = " << c.dataset.subjects << "\n";
  out << "dataset_bonafide_per_subject = " << c.dataset.bonafide_per_subject << "\n";
  out << "dataset_attacks_per_subject = " << c.dataset.attacks_per_subject << "\n";
  out << "dataset_image_size = " << c.dataset.image_size << "\n";
  out << "split_fractions = " << fmt(c.dataset.fractions.train) << "," << fmt(c.dataset.fractions.val) << ","
      << fmt(c.dataset.fractions.test) << "\n";
  return out.str();
}

}  // namespace facepad
