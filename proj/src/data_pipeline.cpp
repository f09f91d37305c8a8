#include "facepad/data_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "facepad/error.hpp"

namespace facepad {

using nlohmann::json;

std::string_view to_string(AttackType t) {
  switch (t) {
    case AttackType::printed_photo: return "printed_photo";
    case AttackType::digital_photo: return "digital_photo";
    case AttackType::replay: return "replay";
    case AttackType::card_mask: return "card_mask";
  }
  return "unknown";
}

std::string_view to_string(Label l) { return l == Label::bonafide ? "bonafide" : "attack"; }

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "unknown";
}

std::optional<AttackType> parse_attack_type(std::string_view s) {
  for (AttackType t : kAttackTypes)
    if (to_string(t) == s) return t;
  return std::nullopt;
}

std::optional<Label> parse_label(std::string_view s) {
  if (s == "bonafide") return Label::bonafide;
  if (s == "attack") return Label::attack;
  return std::nullopt;
}

std::optional<Split> parse_split(std::string_view s) {
  for (Split v : {Split::train, Split::val, Split::test})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

std::vector<Sample> DatasetManifest::in_split(Split s) const {
  std::vector<Sample> out;
  std::copy_if(samples.begin(), samples.end(), std::back_inserter(out),
               [s](const Sample& x) { return x.split == s; });
  return out;
}

namespace {

bool path_stays_under_root(const std::string& p) {
  const std::filesystem::path path(p);
  if (p.empty() || path.is_absolute() || path.has_root_name()) return false;
  const auto norm = path.lexically_normal();
  return !norm.empty() && *norm.begin() != "..";
}

[[noreturn]] void malformed(long line, const std::string& why) {
  Error e(ErrorKind::MalformedRecord, "line " + std::to_string(line) + ": " + why);
  e.line = line;
  throw e;
}

void check_sample(const Sample& s, long line) {
  if (!path_stays_under_root(s.path)) malformed(line, "path must be non-empty and stay under the root: '" + s.path + "'");
  if ((s.label == Label::attack) != s.attack_type.has_value())
    fail(ErrorKind::LabelTaxonomyViolation,
         "sample '" + s.path + "': attack_type must be present exactly when label is attack");
}

Sample parse_sample(const std::string& text, long line) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    malformed(line, e.what());
  }
  if (!j.is_object()) malformed(line, "expected a JSON object");
  auto str = [&](const char* key) -> std::string {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) malformed(line, std::string("missing string field '") + key + "'");
    return it->get<std::string>();
  };
  Sample s;
  s.path = str("path");
  const auto label = parse_label(str("label"));
  if (!label) malformed(line, "label must be bonafide or attack");
  s.label = *label;
  if (auto it = j.find("attack_type"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) malformed(line, "attack_type must be a string");
    const auto t = parse_attack_type(it->get<std::string>());
    if (!t) malformed(line, "unknown attack_type '" + it->get<std::string>() + "'");
    s.attack_type = t;
  }
  s.subject_id = str("subject_id");
  s.scenario_id = str("scenario_id");
  const auto split = parse_split(str("split"));
  if (!split) malformed(line, "split must be train, val or test");
  s.split = *split;
  return s;
}

void check_collection(const std::vector<Sample>& samples) {
  std::set<std::string> paths;
  std::map<std::string, Split> subject_split;
  for (const Sample& s : samples) {
    if (!paths.insert(std::filesystem::path(s.path).lexically_normal().string()).second)
      fail(ErrorKind::DuplicatePath, "duplicate sample path '" + s.path + "'");
    auto [it, inserted] = subject_split.emplace(s.subject_id, s.split);
    if (!inserted && it->second != s.split) {
      Error e(ErrorKind::SplitLeakage, "subject '" + s.subject_id + "' appears in more than one split");
      e.subject = s.subject_id;
      throw e;
    }
  }
}

std::filesystem::path normalized(const std::filesystem::path& p) {
  auto n = p.lexically_normal();
  if (!n.has_filename() && n.has_parent_path() && n != n.root_path()) n = n.parent_path();
  return n;
}

}  // namespace

void validate_manifest(const DatasetManifest& manifest) {
  for (std::size_t i = 0; i < manifest.samples.size(); ++i)
    check_sample(manifest.samples[i], static_cast<long>(i) + 2);
  check_collection(manifest.samples);
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingFile, "manifest not found: " + path.string());

  DatasetManifest manifest;
  std::string text;
  long line = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (!have_header) {
      json h;
      try {
        h = json::parse(text);
      } catch (const json::parse_error& e) {
        malformed(line, e.what());
      }
      if (!h.is_object() || !h.contains("version") || !h["version"].is_number_integer() ||
          !h.contains("root") || !h["root"].is_string())
        malformed(line, "header must be {\"version\": 1, \"root\": \"<dir>\"}");
      manifest.version = h["version"].get<int>();
      if (manifest.version != 1) malformed(line, "unsupported manifest version");
      std::filesystem::path root = h["root"].get<std::string>();
      if (root.is_relative()) root = path.parent_path() / root;
      manifest.root = normalized(root);
      have_header = true;
      continue;
    }
    Sample s = parse_sample(text, line);
    check_sample(s, line);
    manifest.samples.push_back(std::move(s));
  }
  if (!have_header) malformed(line + 1, "missing header line");
  check_collection(manifest.samples);
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  validate_manifest(manifest);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorKind::IoError, "cannot write manifest " + path.string());

  // Roots inside the manifest's directory are stored relative so the dataset
  // directory can be moved as a unit; anything else is stored absolute.
  const auto abs_root = normalized(std::filesystem::absolute(manifest.root));
  const auto base = normalized(std::filesystem::absolute(path).parent_path());
  const auto rel = abs_root.lexically_relative(base);
  std::string root = abs_root.string();
  if (!rel.empty() && *rel.begin() != "..") root = rel.string();
  out << json{{"version", manifest.version}, {"root", root}}.dump() << '\n';
  for (const Sample& s : manifest.samples) {
    json j = {{"path", s.path},
              {"label", to_string(s.label)},
              {"subject_id", s.subject_id},
              {"scenario_id", s.scenario_id},
              {"split", to_string(s.split)}};
    if (s.attack_type) j["attack_type"] = to_string(*s.attack_type);
    out << j.dump() << '\n';
  }
  if (!out) fail(ErrorKind::IoError, "short write on manifest " + path.string());
}

std::array<std::size_t, 3> split_sizes(std::size_t n, SplitFractions f) {
  const std::array<double, 3> frac = {f.train, f.val, f.test};
  for (double x : frac)
    if (!(x >= 0.0) || !std::isfinite(x)) fail(ErrorKind::BadFractions, "fractions must be nonnegative");
  if (std::abs(frac[0] + frac[1] + frac[2] - 1.0) > 1e-9)
    fail(ErrorKind::BadFractions, "fractions must sum to 1");
  const auto nonzero = static_cast<std::size_t>(std::count_if(frac.begin(), frac.end(), [](double x) { return x > 0; }));
  if (n < nonzero)
    fail(ErrorKind::TooFewSubjects,
         std::to_string(n) + " subjects cannot fill " + std::to_string(nonzero) + " nonempty splits");

  // Largest-remainder apportionment, ties to the earlier split.
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = frac[i] * static_cast<double>(n);
    sizes[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    rem[i] = exact - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  while (assigned < n) {
    int best = -1;
    for (int i = 0; i < 3; ++i)
      if (frac[i] > 0 && (best < 0 || rem[i] > rem[best])) best = i;
    ++sizes[best];
    rem[best] = -1.0;
    ++assigned;
  }
  // Every nonzero fraction gets at least one subject, taken from the largest split.
  for (int i = 0; i < 3; ++i) {
    if (frac[i] > 0 && sizes[i] == 0) {
      const auto donor = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
      --sizes[donor];
      ++sizes[i];
    }
  }
  return sizes;
}

DatasetManifest split_by_subject(std::vector<Sample> samples, SplitFractions fractions,
                                 std::uint64_t seed, std::filesystem::path root) {
  std::vector<std::string> subjects;
  for (const Sample& s : samples) subjects.push_back(s.subject_id);
  std::sort(subjects.begin(), subjects.end());
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());

  const auto sizes = split_sizes(subjects.size(), fractions);
  Rng rng(seed);
  rng.shuffle(std::span(subjects));

  std::map<std::string, Split> assignment;
  std::size_t k = 0;
  const std::array<Split, 3> order = {Split::train, Split::val, Split::test};
  for (int part = 0; part < 3; ++part)
    for (std::size_t i = 0; i < sizes[part]; ++i) assignment[subjects[k++]] = order[part];

  for (Sample& s : samples) s.split = assignment.at(s.subject_id);
  DatasetManifest manifest{std::move(root), std::move(samples), 1};
  validate_manifest(manifest);
  return manifest;
}

// ---------------------------------------------------------------------------

void AugmentationConfig::validate() const {
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0))
    fail(ErrorKind::InvalidConfig, "flip_probability must lie in [0,1]");
  if (!(crop_fraction > 0.0 && crop_fraction <= 1.0))
    fail(ErrorKind::InvalidConfig, "crop_fraction must lie in (0,1]");
}

int AugmentationConfig::crop_side(int side) const {
  return std::max(1, static_cast<int>(std::lround(crop_fraction * side)));
}

Image augment_flip(const Image& image, const AugmentationConfig& config, double draw) {
  if (image.empty()) fail(ErrorKind::EmptyImage, "augment_flip on empty image");
  return draw < config.flip_probability ? flip_horizontal(image) : image;
}

Image augment_crop(const Image& image, const AugmentationConfig& config, CropOffset offset) {
  if (image.empty()) fail(ErrorKind::EmptyImage, "augment_crop on empty image");
  const int h = config.crop_side(image.height);
  const int w = config.crop_side(image.width);
  if (offset.row < 0 || offset.col < 0 || offset.row + h > image.height || offset.col + w > image.width)
    fail(ErrorKind::CropOutOfBounds, "crop " + std::to_string(h) + "x" + std::to_string(w) + " at (" +
                                         std::to_string(offset.row) + "," + std::to_string(offset.col) +
                                         ") leaves the image");
  return crop(image, offset.row, offset.col, h, w);
}

Augmenter::Augmenter(const AugmentationConfig& config, std::uint64_t stream)
    : config_(config), rng_(derive_seed(config.seed, stream)) {
  config_.validate();
}

Image Augmenter::operator()(const Image& image) {
  const double draw = rng_.uniform();
  Image out = augment_flip(image, config_, draw);
  const int h = config_.crop_side(image.height);
  const int w = config_.crop_side(image.width);
  const CropOffset offset{static_cast<int>(rng_.below(static_cast<std::uint64_t>(image.height - h + 1))),
                          static_cast<int>(rng_.below(static_cast<std::uint64_t>(image.width - w + 1)))};
  out = augment_crop(out, config_, offset);
  if (out.height != image.height || out.width != image.width)
    out = resize_bilinear(out, image.height, image.width);
  return out;
}

// ---------------------------------------------------------------------------

void SyntheticAttackConfig::validate() const {
  if (!(border_fraction >= 0.0 && border_fraction <= 0.4))
    fail(ErrorKind::InvalidConfig, "border_fraction must lie in [0, 0.4]");
  if (!(blur_sigma >= 0.0) || !std::isfinite(blur_sigma)) fail(ErrorKind::InvalidConfig, "blur_sigma must be >= 0");
  if (!(occlusion_fraction >= 0.0 && occlusion_fraction <= 1.0))
    fail(ErrorKind::InvalidConfig, "occlusion_fraction must lie in [0, 1]");
  if (!(warp_magnitude >= 0.0) || !std::isfinite(warp_magnitude))
    fail(ErrorKind::InvalidConfig, "warp_magnitude must be >= 0");
  if (!(moire_amplitude >= 0.0) || !std::isfinite(moire_amplitude))
    fail(ErrorKind::InvalidConfig, "moire_amplitude must be >= 0");
  if (!(moire_period > 0.0) || !std::isfinite(moire_period))
    fail(ErrorKind::InvalidConfig, "moire_period must be > 0");
}

int attack_margin(int side, double border_fraction) {
  return static_cast<int>(std::lround(border_fraction * side));
}

namespace {

// Projective map from the unit square onto a quadrilateral (corners listed
// clockwise from (0,0)), and its inverse for backward sampling.
class QuadMap {
 public:
  QuadMap(const std::array<double, 4>& xs, const std::array<double, 4>& ys) {
    const double sx = xs[0] - xs[1] + xs[2] - xs[3];
    const double sy = ys[0] - ys[1] + ys[2] - ys[3];
    double g = 0.0, h = 0.0;
    if (sx != 0.0 || sy != 0.0) {
      const double dx1 = xs[1] - xs[2], dx2 = xs[3] - xs[2];
      const double dy1 = ys[1] - ys[2], dy2 = ys[3] - ys[2];
      const double den = dx1 * dy2 - dx2 * dy1;
      g = (sx * dy2 - dx2 * sy) / den;
      h = (dx1 * sy - sx * dy1) / den;
    }
    const double a = xs[1] - xs[0] + g * xs[1], b = xs[3] - xs[0] + h * xs[3], c = xs[0];
    const double d = ys[1] - ys[0] + g * ys[1], e = ys[3] - ys[0] + h * ys[3], f = ys[0];
    // Adjugate of [[a b c][d e f][g h 1]].
    inv_ = {e - f * h, c * h - b,     b * f - c * e,
            f * g - d, a - c * g,     c * d - a * f,
            d * h - e * g, b * g - a * h, a * e - b * d};
  }

  // Returns (u, v) for canvas point (x, y).
  std::pair<double, double> unmap(double x, double y) const {
    const double u = inv_[0] * x + inv_[1] * y + inv_[2];
    const double v = inv_[3] * x + inv_[4] * y + inv_[5];
    const double w = inv_[6] * x + inv_[7] * y + inv_[8];
    return {u / w, v / w};
  }

 private:
  std::array<double, 9> inv_{};
};

double sample_bilinear(const Image& src, double x, double y, int ch) {
  x = std::clamp(x, 0.0, src.width - 1.0);
  y = std::clamp(y, 0.0, src.height - 1.0);
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, src.width - 1), y1 = std::min(y0 + 1, src.height - 1);
  const double fx = x - x0, fy = y - y0;
  const double top = (1 - fx) * src.at(y0, x0, ch) + fx * src.at(y0, x1, ch);
  const double bottom = (1 - fx) * src.at(y1, x0, ch) + fx * src.at(y1, x1, ch);
  return (1 - fy) * top + fy * bottom;
}

// Pastes `source` into the inner rectangle left by `margin` pixels on each
// side, through a perspective warp whose corners only move inward so the
// margin keeps the canvas colour.
Image paste_warped(const Image& source, const std::array<float, 3>& canvas_color, double border_fraction,
                   double warp, Rng& rng) {
  const int H = source.height, W = source.width, C = source.channels;
  Image out(H, W, C);
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c)
      for (int ch = 0; ch < C; ++ch) out.at(r, c, ch) = canvas_color[std::min(ch, 2)];

  const int my = attack_margin(H, border_fraction), mx = attack_margin(W, border_fraction);
  const int ih = H - 2 * my, iw = W - 2 * mx;
  if (ih < 2 || iw < 2) return out;

  const double left = mx, right = mx + iw - 1.0, top = my, bottom = my + ih - 1.0;
  const double frac = std::min(warp, 0.45);
  const double jx = frac * (iw - 1), jy = frac * (ih - 1);
  auto jitter = [&](double amount) { return amount * rng.uniform(); };
  const std::array<double, 4> xs = {left + jitter(jx), right - jitter(jx), right - jitter(jx), left + jitter(jx)};
  const std::array<double, 4> ys = {top + jitter(jy), top + jitter(jy), bottom - jitter(jy), bottom - jitter(jy)};
  const QuadMap map(xs, ys);

  constexpr double kEps = 1e-9;
  for (int r = my; r < my + ih; ++r)
    for (int c = mx; c < mx + iw; ++c) {
      const auto [u, v] = map.unmap(c, r);
      if (u < -kEps || u > 1 + kEps || v < -kEps || v > 1 + kEps) continue;
      for (int ch = 0; ch < C; ++ch)
        out.at(r, c, ch) = static_cast<float>(sample_bilinear(source, u * (W - 1), v * (H - 1), ch));
    }
  return out;
}

}  // namespace

SynthesizedAttack synthesize_attack(const Image& source, const SyntheticAttackConfig& config,
                                    const Sample& source_sample) {
  config.validate();
  if (source.empty()) fail(ErrorKind::EmptyImage, "synthesize_attack on empty source");

  Rng rng(config.seed);
  SynthesizedAttack result;
  switch (config.kind) {
    case AttackType::printed_photo:
      result.image = paste_warped(source, {1.0f, 1.0f, 1.0f}, config.border_fraction, config.warp_magnitude, rng);
      break;
    case AttackType::digital_photo:
      result.image = paste_warped(source, {0.04f, 0.04f, 0.05f}, config.border_fraction, config.warp_magnitude, rng);
      break;
    case AttackType::replay: {
      Image out = gaussian_blur(source, config.blur_sigma);
      const double theta = rng.uniform(0.0, std::numbers::pi);
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double kx = std::cos(theta) * 2.0 * std::numbers::pi / config.moire_period;
      const double ky = std::sin(theta) * 2.0 * std::numbers::pi / config.moire_period;
      for (int r = 0; r < out.height; ++r)
        for (int c = 0; c < out.width; ++c) {
          const double delta = config.moire_amplitude * std::sin(kx * c + ky * r + phase);
          for (int ch = 0; ch < out.channels; ++ch)
            out.at(r, c, ch) = static_cast<float>(std::clamp(out.at(r, c, ch) + delta, 0.0, 1.0));
        }
      result.image = std::move(out);
      break;
    }
    case AttackType::card_mask: {
      Image out = source;
      const int rows = static_cast<int>(std::lround(config.occlusion_fraction * source.height));
      std::array<float, 3> patch{};
      for (float& v : patch) v = static_cast<float>(rng.uniform(0.25, 0.9));
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < out.width; ++c)
          for (int ch = 0; ch < out.channels; ++ch) out.at(r, c, ch) = patch[std::min(ch, 2)];
      result.image = std::move(out);
      break;
    }
  }
  result.sample = source_sample;
  result.sample.label = Label::attack;
  result.sample.attack_type = config.kind;
  return result;
}

}  // namespace facepad
