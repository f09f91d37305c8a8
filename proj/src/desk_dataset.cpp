#include "facepad/desk_dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include "facepad/digest.hpp"
#include "facepad/error.hpp"
#include "facepad/image_io.hpp"

namespace facepad {
namespace {

constexpr double kSensorNoise = 0.02;

std::uint64_t tag_of(const std::string& s) {
  // FNV-1a; stable across platforms unlike std::hash.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

std::array<float, 3> random_color(Rng& rng, double lo, double hi) {
  return {static_cast<float>(rng.uniform(lo, hi)), static_cast<float>(rng.uniform(lo, hi)),
          static_cast<float>(rng.uniform(lo, hi))};
}

bool contains(const std::string& s, const char* needle) { return s.find(needle) != std::string::npos; }

struct Canvas {
  Image& img;

  void ellipse(double cy, double cx, double ry, double rx, const std::array<float, 3>& color,
               const std::function<double(double, double)>& shade = {}) {
    const int r0 = std::max(0, static_cast<int>(std::floor(cy - ry)));
    const int r1 = std::min(img.height - 1, static_cast<int>(std::ceil(cy + ry)));
    const int c0 = std::max(0, static_cast<int>(std::floor(cx - rx)));
    const int c1 = std::min(img.width - 1, static_cast<int>(std::ceil(cx + rx)));
    for (int r = r0; r <= r1; ++r)
      for (int c = c0; c <= c1; ++c) {
        const double dy = (r - cy) / ry, dx = (c - cx) / rx;
        if (dx * dx + dy * dy > 1.0) continue;
        const double s = shade ? shade(dy, dx) : 1.0;
        for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = static_cast<float>(color[ch] * s);
      }
  }

  void rect(double top, double left, double bottom, double right, const std::array<float, 3>& color) {
    const int r0 = std::max(0, static_cast<int>(std::lround(top)));
    const int r1 = std::min(img.height, static_cast<int>(std::lround(bottom)));
    const int c0 = std::max(0, static_cast<int>(std::lround(left)));
    const int c1 = std::min(img.width, static_cast<int>(std::lround(right)));
    for (int r = r0; r < r1; ++r)
      for (int c = c0; c < c1; ++c)
        for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = color[ch];
  }

  void frame_rect(double top, double left, double bottom, double right, double thickness,
                  const std::array<float, 3>& color) {
    rect(top, left, top + thickness, right, color);
    rect(bottom - thickness, left, bottom, right, color);
    rect(top, left, bottom, left + thickness, color);
    rect(top, right - thickness, bottom, right, color);
  }
};

}  // namespace

SubjectStyle make_subject_style(const std::string& subject_id, std::uint64_t seed) {
  Rng rng(derive_seed(seed, tag_of("subject:" + subject_id)));
  SubjectStyle s;
  const double tone = rng.uniform(0.25, 0.9);
  s.skin = {static_cast<float>(std::min(1.0, tone + 0.12)), static_cast<float>(tone * 0.8),
            static_cast<float>(tone * 0.62)};
  const double hair_level = rng.uniform(0.12, 0.6);
  s.hair = {static_cast<float>(hair_level), static_cast<float>(hair_level * 0.8), static_cast<float>(hair_level * 0.6)};
  s.clothing = random_color(rng, 0.1, 0.9);
  s.face_scale = rng.uniform(0.9, 1.1);
  s.seed = rng.next_u64();
  return s;
}

SceneStyle make_scene_style(const std::string& session, std::uint64_t seed) {
  Rng rng(derive_seed(seed, tag_of("scene:" + session)));
  SceneStyle s;
  s.backdrop_top = random_color(rng, 0.3, 0.95);
  s.backdrop_bottom = random_color(rng, 0.2, 0.85);
  s.brightness = rng.uniform(0.8, 1.1);
  if (contains(session, "outdoor") || contains(session, "natural")) s.brightness = rng.uniform(1.0, 1.15);
  if (contains(session, "artificial")) s.tint = {1.06, 1.0, 0.9};
  else s.tint = {rng.uniform(0.94, 1.06), 1.0, rng.uniform(0.94, 1.06)};
  s.spectacles = contains(session, "spectacles") || contains(session, "shades");
  s.clutter = 2 + static_cast<int>(rng.below(5));
  s.seed = rng.next_u64();
  return s;
}

void add_sensor_noise(Image& image, double sigma, Rng& rng) {
  for (float& v : image.data) v = static_cast<float>(std::clamp(v + sigma * rng.normal(), 0.0, 1.0));
}

Image render_bonafide(const SubjectStyle& subject, const SceneStyle& scene, int size, std::uint64_t frame_seed) {
  Image img(size, size, 3);
  Canvas canvas{img};
  const double S = size;
  Rng layout(derive_seed(subject.seed ^ scene.seed, 11));
  Rng jitter(derive_seed(frame_seed, 12));

  // Backdrop: vertical gradient with a soft texture, then scene clutter.
  const double fx = layout.uniform(0.05, 0.2), fy = layout.uniform(0.05, 0.2), ph = layout.uniform(0.0, 6.28);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) {
      const double t = r / std::max(1.0, S - 1);
      const double wave = 0.04 * std::sin(fx * c + fy * r + ph);
      for (int ch = 0; ch < 3; ++ch)
        img.at(r, c, ch) = static_cast<float>((1 - t) * scene.backdrop_top[ch] + t * scene.backdrop_bottom[ch] + wave);
    }
  for (int i = 0; i < scene.clutter; ++i) {
    const double top = layout.uniform(0.0, 0.8) * S, left = layout.uniform(0.0, 0.85) * S;
    canvas.rect(top, left, top + layout.uniform(0.08, 0.3) * S, left + layout.uniform(0.05, 0.25) * S,
                random_color(layout, 0.1, 0.95));
  }

  const double scale = subject.face_scale;
  const double cx = S * (0.5 + jitter.uniform(-0.03, 0.03));
  const double cy = S * (0.52 + jitter.uniform(-0.03, 0.03));
  const double rx = 0.19 * S * scale, ry = 0.25 * S * scale;

  canvas.ellipse(S * 1.08, S * 0.5, S * 0.32, S * 0.42, subject.clothing);
  canvas.rect(cy + ry * 0.6, cx - rx * 0.35, S * 0.9, cx + rx * 0.35,
              {subject.skin[0] * 0.85f, subject.skin[1] * 0.85f, subject.skin[2] * 0.85f});
  // Hair carries a strand texture; a flat occluder over it is the card_mask cue.
  const double strand = 2.0 * 3.14159265358979 / std::max(2.0, S / 40.0);
  const double hair_ry = ry * 0.85, hair_rx = rx * 1.2;
  auto strands = [&](double dy, double dx) {
    return 1.0 + 0.35 * std::sin(strand * dx * hair_rx + 2.5 * std::sin(3.0 * dy)) * (0.6 + 0.4 * std::sin(strand * 0.37 * dy * hair_ry));
  };
  canvas.ellipse(cy - ry * 0.35, cx, hair_ry, hair_rx, subject.hair, strands);
  canvas.ellipse(cy, cx, ry, rx, subject.skin, [](double dy, double dx) { return 1.0 - 0.18 * dx * dx - 0.05 * dy; });
  canvas.ellipse(cy - ry * 0.72, cx, ry * 0.3, rx * 0.95, subject.hair, [&](double dy, double dx) {
    return strands((dy * ry * 0.3 - ry * 0.37) / hair_ry, dx * rx * 0.95 / hair_rx);
  });

  const double eye_dy = cy - ry * 0.15, eye_dx = rx * 0.42;
  const std::array<float, 3> white{0.92f, 0.92f, 0.9f}, pupil{0.08f, 0.06f, 0.05f};
  for (double side : {-1.0, 1.0}) {
    canvas.ellipse(eye_dy, cx + side * eye_dx, ry * 0.07, rx * 0.2, white);
    canvas.ellipse(eye_dy, cx + side * eye_dx + jitter.uniform(-1.0, 1.0), ry * 0.065, rx * 0.08, pupil);
    canvas.rect(eye_dy - ry * 0.2, cx + side * eye_dx - rx * 0.22, eye_dy - ry * 0.14, cx + side * eye_dx + rx * 0.22,
                subject.hair);
  }
  const std::array<float, 3> shadow{subject.skin[0] * 0.75f, subject.skin[1] * 0.7f, subject.skin[2] * 0.7f};
  canvas.rect(cy - ry * 0.05, cx - rx * 0.05, cy + ry * 0.25, cx + rx * 0.05, shadow);
  canvas.ellipse(cy + ry * 0.5, cx, ry * 0.08, rx * 0.35, {0.65f, 0.2f, 0.22f});
  if (scene.spectacles) {
    for (double side : {-1.0, 1.0})
      canvas.frame_rect(eye_dy - ry * 0.14, cx + side * eye_dx - rx * 0.3, eye_dy + ry * 0.14,
                        cx + side * eye_dx + rx * 0.3, std::max(1.0, S / 64.0), {0.05f, 0.05f, 0.05f});
  }

  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c)
      for (int ch = 0; ch < 3; ++ch)
        img.at(r, c, ch) = static_cast<float>(std::clamp(img.at(r, c, ch) * scene.brightness * scene.tint[ch], 0.0, 1.0));
  Rng noise(derive_seed(frame_seed, 13));
  add_sensor_noise(img, kSensorNoise, noise);
  return img;
}

SyntheticAttackConfig sample_attack_config(AttackType kind, Rng& rng) {
  SyntheticAttackConfig cfg;
  cfg.kind = kind;
  cfg.seed = rng.next_u64();
  switch (kind) {
    case AttackType::printed_photo:
      cfg.border_fraction = rng.uniform(0.06, 0.14);
      cfg.warp_magnitude = rng.uniform(0.0, 0.04);
      break;
    case AttackType::digital_photo:
      cfg.border_fraction = rng.uniform(0.04, 0.1);
      cfg.warp_magnitude = rng.uniform(0.0, 0.03);
      break;
    case AttackType::replay:
      cfg.blur_sigma = rng.uniform(1.5, 2.5);
      cfg.moire_amplitude = rng.uniform(0.02, 0.04);
      cfg.moire_period = rng.uniform(4.0, 8.0);
      break;
    case AttackType::card_mask:
      cfg.occlusion_fraction = rng.uniform(0.32, 0.45);
      break;
  }
  return cfg;
}

namespace {

// Attacks are re-captured by the same camera as bonafide sessions.
constexpr double kCaptureNoise = kSensorNoise;

std::string subject_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "s%03d", i);
  return buf;
}

std::string image_name(const std::string& scenario, int k, const char* kind) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%s_%02d_%s.png", scenario.c_str(), k, kind);
  return buf;
}

}  // namespace

DatasetManifest generate_desk_dataset(const DeskDatasetOptions& o) {
  if (o.subjects < 1 || o.bonafide_per_subject < 1 || o.attacks_per_subject < 0 || o.image_size < 8)
    fail(ErrorKind::InvalidConfig, "desk dataset options out of range");
  const auto root = o.out_dir / "images";
  std::vector<Sample> samples;
  Rng attack_rng(derive_seed(o.seed, 21));
  for (int si = 0; si < o.subjects; ++si) {
    const std::string subject = subject_name(si);
    const SubjectStyle style = make_subject_style(subject, o.seed);
    auto render = [&](int k) {
      const std::string scenario = "scene" + std::to_string(k % 4);
      return std::pair{render_bonafide(style, make_scene_style(scenario + "/" + subject, o.seed), o.image_size,
                                       derive_seed(o.seed, tag_of(subject) + static_cast<std::uint64_t>(k))),
                       scenario};
    };
    for (int k = 0; k < o.bonafide_per_subject; ++k) {
      auto [img, scenario] = render(k);
      Sample s{subject + "/" + image_name(scenario, k, "bonafide"), Label::bonafide, std::nullopt, subject, scenario,
               Split::train};
      save_png(root / s.path, img);
      samples.push_back(std::move(s));
    }
    for (int k = 0; k < o.attacks_per_subject; ++k) {
      const AttackType kind = kAttackTypes[static_cast<std::size_t>(si + k) % kAttackTypes.size()];
      auto [source, scenario] = render(1000 + k);
      auto attack = synthesize_attack(source, sample_attack_config(kind, attack_rng),
                                      Sample{"", Label::bonafide, std::nullopt, subject, scenario, Split::train});
      add_sensor_noise(attack.image, kCaptureNoise, attack_rng);
      attack.sample.path = subject + "/" + image_name(scenario, k, std::string(to_string(kind)).c_str());
      save_png(root / attack.sample.path, attack.image);
      samples.push_back(std::move(attack.sample));
    }
  }
  DatasetManifest manifest = split_by_subject(std::move(samples), o.fractions, derive_seed(o.seed, 22), root);
  save_manifest(manifest, o.out_dir / "manifest.jsonl");
  return manifest;
}

DatasetManifest generate_scenario_dataset(const std::filesystem::path& out_dir, std::span<const std::string> subjects,
                                          std::span<const ScenarioRequest> scenarios, int image_size,
                                          std::uint64_t seed, Split split) {
  const auto root = out_dir / "images";
  std::vector<Sample> samples;
  Rng attack_rng(derive_seed(seed, 31));
  for (const auto& subject : subjects) {
    const SubjectStyle style = make_subject_style(subject, seed);
    for (const auto& sc : scenarios) {
      if (sc.label == Label::attack && !sc.attack_type)
        fail(ErrorKind::LabelTaxonomyViolation, "attack scenario '" + sc.scenario_id + "' needs an attack_type");
      const SceneStyle scene = make_scene_style(sc.scenario_id + "/" + subject, seed);
      for (int k = 0; k < sc.case_count; ++k) {
        const auto frame_seed = derive_seed(seed, tag_of(subject + "/" + sc.scenario_id) + static_cast<std::uint64_t>(k));
        Image img = render_bonafide(style, scene, image_size, frame_seed);
        Sample s{subject + "/" + image_name(sc.scenario_id, k, std::string(to_string(sc.label)).c_str()), sc.label,
                 std::nullopt, subject, sc.scenario_id, split};
        if (sc.label == Label::attack) {
          auto attack = synthesize_attack(img, sample_attack_config(*sc.attack_type, attack_rng), s);
          add_sensor_noise(attack.image, kCaptureNoise, attack_rng);
          img = std::move(attack.image);
          s = std::move(attack.sample);
        }
        save_png(root / s.path, img);
        samples.push_back(std::move(s));
      }
    }
  }
  DatasetManifest manifest{root, std::move(samples), 1};
  save_manifest(manifest, out_dir / "manifest.jsonl");
  return manifest;
}

}  // namespace facepad
