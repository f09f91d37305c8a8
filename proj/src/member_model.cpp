#include "facepad/member_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>

#include "facepad/digest.hpp"
#include "facepad/error.hpp"
#include "facepad/image_io.hpp"
#include "facepad/metrics.hpp"

namespace facepad {

using nlohmann::json;

void TrainingConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail(ErrorKind::InvalidConfig, "learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) fail(ErrorKind::InvalidConfig, "beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) fail(ErrorKind::InvalidConfig, "beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0)) fail(ErrorKind::InvalidConfig, "epsilon must be > 0");
  if (batch_size < 1) fail(ErrorKind::InvalidConfig, "batch_size must be positive");
  if (epochs < 1) fail(ErrorKind::InvalidConfig, "epochs must be positive");
}

double sigmoid(double logit) {
  if (logit >= 0.0) return 1.0 / (1.0 + std::exp(-logit));
  const double e = std::exp(logit);
  return e / (1.0 + e);
}

double bce_loss(double p, int y) {
  const double q = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  return y == 1 ? -std::log(q) : -std::log(1.0 - q);
}

ModelParameters build_model(const MemberConfig& config, std::uint64_t seed) {
  const Network net(config.backbone);
  const auto w = net.initialize(seed);
  return {config.backbone, {w.begin(), w.end()}};
}

AdamOptimizer::AdamOptimizer(std::size_t n, const TrainingConfig& config) : cfg_(config), m_(n, 0.0), v_(n, 0.0) {}

void AdamOptimizer::step(std::span<double> w, std::span<const double> g) {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < w.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
    const double mhat = m_[i] / c1;
    const double vhat = v_[i] / c2;
    w[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
  }
}

namespace {

int target_of(Label l) { return l == Label::bonafide ? 1 : 0; }

void check_view_shape(const BackboneConfig& b, const Image& img) {
  if (img.height != b.input_height || img.width != b.input_width || img.channels != b.input_channels)
    fail(ErrorKind::ShapeMismatch, "view is " + std::to_string(img.height) + "x" + std::to_string(img.width) + "x" +
                                       std::to_string(img.channels) + ", member expects " +
                                       std::to_string(b.input_height) + "x" + std::to_string(b.input_width) + "x" +
                                       std::to_string(b.input_channels));
}

EpochRecord evaluate_split(const Network& net, std::span<const double> w, std::span<const LabeledView> views,
                           double train_loss) {
  EpochRecord rec{train_loss, 0.0, 0.0};
  if (views.empty()) return rec;
  Network::Trace trace;
  std::vector<ScoredLabel> scored;
  double loss = 0.0;
  for (const auto& v : views) {
    const double p = sigmoid(net.forward(w, to_planar(v.pixels), trace));
    loss += bce_loss(p, target_of(v.label));
    scored.push_back({p, v.label});
  }
  rec.val_loss = loss / static_cast<double>(views.size());
  const auto c = confusion_from_scores(scored, 0.5);
  if (c.attack_total() > 0 && c.bonafide_total() > 0)
    rec.val_acer = acer(apcer(c), bpcer(c));
  else
    rec.val_acer = c.attack_total() > 0 ? apcer(c) : bpcer(c);
  return rec;
}

}  // namespace

TrainedMember train_member(const MemberConfig& config, const TrainingConfig& tconfig,
                           const AugmentationConfig& augmentation, std::span<const LabeledView> train,
                           std::span<const LabeledView> val, const EpochCallback& on_epoch) {
  tconfig.validate();
  augmentation.validate();
  const Network net(config.backbone);
  const bool has_bona = std::any_of(train.begin(), train.end(), [](const auto& v) { return v.label == Label::bonafide; });
  const bool has_attack = std::any_of(train.begin(), train.end(), [](const auto& v) { return v.label == Label::attack; });
  if (!has_bona || !has_attack)
    fail(ErrorKind::SingleClassTrainingSet, "member '" + config.member_id + "': training split needs both labels");
  for (const auto& v : train) check_view_shape(config.backbone, v.pixels);
  for (const auto& v : val) check_view_shape(config.backbone, v.pixels);

  const ModelParameters initial = build_model(config, tconfig.seed);
  std::vector<double> w = initial.widened();
  std::vector<double> grad(w.size());
  AdamOptimizer adam(w.size(), tconfig);

  Rng order_rng(derive_seed(tconfig.seed, 1));
  Rng dropout_rng(derive_seed(tconfig.seed, 2));
  Augmenter augment(augmentation, tconfig.seed);
  Network::Trace trace;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainedMember result;
  for (int epoch = 0; epoch < tconfig.epochs; ++epoch) {
    order_rng.shuffle(std::span(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tconfig.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(tconfig.batch_size));
      const double scale = 1.0 / static_cast<double>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const LabeledView& sample = train[order[i]];
        const Image augmented = augment(sample.pixels);
        const double logit = net.forward(w, to_planar(augmented), trace, &dropout_rng);
        const double p = sigmoid(logit);
        const int y = target_of(sample.label);
        batch_loss += bce_loss(p, y);
        net.backward(w, trace, (p - y) * scale, grad);
      }
      if (!std::isfinite(batch_loss) || !std::isfinite(std::accumulate(grad.begin(), grad.end(), 0.0))) {
        Error e(ErrorKind::NonFiniteLoss, "member '" + config.member_id + "' diverged in epoch " + std::to_string(epoch));
        e.epoch = epoch;
        throw e;
      }
      adam.step(w, grad);
      epoch_loss += batch_loss;
    }
    const EpochRecord rec = evaluate_split(net, w, val, epoch_loss / static_cast<double>(train.size()));
    result.record.epochs.push_back(rec);
    if (on_epoch) on_epoch(epoch, rec);
  }
  result.model.config = config;
  result.model.params = {config.backbone, {w.begin(), w.end()}};
  return result;
}

RegionView RegionExtractor::operator()(const Image& frame, const MemberConfig& member) const {
  static const CenterBoxLocator fallback;
  const FaceBox box = locate_face(locator != nullptr ? *locator : fallback, frame);
  return extract_region(frame, box, member.region, member.backbone.input_height, member.backbone.input_width,
                        band_fraction);
}

std::vector<LabeledView> extract_views(std::span<const Image> frames, std::span<const Label> labels,
                                       const MemberConfig& member, const RegionExtractor& extractor) {
  std::vector<LabeledView> out;
  out.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) out.push_back({extractor(frames[i], member).pixels, labels[i]});
  return out;
}

TrainedMember train_member(const MemberConfig& config, const TrainingConfig& tconfig,
                           const AugmentationConfig& augmentation, const DatasetManifest& manifest,
                           const RegionExtractor& extractor, const EpochCallback& on_epoch) {
  auto views_for = [&](Split split) {
    std::vector<Image> frames;
    std::vector<Label> labels;
    for (const Sample& s : manifest.in_split(split)) {
      frames.push_back(load_image(manifest.resolve(s)));
      labels.push_back(s.label);
    }
    return extract_views(frames, labels, config, extractor);
  };
  const auto train = views_for(Split::train);
  const auto val = views_for(Split::val);
  return train_member(config, tconfig, augmentation, train, val, on_epoch);
}

double predict_logit(const ModelParameters& params, const Image& pixels) {
  check_view_shape(params.backbone, pixels);
  const Network net(params.backbone);
  if (params.values.size() != net.parameter_count())
    fail(ErrorKind::ShapeMismatch, "parameter buffer does not match the backbone");
  Network::Trace trace;
  return net.forward(params.widened(), to_planar(pixels), trace);
}

MemberScore predict_member(const MemberModel& model, const RegionView& view) {
  if (view.kind != model.config.region)
    fail(ErrorKind::ConfigMismatch, "member '" + model.config.member_id + "' expects region " +
                                        std::string(to_string(model.config.region)) + ", got " +
                                        std::string(to_string(view.kind)));
  return {model.config.member_id, sigmoid(predict_logit(model.params, view.pixels))};
}

// ---------------------------------------------------------------------------
// Serialization

json to_json(const BackboneConfig& b) {
  json blocks = json::array();
  for (const auto& c : b.conv_blocks)
    blocks.push_back({{"out_channels", c.out_channels}, {"kernel_size", c.kernel_size}, {"stride", c.stride}});
  return {{"input_height", b.input_height}, {"input_width", b.input_width}, {"input_channels", b.input_channels},
          {"conv_blocks", blocks},          {"dense_units", b.dense_units}, {"dropout_rate", b.dropout_rate}};
}

BackboneConfig backbone_from_json(const json& j) {
  BackboneConfig b;
  b.input_height = j.at("input_height").get<int>();
  b.input_width = j.at("input_width").get<int>();
  b.input_channels = j.at("input_channels").get<int>();
  b.conv_blocks.clear();
  for (const auto& c : j.at("conv_blocks"))
    b.conv_blocks.push_back({c.at("out_channels").get<int>(), c.at("kernel_size").get<int>(), c.at("stride").get<int>()});
  b.dense_units = j.at("dense_units").get<int>();
  b.dropout_rate = j.at("dropout_rate").get<double>();
  return b;
}

json to_json(const MemberConfig& m) {
  return {{"member_id", m.member_id}, {"region", to_string(m.region)}, {"backbone", to_json(m.backbone)}};
}

MemberConfig member_from_json(const json& j) {
  MemberConfig m;
  m.member_id = j.at("member_id").get<std::string>();
  const auto region = parse_region_kind(j.at("region").get<std::string>());
  if (!region) throw std::invalid_argument("unknown region '" + j.at("region").get<std::string>() + "'");
  m.region = *region;
  m.backbone = backbone_from_json(j.at("backbone"));
  return m;
}

json to_json(const TrainingRecord& r) {
  json epochs = json::array();
  for (const auto& e : r.epochs)
    epochs.push_back({{"train_loss", e.train_loss}, {"val_loss", e.val_loss}, {"val_acer", e.val_acer}});
  return {{"epochs", epochs}};
}

namespace {

std::vector<unsigned char> encode_weights(std::span<const float> values) {
  std::vector<unsigned char> bytes;
  bytes.reserve(values.size() * 4);
  for (float v : values) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int k = 0; k < 4; ++k) bytes.push_back(static_cast<unsigned char>((bits >> (8 * k)) & 0xFFu));
  }
  return bytes;
}

std::vector<float> decode_weights(std::span<const unsigned char> bytes) {
  std::vector<float> values(bytes.size() / 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(bytes[i * 4 + k]) << (8 * k);
    values[i] = std::bit_cast<float>(bits);
  }
  return values;
}

}  // namespace

void save_checkpoint(const MemberModel& model, const std::filesystem::path& dir) {
  const Network net(model.params.backbone);
  if (model.params.values.size() != net.parameter_count())
    fail(ErrorKind::ShapeMismatch, "parameter buffer does not match the backbone");
  if (!(model.params.backbone == model.config.backbone))
    fail(ErrorKind::ConfigMismatch, "parameters were built for a different backbone");
  std::filesystem::create_directories(dir);
  const auto bytes = encode_weights(model.params.values);
  {
    std::ofstream out(dir / "weights.bin", std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::IoError, "cannot write " + (dir / "weights.bin").string());
  }
  json meta = {{"format_version", 1},
               {"config", to_json(model.config)},
               {"parameter_count", model.params.values.size()},
               {"digest", "sha256:" + sha256_hex(bytes)}};
  std::ofstream out(dir / "member.json");
  out << meta.dump(2) << '\n';
  if (!out) fail(ErrorKind::IoError, "cannot write " + (dir / "member.json").string());
}

MemberModel load_checkpoint(const std::filesystem::path& dir) {
  const auto meta_path = dir / "member.json";
  const auto weights_path = dir / "weights.bin";
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec) || !std::filesystem::exists(meta_path, ec))
    fail(ErrorKind::MissingFile, "checkpoint not found: " + dir.string());
  if (!std::filesystem::exists(weights_path, ec))
    fail(ErrorKind::CorruptCheckpoint, "checkpoint " + dir.string() + " has no weights.bin");

  MemberModel model;
  std::size_t count = 0;
  std::string digest;
  try {
    std::ifstream in(meta_path);
    const json meta = json::parse(in);
    if (meta.at("format_version").get<int>() != 1) throw std::invalid_argument("unsupported format_version");
    model.config = member_from_json(meta.at("config"));
    count = meta.at("parameter_count").get<std::size_t>();
    digest = meta.at("digest").get<std::string>();
  } catch (const std::exception& e) {
    fail(ErrorKind::CorruptCheckpoint, "unreadable member.json in " + dir.string() + ": " + e.what());
  }

  std::ifstream in(weights_path, std::ios::binary);
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() != count * 4)
    fail(ErrorKind::CorruptCheckpoint, "weights.bin holds " + std::to_string(bytes.size()) + " bytes, expected " +
                                           std::to_string(count * 4));
  if (digest != "sha256:" + sha256_hex(bytes)) fail(ErrorKind::CorruptCheckpoint, "digest mismatch in " + dir.string());

  std::size_t expected = 0;
  try {
    expected = Network(model.config.backbone).parameter_count();
  } catch (const Error& e) {
    fail(ErrorKind::CorruptCheckpoint, std::string("stored backbone is invalid: ") + e.what());
  }
  if (expected != count) fail(ErrorKind::CorruptCheckpoint, "parameter count does not match the stored backbone");
  model.params = {model.config.backbone, decode_weights(bytes)};
  return model;
}

MemberModel load_checkpoint(const std::filesystem::path& dir, const MemberConfig& expected) {
  MemberModel model = load_checkpoint(dir);
  if (model.config.region != expected.region)
    fail(ErrorKind::ConfigMismatch, "checkpoint " + dir.string() + " was trained on region " +
                                        std::string(to_string(model.config.region)) + ", slot expects " +
                                        std::string(to_string(expected.region)));
  if (!(model.config == expected))
    fail(ErrorKind::ConfigMismatch, "checkpoint " + dir.string() + " does not match member '" + expected.member_id + "'");
  return model;
}

}  // namespace facepad
