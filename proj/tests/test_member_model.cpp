#include <doctest.h>

#include <cmath>

#include "expect_error.hpp"
#include "facepad/member_model.hpp"
#include "facepad/metrics.hpp"
#include "support.hpp"

using namespace facepad;
using testing::kind_of;

namespace {

MemberConfig small_member(RegionKind region = RegionKind::full_frame) {
  MemberConfig m;
  m.region = region;
  m.member_id = std::string(to_string(region));
  m.backbone.input_height = m.backbone.input_width = 12;
  m.backbone.conv_blocks = {{4, 3, 1}, {6, 3, 2}};
  m.backbone.dense_units = 6;
  m.backbone.dropout_rate = 0.0;
  return m;
}

// Bright views are bonafide, dark ones attacks.
std::vector<LabeledView> brightness_views(Rng& rng, int n) {
  std::vector<LabeledView> out;
  for (int i = 0; i < n; ++i) {
    const bool bona = i % 2 == 0;
    Image img(12, 12, 3);
    for (float& v : img.data) v = static_cast<float>((bona ? 0.55 : 0.05) + 0.4 * rng.uniform());
    out.push_back({img, bona ? Label::bonafide : Label::attack});
  }
  return out;
}

std::size_t expected_parameter_count(const BackboneConfig& b) {
  std::size_t n = 0;
  int in = b.input_channels;
  for (const auto& block : b.conv_blocks) {
    n += static_cast<std::size_t>(block.out_channels) * in * block.kernel_size * block.kernel_size + block.out_channels;
    in = block.out_channels;
  }
  return n + static_cast<std::size_t>(in) * b.dense_units + b.dense_units + b.dense_units + 1;
}

}  // namespace

TEST_CASE("sigmoid and bce") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(-800.0) == 0.0);
  CHECK(sigmoid(2.0) + sigmoid(-2.0) == doctest::Approx(1.0));
  CHECK(bce_loss(0.5, 1) == doctest::Approx(std::log(2.0)));
  CHECK(bce_loss(0.0, 1) == doctest::Approx(-std::log(kProbabilityClamp)));
  CHECK(std::isfinite(bce_loss(1.0, 0)));
}

TEST_CASE("network shapes and parameter counts") {
  for (const auto& blocks : std::vector<std::vector<ConvBlockConfig>>{
           {{16, 3, 2}, {32, 3, 2}, {64, 3, 2}}, {{4, 3, 1}}, {{8, 5, 2}, {3, 3, 1}}}) {
    BackboneConfig b;
    b.input_height = 40;
    b.input_width = 33;
    b.conv_blocks = blocks;
    const Network net(b);
    CHECK(net.parameter_count() == expected_parameter_count(b));
    int h = 40, w = 33;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      h = (h - blocks[i].kernel_size) / blocks[i].stride + 1;
      w = (w - blocks[i].kernel_size) / blocks[i].stride + 1;
      CHECK(net.block_output_shape(static_cast<int>(i)).height == h);
      CHECK(net.block_output_shape(static_cast<int>(i)).width == w);
    }
  }
  SUBCASE("spatial collapse") {
    BackboneConfig b;
    b.input_height = b.input_width = 8;
    b.conv_blocks = {{4, 3, 2}, {4, 3, 2}, {4, 3, 2}};
    CHECK(kind_of([&] { Network{b}; }) == ErrorKind::SpatialCollapse);
  }
  SUBCASE("invalid backbones") {
    BackboneConfig b;
    b.dropout_rate = 1.0;
    CHECK(kind_of([&] { Network{b}; }) == ErrorKind::InvalidConfig);
    b = {};
    b.conv_blocks.clear();
    CHECK(kind_of([&] { Network{b}; }) == ErrorKind::InvalidConfig);
  }
}

TEST_CASE("build_model is seeded") {
  const auto m = small_member();
  CHECK(build_model(m, 5) == build_model(m, 5));
  CHECK_FALSE(build_model(m, 5) == build_model(m, 6));
  CHECK(build_model(m, 5).values.size() == expected_parameter_count(m.backbone));
}

TEST_CASE("adam first step moves each weight by the learning rate against the gradient sign") {
  TrainingConfig cfg;
  cfg.learning_rate = 0.01;
  AdamOptimizer adam(3, cfg);
  std::vector<double> w = {1.0, 1.0, 1.0};
  const std::vector<double> g = {0.5, -2.0, 0.0};
  adam.step(w, g);
  CHECK(w[0] == doctest::Approx(0.99).epsilon(1e-6));
  CHECK(w[1] == doctest::Approx(1.01).epsilon(1e-6));
  CHECK(w[2] == 1.0);
  CHECK(adam.steps() == 1);
}

TEST_CASE("training") {
  Rng rng(21);
  const auto train = brightness_views(rng, 40);
  const auto val = brightness_views(rng, 20);
  TrainingConfig t;
  t.learning_rate = 0.01;
  t.epochs = 8;
  t.batch_size = 8;
  t.seed = 4;
  const AugmentationConfig aug{0.5, 1.0, 4};
  const auto member = small_member();

  SUBCASE("learns a separable rule and is reproducible") {
    int callbacks = 0;
    const auto a = train_member(member, t, aug, train, val, [&](int, const EpochRecord&) { ++callbacks; });
    const auto b = train_member(member, t, aug, train, val);
    CHECK(callbacks == t.epochs);
    CHECK(a.record == b.record);
    CHECK(a.model.params == b.model.params);
    CHECK(a.record.epochs.back().train_loss < a.record.epochs.front().train_loss);
    std::vector<ScoredLabel> scored;
    for (const auto& v : val) scored.push_back({predict_member(a.model, {RegionKind::full_frame, v.pixels, {}}).p_bonafide, v.label});
    CHECK(auc(roc_curve(scored)) > 0.95);
  }
  SUBCASE("single-class training set") {
    std::vector<LabeledView> one;
    for (const auto& v : train)
      if (v.label == Label::attack) one.push_back(v);
    CHECK(kind_of([&] { train_member(member, t, aug, one, val); }) == ErrorKind::SingleClassTrainingSet);
  }
  SUBCASE("non-finite input diverges") {
    auto bad = train;
    bad[0].pixels.data[0] = std::nanf("");
    try {
      train_member(member, t, aug, bad, val);
      FAIL("expected NonFiniteLoss");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::NonFiniteLoss);
      CHECK(e.epoch.has_value());
    }
  }
  SUBCASE("wrong view size") {
    auto bad = train;
    bad[3].pixels = Image(10, 12, 3);
    CHECK(kind_of([&] { train_member(member, t, aug, bad, val); }) == ErrorKind::ShapeMismatch);
  }
  SUBCASE("invalid optimiser settings") {
    auto bad = t;
    bad.learning_rate = 0.0;
    CHECK(kind_of([&] { train_member(member, bad, aug, train, val); }) == ErrorKind::InvalidConfig);
  }
}

TEST_CASE("prediction checks the region") {
  const auto member = small_member(RegionKind::face);
  const MemberModel model{member, build_model(member, 1)};
  const Image pixels(12, 12, 3, 0.3f);
  const auto s = predict_member(model, {RegionKind::face, pixels, {}});
  CHECK(s.member_id == "face");
  CHECK(s.p_bonafide > 0.0);
  CHECK(s.p_bonafide < 1.0);
  CHECK(s == predict_member(model, {RegionKind::face, pixels, {}}));
  CHECK(kind_of([&] { predict_member(model, {RegionKind::background, pixels, {}}); }) == ErrorKind::ConfigMismatch);
}

TEST_CASE("checkpoint round trip") {
  const auto dir = testing::scratch_dir("checkpoint");
  const auto member = small_member(RegionKind::face_band);
  const MemberModel model{member, build_model(member, 8)};
  save_checkpoint(model, dir / "m");
  const auto back = load_checkpoint(dir / "m", member);
  CHECK(back.config == model.config);
  CHECK(back.params == model.params);
  CHECK(kind_of([&] { load_checkpoint(dir / "absent"); }) == ErrorKind::MissingFile);
  std::filesystem::remove(dir / "m" / "weights.bin");
  CHECK(kind_of([&] { load_checkpoint(dir / "m"); }) == ErrorKind::CorruptCheckpoint);
}
