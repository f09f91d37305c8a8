#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "expect_error.hpp"
#include "facepad/explain.hpp"
#include "support.hpp"

using namespace facepad;
using testing::kind_of;

namespace {

MemberModel random_member(std::uint64_t seed) {
  MemberConfig m;
  m.member_id = "full_frame";
  m.backbone.input_height = m.backbone.input_width = 14;
  m.backbone.conv_blocks = {{4, 3, 1}, {5, 3, 2}};
  m.backbone.dense_units = 6;
  return {m, build_model(m, seed)};
}

}  // namespace

TEST_CASE("activation gradient matches finite differences") {
  Rng rng(2);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto model = random_member(seed);
    const Image pixels = testing::random_image(rng, 14, 14);
    for (auto target : {GradCamTarget::bonafide_score, GradCamTarget::attack_score})
      for (int layer : {0, 1}) {
        const auto g = activation_gradient(model.params, pixels, target, layer);
        const auto fd = finite_difference_gradient(model.params, pixels, target, 1e-5, layer);
        REQUIRE(fd.size() == g.gradient.size());
        for (std::size_t i = 0; i < fd.size(); ++i)
          CHECK(g.gradient[i] == doctest::Approx(fd[i]).epsilon(1e-4).scale(1e-6));
      }
  }
}

TEST_CASE("attack target is the negated bonafide gradient") {
  const auto model = random_member(5);
  Rng rng(7);
  const Image pixels = testing::random_image(rng, 14, 14);
  const auto b = activation_gradient(model.params, pixels, GradCamTarget::bonafide_score);
  const auto a = activation_gradient(model.params, pixels, GradCamTarget::attack_score);
  CHECK(a.block == 1);
  CHECK(a.activations == b.activations);
  for (std::size_t i = 0; i < a.gradient.size(); ++i) CHECK(a.gradient[i] == -b.gradient[i]);
}

TEST_CASE("grad_cam map") {
  Rng rng(3);
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto model = random_member(seed);
    const Image pixels = testing::random_image(rng, 14, 14);
    const auto map = grad_cam(model, pixels);
    CHECK(map.height == 14);
    CHECK(map.width == 14);
    CHECK(map.member_id == "full_frame");
    const auto [lo, hi] = std::minmax_element(map.values.begin(), map.values.end());
    CHECK(*lo >= 0.0);
    CHECK(*hi <= 1.0);
    if (map.raw_max > 0.0)
      CHECK(*hi == doctest::Approx(1.0));
    else
      CHECK(*hi == 0.0);
    const auto again = grad_cam(model, pixels);
    CHECK(again.values == map.values);
  }
  SUBCASE("errors") {
    const auto model = random_member(1);
    CHECK(kind_of([&] { grad_cam(model, Image(10, 14, 3)); }) == ErrorKind::ShapeMismatch);
    CHECK(kind_of([&] { grad_cam(model, Image(14, 14, 3), {GradCamTarget::bonafide_score, 2}); }) ==
          ErrorKind::InvalidConfig);
    CHECK(kind_of([&] { grad_cam(model, RegionView{RegionKind::face, Image(14, 14, 3), {}}); }) ==
          ErrorKind::ConfigMismatch);
    CHECK(kind_of([&] { finite_difference_gradient(model.params, Image(14, 14, 3), GradCamTarget::bonafide_score, 0.0); }) ==
          ErrorKind::InvalidConfig);
  }
  SUBCASE("large blocks are refused by the finite-difference check") {
    MemberConfig m;
    m.backbone.input_height = m.backbone.input_width = 64;
    m.backbone.conv_blocks = {{8, 3, 1}};
    m.backbone.dense_units = 2;
    const auto params = build_model(m, 1);
    CHECK(kind_of([&] { finite_difference_gradient(params, Image(64, 64, 3), GradCamTarget::bonafide_score, 1e-4); }) ==
          ErrorKind::ModelTooLarge);
  }
}

TEST_CASE("overlay") {
  SaliencyMap map;
  map.height = 2;
  map.width = 2;
  map.values = {0.0, 1.0, 0.5, 0.25};
  const Image frame(2, 2, 3, 0.4f);
  CHECK(overlay_heatmap(frame, map, 0.0) == frame);
  const Image full = overlay_heatmap(frame, map, 1.0);
  CHECK(full.at(0, 0, 0) == 0.4f);
  CHECK(full.at(0, 1, 0) == 1.0f);
  CHECK(full.at(0, 1, 2) == 0.0f);
  CHECK(heat_color(0.0) == std::array<float, 3>{0.0f, 0.0f, 1.0f});
  CHECK(heat_color(1.0) == std::array<float, 3>{1.0f, 0.0f, 0.0f});
  CHECK(kind_of([&] { overlay_heatmap(frame, map, 1.5); }) == ErrorKind::BadAlpha);
  CHECK(kind_of([&] { overlay_heatmap(Image(3, 2, 3), map, 0.5); }) == ErrorKind::ShapeMismatch);
  const auto big = resize_map(map, 5, 5);
  CHECK(big.at(0, 4) == 1.0);
  CHECK(saliency_image(map).data == std::vector<float>{0.0f, 1.0f, 0.5f, 0.25f});
  for (auto t : {GradCamTarget::bonafide_score, GradCamTarget::attack_score}) CHECK(parse_gradcam_target(to_string(t)) == t);
}
