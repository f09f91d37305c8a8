#include <doctest.h>

#include <fstream>

#include "expect_error.hpp"
#include "facepad/protocol.hpp"
#include "facepad/run_config.hpp"
#include "support.hpp"

using namespace facepad;
using testing::kind_of;

TEST_CASE("run config parsing") {
  const std::filesystem::path base = "/tmp/cfg";
  SUBCASE("minimal config takes defaults") {
    const auto c = parse_run_config("manifest = m.jsonl\nseed = 3\n", base);
    CHECK(c.manifest == base / "m.jsonl");
    CHECK(c.seed == 3);
    CHECK(c.ensemble.members.size() == 4);
    CHECK(c.ensemble.rule.kind == AggregationKind::mean_probability);
    CHECK_FALSE(c.threshold.has_value());
    CHECK(c.bundle_dir() == base / "out" / "bundle");
  }
  SUBCASE("explicit values") {
    const auto c = parse_run_config("# comment\n"
                                    "manifest = /abs/m.jsonl\n"
                                    "seed = 9\n"
                                    "members = face, background, full_frame\n"
                                    "input_size = 32x24\n"
                                    "conv_blocks = 8x3s1,16x3s2\n"
                                    "aggregation = majority_vote\n"
                                    "threshold = 0.4\n"
                                    "split_fractions = 0.5, 0.25, 0.25\n",
                                    base);
    CHECK(c.manifest == "/abs/m.jsonl");
    REQUIRE(c.ensemble.members.size() == 3);
    CHECK(c.ensemble.members[0].member_id == "face");
    CHECK(c.ensemble.members[2].region == RegionKind::full_frame);
    CHECK(c.ensemble.members[1].backbone.input_height == 32);
    CHECK(c.ensemble.members[1].backbone.input_width == 24);
    CHECK(c.ensemble.members[0].backbone.conv_blocks == std::vector<ConvBlockConfig>{{8, 3, 1}, {16, 3, 2}});
    CHECK(c.ensemble.rule.kind == AggregationKind::majority_vote);
    CHECK(c.threshold == 0.4);
  }
  SUBCASE("unknown key names its line") {
    try {
      parse_run_config("seed = 1\nmanifest = m\nlearning_rat = 0.1\n", base);
      FAIL("expected ConfigError");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ConfigError);
      CHECK(e.line == 3);
      CHECK(std::string(e.what()).find("learning_rat") != std::string::npos);
    }
  }
  SUBCASE("rejections") {
    CHECK(kind_of([&] { parse_run_config("manifest = m\n", base); }) == ErrorKind::ConfigError);
    CHECK(kind_of([&] { parse_run_config("seed = 1\nseed = 2\nmanifest = m\n", base); }) == ErrorKind::ConfigError);
    CHECK(kind_of([&] { parse_run_config("seed = x\nmanifest = m\n", base); }) == ErrorKind::ConfigError);
    CHECK(kind_of([&] { parse_run_config("seed = 1\nmanifest = m\nmembers = nose,face\n", base); }) ==
          ErrorKind::ConfigError);
    CHECK(kind_of([&] { parse_run_config("seed = 1\nmanifest = m\njust words\n", base); }) == ErrorKind::ConfigError);
  }
  SUBCASE("render and parse again") {
    const auto c = testing::tiny_run_config(base, 77);
    const auto again = parse_run_config(render_run_config(c), base);
    CHECK(render_run_config(again) == render_run_config(c));
  }
  SUBCASE("missing file") {
    CHECK(kind_of([] { load_run_config("/nonexistent/run.conf"); }) == ErrorKind::MissingFile);
  }
}

namespace {

EvaluationProtocol two_by_two() {
  EvaluationProtocol p;
  p.subjects = {"a", "b"};
  p.scenarios = {{"live", Label::bonafide, std::nullopt, 3, ""}, {"print", Label::attack, AttackType::printed_photo, 2, ""}};
  return p;
}

}  // namespace

TEST_CASE("protocol expansion") {
  const auto rows = protocol_expand(two_by_two());
  CHECK(rows.size() == 10);
  CHECK(two_by_two().case_total() == 10);
  CHECK(rows[0] == ProtocolRow{"a", "live", Label::bonafide, 0});
  CHECK(rows[4] == ProtocolRow{"a", "print", Label::attack, 1});
  CHECK(rows[5] == ProtocolRow{"b", "live", Label::bonafide, 0});

  SUBCASE("row count identity") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      EvaluationProtocol p;
      const int subjects = 1 + static_cast<int>(rng.below(6));
      for (int s = 0; s < subjects; ++s) p.subjects.push_back("s" + std::to_string(s));
      std::size_t per_subject = 0;
      const int scenarios = 1 + static_cast<int>(rng.below(8));
      for (int k = 0; k < scenarios; ++k) {
        const int count = 1 + static_cast<int>(rng.below(5));
        per_subject += static_cast<std::size_t>(count);
        p.scenarios.push_back({"sc" + std::to_string(k), Label::bonafide, std::nullopt, count, ""});
      }
      CHECK(protocol_expand(p).size() == per_subject * static_cast<std::size_t>(subjects));
    }
  }
  SUBCASE("empty protocol") {
    EvaluationProtocol p;
    CHECK(kind_of([&] { protocol_expand(p); }) == ErrorKind::EmptyProtocol);
  }
}

TEST_CASE("shipped protocol") {
  const auto p = load_protocol(default_protocol_path());
  const auto rows = protocol_expand(p);
  CHECK(p.subjects.size() == 6);
  CHECK(rows.size() == 228);
  long bona = 0;
  for (const auto& r : rows) bona += r.label == Label::bonafide;
  CHECK(bona == 84);
  for (const auto& s : p.scenarios) CHECK((s.label == Label::attack) == s.attack_type.has_value());
}

TEST_CASE("protocol loading errors") {
  const auto dir = testing::scratch_dir("protocol_errors");
  std::ofstream(dir / "bad.json") << "{\"protocol_version\": 1, \"subjects\": [\"a\"], \"scenarios\": "
                                     "[{\"scenario_id\": \"x\", \"label\": \"bonafide\", \"attack_type\": \"replay\", "
                                     "\"case_count\": 1}]}";
  CHECK(kind_of([&] { load_protocol(dir / "bad.json"); }) == ErrorKind::LabelTaxonomyViolation);
  std::ofstream(dir / "broken.json") << "{\"protocol_version\": 1";
  CHECK(kind_of([&] { load_protocol(dir / "broken.json"); }) == ErrorKind::MalformedRecord);
  CHECK(kind_of([&] { load_protocol(dir / "none.json"); }) == ErrorKind::MissingFile);
}

TEST_CASE("protocol resolution against a manifest") {
  const auto p = two_by_two();
  DatasetManifest m;
  m.root = "/data";
  for (const char* subject : {"a", "b"}) {
    for (int k = 0; k < 3; ++k)
      m.samples.push_back({std::string(subject) + "/live" + std::to_string(k) + ".png", Label::bonafide, std::nullopt,
                           subject, "live", Split::test});
    for (int k = 0; k < 2; ++k)
      m.samples.push_back({std::string(subject) + "/print" + std::to_string(k) + ".png", Label::attack,
                           AttackType::printed_photo, subject, "print", Split::test});
  }
  const auto bound = resolve_protocol(p, m);
  REQUIRE(bound.size() == 10);
  CHECK(bound[0].path == "a/live0.png");
  CHECK(bound[9].path == "b/print1.png");

  m.samples.pop_back();
  try {
    resolve_protocol(p, m);
    FAIL("expected UnresolvedProtocolRows");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnresolvedProtocolRows);
    CHECK(std::string(e.what()).find("print") != std::string::npos);
  }
}
