#include "facepad/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "facepad/error.hpp"

namespace facepad {

using nlohmann::json;

std::string_view to_string(AggregationKind k) {
  switch (k) {
    case AggregationKind::mean_probability: return "mean_probability";
    case AggregationKind::majority_vote: return "majority_vote";
    case AggregationKind::attack_veto: return "attack_veto";
  }
  return "unknown";
}

std::optional<AggregationKind> parse_aggregation_kind(std::string_view s) {
  for (auto k : {AggregationKind::mean_probability, AggregationKind::majority_vote, AggregationKind::attack_veto})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

void AggregationRule::validate() const {
  if (!(threshold >= 0.0 && threshold <= 1.0)) fail(ErrorKind::InvalidConfig, "threshold must lie in [0, 1]");
  if (kind == AggregationKind::attack_veto && !(veto_floor > 0.0 && veto_floor < 1.0))
    fail(ErrorKind::InvalidConfig, "veto_floor must lie in (0, 1)");
}

void EnsembleConfig::validate() const {
  rule.validate();
  quality.validate();
  if (members.size() < 2) fail(ErrorKind::InvalidConfig, "an ensemble needs at least two members");
  std::set<std::string> ids;
  std::set<RegionKind> regions;
  for (const auto& m : members) {
    if (m.member_id.empty()) fail(ErrorKind::InvalidConfig, "member_id must be non-empty");
    if (!ids.insert(m.member_id).second) fail(ErrorKind::InvalidConfig, "duplicate member_id '" + m.member_id + "'");
    if (!regions.insert(m.region).second)
      fail(ErrorKind::InvalidConfig, "region " + std::string(to_string(m.region)) + " bound to two members");
  }
  if (rule.kind == AggregationKind::majority_vote && members.size() % 2 == 0)
    fail(ErrorKind::EvenMajority, "majority_vote needs an odd member count");
  if (!(band_fraction > 0.0 && band_fraction <= 0.5))
    fail(ErrorKind::BadBandFraction, "band_fraction must lie in (0, 0.5]");
}

EnsembleConfig default_ensemble_config(const BackboneConfig& backbone) {
  EnsembleConfig cfg;
  for (RegionKind k : kRegionKinds) cfg.members.push_back({k, backbone, std::string(to_string(k))});
  return cfg;
}

namespace {

// Correctly rounded sum of doubles (Shewchuk partials, as in Python's fsum).
double exact_sum(std::span<const double> values) {
  std::vector<double> partials;
  for (double x : values) {
    std::size_t i = 0;
    for (double y : partials) {
      if (std::abs(x) < std::abs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials[i++] = lo;
      x = hi;
    }
    partials.resize(i);
    partials.push_back(x);
  }
  double hi = 0.0;
  if (!partials.empty()) {
    std::size_t n = partials.size();
    hi = partials[--n];
    double lo = 0.0;
    while (n > 0) {
      const double x = hi;
      const double y = partials[--n];
      hi = x + y;
      const double yr = hi - x;
      lo = y - yr;
      if (lo != 0.0) break;
    }
    if (n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0))) {
      const double y = lo * 2.0;
      const double x = hi + y;
      if (y == x - hi) hi = x;
    }
  }
  return hi;
}

double mean_probability(std::span<const MemberScore> scores) {
  std::vector<double> ps;
  for (const auto& s : scores) ps.push_back(s.p_bonafide);
  const auto [lo, hi] = std::minmax_element(ps.begin(), ps.end());
  return std::clamp(exact_sum(ps) / static_cast<double>(ps.size()), *lo, *hi);
}

}  // namespace

EnsembleDecision aggregate(std::span<const MemberScore> scores, const AggregationRule& rule) {
  rule.validate();
  if (scores.empty()) fail(ErrorKind::EmptyScores, "aggregate needs at least one member score");
  for (const auto& s : scores)
    if (!(s.p_bonafide >= 0.0 && s.p_bonafide <= 1.0))
      fail(ErrorKind::InvalidConfig, "member '" + s.member_id + "' score is outside [0, 1]");

  EnsembleDecision d;
  d.member_scores.assign(scores.begin(), scores.end());
  d.rule_used = rule;
  switch (rule.kind) {
    case AggregationKind::mean_probability:
      d.aggregate = mean_probability(scores);
      d.verdict = accepts_bonafide(d.aggregate, rule.threshold) ? Label::bonafide : Label::attack;
      break;
    case AggregationKind::majority_vote: {
      if (scores.size() % 2 == 0) fail(ErrorKind::EvenMajority, "majority_vote needs an odd number of scores");
      const auto votes = std::count_if(scores.begin(), scores.end(),
                                       [&](const MemberScore& s) { return accepts_bonafide(s.p_bonafide, rule.threshold); });
      d.aggregate = static_cast<double>(votes) / static_cast<double>(scores.size());
      d.verdict = 2 * static_cast<std::size_t>(votes) > scores.size() ? Label::bonafide : Label::attack;
      break;
    }
    case AggregationKind::attack_veto: {
      d.aggregate = mean_probability(scores);
      const bool vetoed =
          std::any_of(scores.begin(), scores.end(), [&](const MemberScore& s) { return s.p_bonafide < rule.veto_floor; });
      d.verdict = !vetoed && accepts_bonafide(d.aggregate, rule.threshold) ? Label::bonafide : Label::attack;
      break;
    }
  }
  return d;
}

std::vector<double> calibration_candidates(std::span<const ScoredLabel> scores) {
  std::vector<double> values;
  for (const auto& s : scores) values.push_back(s.score);
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  std::vector<double> candidates = {0.0, 1.0};
  for (std::size_t i = 0; i + 1 < values.size(); ++i) candidates.push_back(values[i] + (values[i + 1] - values[i]) / 2.0);
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  return candidates;
}

double calibrate_threshold(std::span<const ScoredLabel> scores, const CalibrationTarget& target) {
  const bool bona = std::any_of(scores.begin(), scores.end(), [](const auto& s) { return s.label == Label::bonafide; });
  const bool att = std::any_of(scores.begin(), scores.end(), [](const auto& s) { return s.label == Label::attack; });
  if (!bona || !att) fail(ErrorKind::SingleClassValidation, "threshold calibration needs both labels");

  struct Eval {
    double tau, apcer, bpcer, acer;
  };
  std::vector<Eval> evals;
  for (double tau : calibration_candidates(scores)) {
    const auto c = confusion_from_scores(scores, tau);
    const double a = apcer(c), b = bpcer(c);
    evals.push_back({tau, a, b, acer(a, b)});
  }

  const Eval* best = nullptr;
  if (target.kind == CalibrationTarget::Kind::min_acer) {
    for (const auto& e : evals)
      if (best == nullptr || e.acer < best->acer) best = &e;
  } else {
    for (const auto& e : evals)
      if (e.apcer <= target.max_apcer && (best == nullptr || e.bpcer < best->bpcer)) best = &e;
    if (best == nullptr)
      for (const auto& e : evals)
        if (best == nullptr || e.apcer < best->apcer || (e.apcer == best->apcer && e.bpcer < best->bpcer)) best = &e;
  }
  return best->tau;
}

// ---------------------------------------------------------------------------

Ensemble::Ensemble(EnsembleConfig config, std::vector<MemberModel> members)
    : config_(std::move(config)), members_(std::move(members)) {
  config_.validate();
  if (members_.size() != config_.members.size())
    fail(ErrorKind::ConfigMismatch, "ensemble expects " + std::to_string(config_.members.size()) + " members, got " +
                                        std::to_string(members_.size()));
  for (std::size_t i = 0; i < members_.size(); ++i) {
    if (!(members_[i].config == config_.members[i]))
      fail(ErrorKind::ConfigMismatch, "member slot '" + config_.members[i].member_id + "' holds a model for '" +
                                          members_[i].config.member_id + "' (" +
                                          std::string(to_string(members_[i].config.region)) + ")");
  }
}

namespace {

json rule_to_json(const AggregationRule& r) {
  return {{"kind", to_string(r.kind)}, {"threshold", r.threshold}, {"veto_floor", r.veto_floor}};
}

AggregationRule rule_from_json(const json& j) {
  AggregationRule r;
  const auto kind = parse_aggregation_kind(j.at("kind").get<std::string>());
  if (!kind) throw std::invalid_argument("unknown aggregation kind");
  r.kind = *kind;
  r.threshold = j.at("threshold").get<double>();
  r.veto_floor = j.at("veto_floor").get<double>();
  return r;
}

}  // namespace

void Ensemble::save(const std::filesystem::path& bundle) const {
  std::filesystem::create_directories(bundle);
  json members = json::array();
  for (const auto& m : members_) {
    save_checkpoint(m, bundle / m.config.member_id);
    members.push_back({{"member_id", m.config.member_id}, {"region", to_string(m.config.region)}, {"checkpoint", m.config.member_id}});
  }
  json doc = {{"bundle_version", 1},
              {"members", members},
              {"rule", rule_to_json(config_.rule)},
              {"band_fraction", config_.band_fraction},
              {"quality_weights",
               {{"sharpness", config_.quality.sharpness}, {"exposure", config_.quality.exposure}, {"face", config_.quality.face}}}};
  std::ofstream out(bundle / "ensemble.json");
  out << doc.dump(2) << '\n';
  if (!out) fail(ErrorKind::IoError, "cannot write " + (bundle / "ensemble.json").string());
}

Ensemble Ensemble::load(const std::filesystem::path& bundle) {
  const auto path = bundle / "ensemble.json";
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingFile, "bundle not found: " + path.string());

  json doc;
  EnsembleConfig cfg;
  std::vector<std::filesystem::path> dirs;
  try {
    doc = json::parse(in);
    if (doc.at("bundle_version").get<int>() != 1) throw std::invalid_argument("unsupported bundle_version");
    cfg.rule = rule_from_json(doc.at("rule"));
    cfg.band_fraction = doc.at("band_fraction").get<double>();
    const auto& q = doc.at("quality_weights");
    cfg.quality = {q.at("sharpness").get<double>(), q.at("exposure").get<double>(), q.at("face").get<double>()};
    for (const auto& m : doc.at("members")) dirs.push_back(bundle / m.at("checkpoint").get<std::string>());
  } catch (const std::exception& e) {
    fail(ErrorKind::CorruptCheckpoint, "unreadable ensemble.json: " + std::string(e.what()));
  }

  std::vector<MemberModel> members;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    MemberModel m = load_checkpoint(dirs[i]);
    const auto& entry = doc["members"][i];
    if (m.config.member_id != entry.at("member_id").get<std::string>() ||
        to_string(m.config.region) != entry.at("region").get<std::string>())
      fail(ErrorKind::ConfigMismatch, "checkpoint " + dirs[i].string() + " holds member '" + m.config.member_id +
                                          "' (" + std::string(to_string(m.config.region)) + "), bundle expects '" +
                                          entry.at("member_id").get<std::string>() + "' (" +
                                          entry.at("region").get<std::string>() + ")");
    cfg.members.push_back(m.config);
    members.push_back(std::move(m));
  }
  return Ensemble(std::move(cfg), std::move(members));
}

const MemberModel& Ensemble::member(std::string_view member_id) const {
  for (const auto& m : members_)
    if (m.config.member_id == member_id) return m;
  std::string known;
  for (const auto& m : members_) known += (known.empty() ? "" : ", ") + m.config.member_id;
  fail(ErrorKind::UnknownMember, "no member '" + std::string(member_id) + "'; available: " + known);
}

void Ensemble::set_rule(const AggregationRule& rule) {
  EnsembleConfig next = config_;
  next.rule = rule;
  next.validate();
  config_ = std::move(next);
}

std::vector<MemberScore> Ensemble::score_members(const Image& frame, const FaceBox& box) const {
  std::vector<MemberScore> scores;
  scores.reserve(members_.size());
  for (const auto& m : members_) {
    const auto view = extract_region(frame, box, m.config.region, m.config.backbone.input_height,
                                     m.config.backbone.input_width, config_.band_fraction);
    scores.push_back(predict_member(m, view));
  }
  return scores;
}

EnsembleDecision Ensemble::decide(const Image& frame, const FaceLocator& locator) const {
  return aggregate(score_members(frame, locate_face(locator, frame)), config_.rule);
}

InferenceResult Ensemble::infer(const VideoFrames& video, const FaceLocator& locator) const {
  video.validate();
  InferenceResult r;
  if (video.frames.size() == 1) {
    r.frame_index = 0;
    r.quality = score_frame_quality(video.frames[0], locator, config_.quality);
  } else {
    const auto sel = select_best_frame(video, locator, config_.quality);
    r.frame_index = sel.index;
    r.quality = sel.score;
  }
  const Image& frame = video.frames[r.frame_index];
  r.box = locate_face(locator, frame);
  r.decision = aggregate(score_members(frame, r.box), config_.rule);
  return r;
}

InferenceResult Ensemble::infer(const Image& frame, const FaceLocator& locator) const {
  return infer(VideoFrames{{frame}, "frame"}, locator);
}

}  // namespace facepad
