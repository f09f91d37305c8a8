#include "facepad/protocol.hpp"

#include <fstream>
#include <map>
#include <numeric>

#include <json.hpp>

#include "facepad/error.hpp"

namespace facepad {

std::size_t EvaluationProtocol::case_total() const {
  const std::size_t per_subject = std::accumulate(scenarios.begin(), scenarios.end(), std::size_t{0},
                                                  [](std::size_t acc, const ProtocolScenario& s) {
                                                    return acc + static_cast<std::size_t>(std::max(0, s.case_count));
                                                  });
  return subjects.size() * per_subject;
}

std::vector<ProtocolRow> protocol_expand(const EvaluationProtocol& protocol) {
  if (protocol.subjects.empty()) fail(ErrorKind::EmptyProtocol, "protocol has no subjects");
  if (protocol.scenarios.empty()) fail(ErrorKind::EmptyProtocol, "protocol has no scenarios");
  std::vector<ProtocolRow> rows;
  rows.reserve(protocol.case_total());
  for (const auto& subject : protocol.subjects)
    for (const auto& sc : protocol.scenarios)
      for (int k = 0; k < sc.case_count; ++k) rows.push_back({subject, sc.scenario_id, sc.label, k});
  return rows;
}

EvaluationProtocol load_protocol(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingFile, "protocol not found: " + path.string());
  auto malformed = [&](const std::string& what) {
    fail(ErrorKind::MalformedRecord, path.string() + ": " + what);
  };
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    malformed(e.what());
  }
  EvaluationProtocol p;
  try {
    p.version = doc.at("protocol_version").get<int>();
    if (p.version != 1) malformed("unsupported protocol_version " + std::to_string(p.version));
    p.subjects = doc.at("subjects").get<std::vector<std::string>>();
    for (const auto& row : doc.at("scenarios")) {
      ProtocolScenario s;
      s.scenario_id = row.at("scenario_id").get<std::string>();
      const auto label = parse_label(row.at("label").get<std::string>());
      if (!label) malformed("scenario '" + s.scenario_id + "': bad label");
      s.label = *label;
      if (row.contains("attack_type")) {
        s.attack_type = parse_attack_type(row.at("attack_type").get<std::string>());
        if (!s.attack_type) malformed("scenario '" + s.scenario_id + "': bad attack_type");
      }
      if ((s.label == Label::attack) != s.attack_type.has_value())
        fail(ErrorKind::LabelTaxonomyViolation, "scenario '" + s.scenario_id + "': attack_type iff label is attack");
      s.case_count = row.at("case_count").get<int>();
      if (s.case_count < 1) malformed("scenario '" + s.scenario_id + "': case_count must be >= 1");
      s.description = row.value("description", "");
      p.scenarios.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    malformed(e.what());
  }
  return p;
}

std::filesystem::path default_protocol_path() {
  return std::filesystem::path(FACEPAD_DATA_DIR) / "protocols" / "selfie_scenarios.json";
}

std::vector<ScenarioRequest> scenario_requests(const EvaluationProtocol& protocol) {
  std::vector<ScenarioRequest> out;
  for (const auto& s : protocol.scenarios) out.push_back({s.scenario_id, s.label, s.attack_type, s.case_count});
  return out;
}

std::vector<Sample> resolve_protocol(const EvaluationProtocol& protocol, const DatasetManifest& manifest) {
  using Key = std::tuple<std::string, std::string, Label>;
  std::map<Key, std::vector<const Sample*>> pool;
  for (const auto& s : manifest.samples) pool[{s.subject_id, s.scenario_id, s.label}].push_back(&s);

  std::vector<Sample> bound;
  std::vector<std::string> missing;
  for (const auto& row : protocol_expand(protocol)) {
    const auto it = pool.find({row.subject_id, row.scenario_id, row.label});
    if (it == pool.end() || static_cast<std::size_t>(row.case_index) >= it->second.size()) {
      missing.push_back(row.subject_id + "/" + row.scenario_id + "#" + std::to_string(row.case_index));
      continue;
    }
    bound.push_back(*it->second[static_cast<std::size_t>(row.case_index)]);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    fail(ErrorKind::UnresolvedProtocolRows, std::to_string(missing.size()) + " unresolved rows: " + list);
  }
  return bound;
}

}  // namespace facepad
