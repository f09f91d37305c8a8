#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "facepad/data_pipeline.hpp"
#include "facepad/desk_dataset.hpp"

namespace facepad {

struct ProtocolScenario {
  std::string scenario_id;
  Label label = Label::bonafide;
  std::optional<AttackType> attack_type;
  int case_count = 1;  // cases per subject
  std::string description;
};

// A scenario matrix applied to every subject.
struct EvaluationProtocol {
  int version = 1;
  std::vector<std::string> subjects;
  std::vector<ProtocolScenario> scenarios;

  std::size_t case_total() const;  // |subjects| × Σ case_count
};

struct ProtocolRow {
  std::string subject_id;
  std::string scenario_id;
  Label label = Label::bonafide;
  int case_index = 0;

  friend bool operator==(const ProtocolRow&, const ProtocolRow&) = default;
};

// Subject-major Cartesian expansion with per-scenario multiplicity.
// Throws EmptyProtocol when there are no subjects or no scenarios.
std::vector<ProtocolRow> protocol_expand(const EvaluationProtocol& protocol);

EvaluationProtocol load_protocol(const std::filesystem::path& path);
std::filesystem::path default_protocol_path();

std::vector<ScenarioRequest> scenario_requests(const EvaluationProtocol& protocol);

// Binds each row to a manifest sample with the same subject, scenario and
// label, taking samples in manifest order. Throws UnresolvedProtocolRows
// naming every row without a sample.
std::vector<Sample> resolve_protocol(const EvaluationProtocol& protocol, const DatasetManifest& manifest);

}  // namespace facepad
