#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace facepad {

// Every failure surfaced by the library carries one of these kinds. The
// enumerator names double as the machine-readable error identifiers that the
// CLI prints, so renaming one is a wire-format change.
enum class ErrorKind {
  MissingFile,
  MalformedRecord,
  LabelTaxonomyViolation,
  DuplicatePath,
  SplitLeakage,
  TooFewSubjects,
  BadFractions,
  EmptyImage,
  CropOutOfBounds,
  InvalidConfig,
  ImageDecode,
  IoError,
  BadWeights,
  EmptyVideo,
  NoFaceFound,
  InvalidFaceBox,
  BoxOutOfBounds,
  BadBandFraction,
  SpatialCollapse,
  SingleClassTrainingSet,
  NonFiniteLoss,
  ShapeMismatch,
  CorruptCheckpoint,
  ConfigMismatch,
  EmptyScores,
  EvenMajority,
  SingleClassValidation,
  NoAttackSamples,
  NoBonafideSamples,
  SingleClassScores,
  BadAlpha,
  ModelTooLarge,
  EmptyProtocol,
  UnresolvedProtocolRows,
  UnknownMember,
  ConfigError,
};

inline constexpr int kErrorKindCount = static_cast<int>(ErrorKind::ConfigError) + 1;

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  std::string_view name() const noexcept { return to_string(kind_); }
  const std::string& detail() const noexcept { return detail_; }

  // Extra context for the few kinds that carry it.
  std::optional<long> line;          // MalformedRecord, ConfigError: 1-based line number
  std::optional<std::string> subject;  // SplitLeakage: offending subject_id
  std::optional<int> epoch;          // NonFiniteLoss: 0-based epoch index

 private:
  ErrorKind kind_;
  std::string detail_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace facepad
