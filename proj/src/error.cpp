#include "facepad/error.hpp"

#include <array>

namespace facepad {
namespace {

constexpr std::array<std::string_view, kErrorKindCount> kNames = {
    "MissingFile",
    "MalformedRecord",
    "LabelTaxonomyViolation",
    "DuplicatePath",
    "SplitLeakage",
    "TooFewSubjects",
    "BadFractions",
    "EmptyImage",
    "CropOutOfBounds",
    "InvalidConfig",
    "ImageDecode",
    "IoError",
    "BadWeights",
    "EmptyVideo",
    "NoFaceFound",
    "InvalidFaceBox",
    "BoxOutOfBounds",
    "BadBandFraction",
    "SpatialCollapse",
    "SingleClassTrainingSet",
    "NonFiniteLoss",
    "ShapeMismatch",
    "CorruptCheckpoint",
    "ConfigMismatch",
    "EmptyScores",
    "EvenMajority",
    "SingleClassValidation",
    "NoAttackSamples",
    "NoBonafideSamples",
    "SingleClassScores",
    "BadAlpha",
    "ModelTooLarge",
    "EmptyProtocol",
    "UnresolvedProtocolRows",
    "UnknownMember",
    "ConfigError",
};

}  // namespace

std::string_view to_string(ErrorKind kind) {
  return kNames.at(static_cast<std::size_t>(kind));
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message),
      kind_(kind),
      detail_(message) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace facepad
