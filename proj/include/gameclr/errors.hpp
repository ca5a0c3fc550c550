#pragma once

#include <stdexcept>
#include <string>

namespace gameclr {

// Base class for all library errors so callers can catch one type.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// -- scene engine --
struct AllLanesOccupied : Error {
  AllLanesOccupied() : Error("scene-altering augment requires at least one empty lane") {}
};

// -- image augmentation --
struct InvalidPolicy : Error {
  explicit InvalidPolicy(const std::string& what) : Error("invalid augment policy: " + what) {}
};

// -- tensor / model --
struct ShapeMismatch : Error {
  explicit ShapeMismatch(const std::string& what) : Error("shape mismatch: " + what) {}
};

// -- contrastive loss --
struct EmptyEmbedding : Error {
  EmptyEmbedding() : Error("embedding must be non-empty") {}
};
struct NonPositiveTemperature : Error {
  NonPositiveTemperature() : Error("temperature must be > 0") {}
};
struct EmptyPositiveSet : Error {
  EmptyPositiveSet() : Error("positive set must be non-empty") {}
};
struct BatchTooSmall : Error {
  explicit BatchTooSmall(const std::string& what) : Error("batch too small: " + what) {}
};

// -- training --
struct ZeroVector : Error {
  ZeroVector() : Error("cosine similarity of a zero vector is undefined") {}
};
struct DatasetMethodMismatch : Error {
  explicit DatasetMethodMismatch(const std::string& what) : Error("dataset/method mismatch: " + what) {}
};
struct NonFiniteLoss : Error {
  NonFiniteLoss(int epoch, int step)
      : Error("non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step)),
        epoch(epoch), step(step) {}
  int epoch;
  int step;
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& what) : Error("numerical failure: " + what) {}
};

// -- ridge / probe --
struct SingularSystem : Error {
  SingularSystem() : Error("normal equations are rank-deficient; use lambda > 0") {}
};
struct ConstantTarget : Error {
  ConstantTarget() : Error("target vector is constant; R^2 undefined") {}
};

// -- dataset files --
struct BadMagic : Error {
  explicit BadMagic(const std::string& what) : Error("bad magic: " + what) {}
};
struct TruncatedBlob : Error {
  explicit TruncatedBlob(const std::string& what) : Error("truncated blob: " + what) {}
};
struct IndexOutOfRange : Error {
  explicit IndexOutOfRange(const std::string& what) : Error("index out of range: " + what) {}
};
struct PixelOutOfRange : Error {
  explicit PixelOutOfRange(const std::string& what) : Error("pixel out of range: " + what) {}
};

// -- config / io --
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error("config error: " + what) {}
};
struct IoError : Error {
  explicit IoError(const std::string& what) : Error("i/o error: " + what) {}
};

}  // namespace gameclr
