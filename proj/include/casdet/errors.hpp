#pragma once

#include <stdexcept>
#include <string>

namespace casdet {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : Error {
  using Error::Error;
};

struct InvalidParams : Error {
  using Error::Error;
};

struct InsufficientPoints : Error {
  using Error::Error;
};

struct DegenerateGeometry : Error {
  using Error::Error;
};

struct UnorganizedCloud : Error {
  using Error::Error;
};

struct ShapeError : Error {
  using Error::Error;
};

struct DegenerateDataset : Error {
  using Error::Error;
};

struct LengthMismatch : Error {
  using Error::Error;
};

struct SingularKernel : Error {
  using Error::Error;
};

// Thrown by the orchestration layer; carries the pipeline stage that failed.
struct StageError : Error {
  StageError(const std::string& stage, const std::string& what)
      : Error("[" + stage + "] " + what), stage(stage) {}
  std::string stage;
};

}  // namespace casdet
