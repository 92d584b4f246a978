#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace salgate {

enum class ErrorKind {
  InvalidArgument,
  EmptyRegion,
  DimensionMismatch,
  ConfigMismatch,
  ShapeMismatch,
  DegenerateTruth,
  EmptyDataset,
  MissingMasks,
  UnknownImageId,
  ParseError,
  MissingImage,
  InvalidBox,
  PlacementFailure,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace salgate
