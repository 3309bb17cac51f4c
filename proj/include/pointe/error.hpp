#pragma once

#include <stdexcept>
#include <string>

namespace pointe {

enum class ErrorCode {
  // point cloud validation
  EmptyCloud,
  NonFiniteCoordinate,
  LabelLengthMismatch,
  // tensor / autodiff
  ShapeMismatch,
  DomainError,
  NotScalarLoss,
  // sampling
  BadSampleCount,
  BadNeighborCount,
  IndexOutOfRange,
  // surface geometry
  TooFewNeighbors,
  NotSymmetric,
  // heads / metrics
  LengthMismatch,
  BadLabel,
  // i/o
  ParseError,
  IoError,
  VersionMismatch,
  // cli configuration
  ConfigError,
};

const char* error_code_name(ErrorCode code);

struct Error : std::runtime_error {
  ErrorCode code;

  Error(ErrorCode c, const std::string& msg)
      : std::runtime_error(std::string(error_code_name(c)) + ": " + msg), code(c) {}
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::NonFiniteCoordinate: return "NonFiniteCoordinate";
    case ErrorCode::LabelLengthMismatch: return "LabelLengthMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::NotScalarLoss: return "NotScalarLoss";
    case ErrorCode::BadSampleCount: return "BadSampleCount";
    case ErrorCode::BadNeighborCount: return "BadNeighborCount";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::TooFewNeighbors: return "TooFewNeighbors";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::BadLabel: return "BadLabel";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "UnknownError";
}

}  // namespace pointe
