#pragma once

#include <stdexcept>
#include <string>

namespace mtle {

enum class ErrorKind {
  AllTokensFiltered,
  MalformedRecord,
  UnknownLabel,
  IdOutOfRange,
  EmptyCorpora,
  EmptySequence,
  DimensionMismatch,
  MalformedVectorLine,
  ShapeMismatch,
  NonDeterministicForward,
  GoldOutOfRange,
  UnknownTask,
  NoTrainingData,
  NoTestData,
  NonFiniteLoss,
  DuplicateTaskId,
  TooManyTasks,
  VersionMismatch,
  CorruptCheckpoint,
  IoError,
  InvalidArgument,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::AllTokensFiltered: return "AllTokensFiltered";
    case ErrorKind::MalformedRecord: return "MalformedRecord";
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::IdOutOfRange: return "IdOutOfRange";
    case ErrorKind::EmptyCorpora: return "EmptyCorpora";
    case ErrorKind::EmptySequence: return "EmptySequence";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::MalformedVectorLine: return "MalformedVectorLine";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonDeterministicForward: return "NonDeterministicForward";
    case ErrorKind::GoldOutOfRange: return "GoldOutOfRange";
    case ErrorKind::UnknownTask: return "UnknownTask";
    case ErrorKind::NoTrainingData: return "NoTrainingData";
    case ErrorKind::NoTestData: return "NoTestData";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::DuplicateTaskId: return "DuplicateTaskId";
    case ErrorKind::TooManyTasks: return "TooManyTasks";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "UnknownError";
}

}  // namespace mtle
