#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace vcube {

enum class ErrorCode {
  // raster / format
  NoOverlap,
  MalformedFile,
  // catalog
  DuplicateScene,
  MissingBand,
  GridMismatch,
  DuplicateProduct,
  ValidationFailed,
  // pipeline
  SyntaxError,
  UnknownOp,
  UnknownParam,
  ArityMismatch,
  DanglingRef,
  CycleDetected,
  // ops
  EmptyStack,
  BadWindow,
  AllNodata,
  // executor
  UnknownProduct,
  NoScenes,
  MissingSynthesisParams,
  FetchFailed,
  CacheCorrupt,
  BadRequest,
  // scenegen
  BadTemplate,
  // misc
  IoError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  Error(ErrorCode code, std::string message, std::vector<std::string> details)
      : Error(code, std::move(message)) {
    details_ = std::move(details);
  }

  ErrorCode code() const { return code_; }

  // Extra context, e.g. the node ids of a detected cycle.
  const std::vector<std::string>& details() const { return details_; }

 private:
  ErrorCode code_;
  std::vector<std::string> details_;
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::DuplicateScene: return "DuplicateScene";
    case ErrorCode::MissingBand: return "MissingBand";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::DuplicateProduct: return "DuplicateProduct";
    case ErrorCode::ValidationFailed: return "ValidationFailed";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::UnknownOp: return "UnknownOp";
    case ErrorCode::UnknownParam: return "UnknownParam";
    case ErrorCode::ArityMismatch: return "ArityMismatch";
    case ErrorCode::DanglingRef: return "DanglingRef";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::EmptyStack: return "EmptyStack";
    case ErrorCode::BadWindow: return "BadWindow";
    case ErrorCode::AllNodata: return "AllNodata";
    case ErrorCode::UnknownProduct: return "UnknownProduct";
    case ErrorCode::NoScenes: return "NoScenes";
    case ErrorCode::MissingSynthesisParams: return "MissingSynthesisParams";
    case ErrorCode::FetchFailed: return "FetchFailed";
    case ErrorCode::CacheCorrupt: return "CacheCorrupt";
    case ErrorCode::BadRequest: return "BadRequest";
    case ErrorCode::BadTemplate: return "BadTemplate";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace vcube
