#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace coinfect {

enum class ErrorCode {
  // parameter validation
  NonPositiveRate,
  BirthBelowDeath,
  SigmaOrderViolated,
  SigmaTie,
  InfiniteK,
  // classification
  NoMatch,
  MultipleDisjointMatches,
  // lcp
  DimensionTooLarge,
  NotConverged,
  NotPositiveDefinite,
  OracleDisagreement,
  // dynamics
  StepSizeUnderflow,
  NonFiniteState,
  LogOfNonpositive,
  BorderlineGamma,
  InvalidArgument,
  // sweep
  InadmissibleGridPoint,
  NoTransitionInRange,
  // configuration
  ParseError,
  UnknownKey,
  MissingSection,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveRate: return "NonPositiveRate";
    case ErrorCode::BirthBelowDeath: return "BirthBelowDeath";
    case ErrorCode::SigmaOrderViolated: return "SigmaOrderViolated";
    case ErrorCode::SigmaTie: return "SigmaTie";
    case ErrorCode::InfiniteK: return "InfiniteK";
    case ErrorCode::NoMatch: return "NoMatch";
    case ErrorCode::MultipleDisjointMatches: return "MultipleDisjointMatches";
    case ErrorCode::DimensionTooLarge: return "DimensionTooLarge";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::OracleDisagreement: return "OracleDisagreement";
    case ErrorCode::StepSizeUnderflow: return "StepSizeUnderflow";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::LogOfNonpositive: return "LogOfNonpositive";
    case ErrorCode::BorderlineGamma: return "BorderlineGamma";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InadmissibleGridPoint: return "InadmissibleGridPoint";
    case ErrorCode::NoTransitionInRange: return "NoTransitionInRange";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::MissingSection: return "MissingSection";
  }
  return "Unknown";
}

/// True for failures of a numerical method, as opposed to bad input.
constexpr bool is_numerical_failure(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoMatch:
    case ErrorCode::MultipleDisjointMatches:
    case ErrorCode::NotConverged:
    case ErrorCode::OracleDisagreement:
    case ErrorCode::StepSizeUnderflow:
    case ErrorCode::NonFiniteState:
    case ErrorCode::LogOfNonpositive:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace coinfect
