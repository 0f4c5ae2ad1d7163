#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hetdid {

enum class ErrorCode {
  ParseError,
  DuplicateCell,
  UnbalancedPanel,
  EmptySubsample,
  InvalidSubsample,
  PlaceboUndefined,
  NormalizationDegenerate,
  MixedSignDesign,
  AceDegenerate,
  TestInfeasible,
  RankDeficient,
  DesignNotIdentified,
  CoefficientNotIdentified,
  UnstableStatistic,
  DegenerateTest,
  DimensionMismatch,
  Undefined,
  ConfigError,
};

const char* to_string(ErrorCode code);

// Base of every error raised by the library. The CLI maps codes to exit
// statuses, so callers should prefer catching Error over the subclasses
// unless they need the payload.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define HETDID_SIMPLE_ERROR(Name)                                  \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& message)                      \
        : Error(ErrorCode::Name, message) {}                       \
  };

HETDID_SIMPLE_ERROR(ParseError)
HETDID_SIMPLE_ERROR(DuplicateCell)
HETDID_SIMPLE_ERROR(EmptySubsample)
HETDID_SIMPLE_ERROR(InvalidSubsample)
HETDID_SIMPLE_ERROR(PlaceboUndefined)
HETDID_SIMPLE_ERROR(NormalizationDegenerate)
HETDID_SIMPLE_ERROR(MixedSignDesign)
HETDID_SIMPLE_ERROR(AceDegenerate)
HETDID_SIMPLE_ERROR(TestInfeasible)
HETDID_SIMPLE_ERROR(CoefficientNotIdentified)
HETDID_SIMPLE_ERROR(UnstableStatistic)
HETDID_SIMPLE_ERROR(DegenerateTest)
HETDID_SIMPLE_ERROR(DimensionMismatch)
HETDID_SIMPLE_ERROR(Undefined)
HETDID_SIMPLE_ERROR(ConfigError)

#undef HETDID_SIMPLE_ERROR

class UnbalancedPanel : public Error {
 public:
  UnbalancedPanel(const std::string& message, std::vector<std::string> groups)
      : Error(ErrorCode::UnbalancedPanel, message), groups_(std::move(groups)) {}
  // Identifiers of the groups with at least one missing period.
  const std::vector<std::string>& groups() const noexcept { return groups_; }

 private:
  std::vector<std::string> groups_;
};

class RankDeficient : public Error {
 public:
  RankDeficient(const std::string& message, std::vector<double> combination)
      : Error(ErrorCode::RankDeficient, message),
        combination_(std::move(combination)) {}
  // Unit-norm coefficients of the (near) null combination of regressors.
  const std::vector<double>& combination() const noexcept { return combination_; }

 private:
  std::vector<double> combination_;
};

class DesignNotIdentified : public Error {
 public:
  DesignNotIdentified(const std::string& message,
                      std::vector<std::vector<double>> directions)
      : Error(ErrorCode::DesignNotIdentified, message),
        directions_(std::move(directions)) {}
  // Orthonormal basis of the null space of the mean projector.
  const std::vector<std::vector<double>>& directions() const noexcept {
    return directions_;
  }

 private:
  std::vector<std::vector<double>> directions_;
};

}  // namespace hetdid
