#pragma once

#include <stdexcept>
#include <string>

namespace beamsim {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-positive or inconsistent optical geometry.
class InvalidLayout : public Error {
 public:
  using Error::Error;
};

/// Numeric overlap grid too coarse or too narrow for the requested incidence.
class GridResolutionError : public Error {
 public:
  using Error::Error;
};

/// Scenario, profile or loop settings that cannot be honoured.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input series too short for the requested estimate.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// Unknown builtin name (profile, preset).
class LookupError : public Error {
 public:
  using Error::Error;
};

/// Random search exhausted its budget below threshold.
class NotFoundError : public Error {
 public:
  NotFoundError(const std::string& what, long evaluations)
      : Error(what), evaluations_(evaluations) {}
  long evaluations() const noexcept { return evaluations_; }

 private:
  long evaluations_;
};

/// Statistic with a zero denominator (e.g. g2 with no accidentals).
class UndefinedStatistic : public Error {
 public:
  using Error::Error;
};

/// P*D failed to come out diagonal.
class GeometryInconsistency : public Error {
 public:
  using Error::Error;
};

/// Two run summaries that do not share an analysis window.
class ComparisonError : public Error {
 public:
  using Error::Error;
};

/// File could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace beamsim
