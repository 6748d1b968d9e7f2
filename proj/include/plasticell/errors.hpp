#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace plasticell {

/// Base class of everything the library throws.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed or out-of-domain arguments (dimension mismatch, negative state, ...).
class InvalidInput : public Error {
  public:
    using Error::Error;
};

/// The nonzero equilibrium does not exist because P_inf >= P_lim.
class NonPhysicalEquilibrium : public Error {
  public:
    NonPhysicalEquilibrium(const std::string& what, double ratio)
        : Error(what), ratio_(ratio) {}

    /// P_inf / P_lim of the offending factory; >= 1 whenever this is thrown.
    double ratio() const noexcept { return ratio_; }

  private:
    double ratio_;
};

/// Base class for failures of a numerical procedure (as opposed to bad input).
class NumericalError : public Error {
  public:
    using Error::Error;
};

class SolverError : public NumericalError {
  public:
    SolverError(const std::string& what, std::vector<double> residuals)
        : NumericalError(what), residuals_(std::move(residuals)) {}

    const std::vector<double>& residual_history() const noexcept { return residuals_; }

  private:
    std::vector<double> residuals_;
};

/// Integration produced NaN/inf (or crossed an escape bound).
class DivergenceError : public NumericalError {
  public:
    DivergenceError(const std::string& what, double time, std::vector<double> last_finite)
        : NumericalError(what), time_(time), last_(std::move(last_finite)) {}

    double time() const noexcept { return time_; }
    /// Flattened last finite state, factories first then products.
    const std::vector<double>& last_finite_state() const noexcept { return last_; }

  private:
    double time_;
    std::vector<double> last_;
};

/// A step drove a component negative by more than rounding dust.
class StepSizeError : public NumericalError {
  public:
    StepSizeError(const std::string& what, double time) : NumericalError(what), time_(time) {}
    double time() const noexcept { return time_; }

  private:
    double time_;
};

/// Steady state not reached before the time cap.
class TimeoutError : public NumericalError {
  public:
    TimeoutError(const std::string& what, std::vector<double> final_state)
        : NumericalError(what), final_(std::move(final_state)) {}

    const std::vector<double>& final_state() const noexcept { return final_; }

  private:
    std::vector<double> final_;
};

/// Scenario configuration problem. `where` is a field path like
/// `model.factories[0].G` or `line 4, column 7`.
class ConfigError : public Error {
  public:
    ConfigError(std::string where, const std::string& what)
        : Error(where.empty() ? what : where + ": " + what), where_(std::move(where)), detail_(what) {}

    const std::string& where() const noexcept { return where_; }
    /// The message without the location prefix.
    const std::string& detail() const noexcept { return detail_; }

  private:
    std::string where_;
    std::string detail_;
};

class IoError : public Error {
  public:
    IoError(std::string path, const std::string& what)
        : Error(path + ": " + what), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

  private:
    std::string path_;
};

}  // namespace plasticell
