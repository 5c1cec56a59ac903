#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace nhep {

/// Coarse classification used by the CLI to pick an exit code.
enum class ErrorKind {
  Usage,      ///< bad input, violated precondition
  Domain,     ///< physically meaningful refusal (e.g. dilation window exceeded)
  Numerical,  ///< solver or iteration failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

// Domain errors

/// M(t) - I lost positive semidefiniteness: the dilation cannot be continued past `time`.
struct MetricNotPositive : Error {
  MetricNotPositive(double time, double min_eigenvalue)
      : Error(ErrorKind::Domain, message(time, min_eigenvalue)),
        time(time),
        min_eigenvalue(min_eigenvalue) {}
  double time;
  double min_eigenvalue;

 private:
  static std::string message(double t, double lmin) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "MetricNotPositive: M(t)-I has eigenvalue %.3g at t=%.9g s; shorten the window or raise eta0", lmin, t);
    return buf;
  }
};

struct NonPositiveTransition : Error {
  explicit NonPositiveTransition(const std::string& what) : Error(ErrorKind::Domain, what) {}
};

/// Point lies on (or within tolerance of) the exceptional line.
struct OnLocus : Error {
  explicit OnLocus(const std::string& what) : Error(ErrorKind::Domain, what) {}
};

struct SingularShift : Error {
  explicit SingularShift(const std::string& what) : Error(ErrorKind::Domain, what) {}
};

struct SingularSystem : Error {
  explicit SingularSystem(const std::string& what) : Error(ErrorKind::Domain, what) {}
};

struct NoSolution : Error {
  explicit NoSolution(const std::string& what) : Error(ErrorKind::Domain, what) {}
};

// Numerical errors

struct NoConvergence : Error {
  explicit NoConvergence(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

struct NumericalOverflow : Error {
  explicit NumericalOverflow(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

struct IllConditioned : Error {
  explicit IllConditioned(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

struct StepTooCoarse : Error {
  explicit StepTooCoarse(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

struct WindowTooWide : Error {
  explicit WindowTooWide(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

struct DegenerateFit : Error {
  explicit DegenerateFit(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

}  // namespace nhep
