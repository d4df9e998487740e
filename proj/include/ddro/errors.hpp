#pragma once

#include <stdexcept>
#include <string>

namespace ddro {

// Base for every error raised by the kit. The CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: malformed instance, config, or experiment spec.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class NotPsd : public Error {
 public:
  using Error::Error;
};

// Simplex iteration cap hit or basis could not be recovered.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

class UnboundedFactor : public Error {
 public:
  using Error::Error;
};

class SingularBasis : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  using Error::Error;
};

class CutLoopLimit : public Error {
 public:
  using Error::Error;
};

// A dual variable of a reformulated stage sits on its artificial bound and the
// bound is binding. Rerun with a larger dual bound.
class DualAtBound : public Error {
 public:
  using Error::Error;
};

// The ambiguity set is empty at some reachable state. The stage problem is
// unbounded in that case, so this is reported rather than returning -inf.
class EmptyAmbiguity : public Error {
 public:
  explicit EmptyAmbiguity(const std::string& what, int stage = 0)
      : Error(what), stage_(stage) {}
  int stage() const { return stage_; }

 private:
  int stage_;
};

// A stage MILP came back infeasible/unbounded where the model guarantees it cannot.
class SolverFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace ddro
