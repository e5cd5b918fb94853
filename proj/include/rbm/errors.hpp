#pragma once

#include <stdexcept>
#include <string>

namespace rbm {

// Error categories used across the library. All derive from the standard
// exception hierarchy so callers can catch broadly.

class InvalidArgument : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// The model configuration cannot support the requested operation
/// (too few particles, p not dividing N, missing charges, ...).
class InvalidModel : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class NumericDomain : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/// A trajectory produced a non-finite state. `level` is the RBM level the
/// failure was detected in, or -1 for the reference solver.
class Divergence : public NumericDomain {
  public:
    Divergence(const std::string& what, int level, double time)
        : NumericDomain(what), level_(level), time_(time)
    {
    }

    int level() const { return level_; }
    double time() const { return time_; }

  private:
    int level_;
    double time_;
};

}  // namespace rbm
