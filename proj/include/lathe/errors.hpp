#pragma once

#include <stdexcept>
#include <string>

namespace lathe {

// Bad sizes for topology builders (p < 2, odd HMM size, ...).
struct invalid_size : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct invalid_argument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A node pair was never jointly observed. Distinct from a zero correlation.
struct no_data : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct domain_error : std::domain_error {
  using std::domain_error::domain_error;
};

// The exponential-tilt family cannot reach E_Q[g] <= 0.
struct infeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Budget overdraw. This is a programming bug, never a data condition.
struct ledger_violation : std::logic_error {
  using std::logic_error::logic_error;
};

struct too_large : std::length_error {
  using std::length_error::length_error;
};

struct insufficient_data : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace lathe
