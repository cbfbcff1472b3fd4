#pragma once

#include <stdexcept>
#include <string>

namespace ffevss {

// Invalid generator / training configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed instance, checkpoint or CSV input.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Well-formed input that breaks a domain invariant.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An action outside the legal set was submitted to the simulator.
struct FeasibilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Caller broke an API precondition (e.g. acting for a busy shuttle).
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

// No open demander is left for an EV.
struct InfeasibleRelocation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The EV needs a charger but none is free right now.
struct BlockedRelocation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN / Inf showed up in parameters, gradients or losses.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exhaustive search refused because the instance exceeds configured caps.
struct LimitExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ffevss
