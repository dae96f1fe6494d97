#pragma once

#include <stdexcept>
#include <string>

namespace advsnell {

/// Invalid lattice, kernel family or payoff: the model itself violates an invariant.
class ModelError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Bad user input: malformed config, unknown keys, incompatible options.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The exhaustive oracle refuses instances above its enumeration caps.
class BudgetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A mathematical contract (oracle agreement, saddle defect, ...) failed.
class ContractViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace advsnell
