#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ca50 {

// Bad physical inputs or violated operation preconditions.
struct ModelDomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Oxygen-fraction denominator too small to resolve an EGR fraction.
struct IllConditionedSensingError : ModelDomainError {
    using ModelDomainError::ModelDomainError;
};

// Knock integral never reached unity within the supplied trace.
struct NoIgnitionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed configuration, coefficient or dataset files.  Maps to CLI
// exit status 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Virtual-engine abort (e.g. sustained misfire).  Maps to CLI exit
// status 3.
struct PlantAbort : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Optimizer diverged; carries the per-iteration RMSE log.
struct OptimizerFailure : std::runtime_error {
    explicit OptimizerFailure(const std::string& what, std::vector<double> log)
        : std::runtime_error(what), rmse_log(std::move(log)) {}
    std::vector<double> rmse_log;
};

}  // namespace ca50
