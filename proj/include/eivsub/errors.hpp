#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace eivsub {

// Error hierarchy shared by the library and the CLI.  Two families:
// configuration/usage problems (CLI exit code 2) and numerical failures
// (CLI exit code 3).
class error : public std::runtime_error {
public:
    error(std::string msg, int exit_code)
        : std::runtime_error(std::move(msg)), code_(exit_code) {}
    int exit_code() const noexcept { return code_; }

private:
    int code_;
};

class config_error : public error {
public:
    explicit config_error(const std::string& msg) : error(msg, 2) {}
};

class schema_error : public config_error {
    using config_error::config_error;
};

class parameter_error : public config_error {
    using config_error::config_error;
};

class dimension_error : public config_error {
    using config_error::config_error;
};

class size_error : public config_error {
    using config_error::config_error;
};

class io_error : public config_error {
    using config_error::config_error;
};

class empty_dataset_error : public config_error {
    using config_error::config_error;
};

class insufficient_replication_error : public config_error {
    using config_error::config_error;
};

class degenerate_column_error : public config_error {
    using config_error::config_error;
};

// Requesting the between-replicate covariance from a single-replicate run.
class variance_unavailable_error : public config_error {
    using config_error::config_error;
};

class numeric_error : public error {
public:
    explicit numeric_error(const std::string& msg) : error(msg, 3) {}
};

// Carries the name of the matrix whose factorization failed.
class singular_system_error : public numeric_error {
public:
    explicit singular_system_error(const std::string& matrix_name,
                                   double rcond = 0.0)
        : numeric_error("singular system: " + matrix_name +
                        " has reciprocal condition estimate " +
                        std::to_string(rcond) + " (< 1e-12)"),
          matrix_name_(matrix_name),
          rcond_(rcond) {}
    const std::string& matrix_name() const noexcept { return matrix_name_; }
    double rcond() const noexcept { return rcond_; }

private:
    std::string matrix_name_;
    double rcond_;
};

// All scores vanished (e.g. every residual is zero), so no sampling
// probabilities can be formed.
class degenerate_plan_error : public numeric_error {
    using numeric_error::numeric_error;
};

class pilot_failure_error : public numeric_error {
    using numeric_error::numeric_error;
};

}  // namespace eivsub
