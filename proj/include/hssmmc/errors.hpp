#pragma once

#include <stdexcept>
#include <string>

namespace hssmmc {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad inputs: parameters, configuration, lookups. CLI exit code 2.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

// Failures discovered while computing. CLI exit code 3.
class NumericalError : public Error {
public:
    using Error::Error;
};

class InvalidParameter : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class ModulationOutOfRange : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class UnknownVariable : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class OrderMismatch : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class DimensionMismatch : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class InsufficientSamples : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class SchemaViolation : public InvalidArgument {
public:
    SchemaViolation(const std::string& msg, int line = 0, std::string field = {})
        : InvalidArgument(format(msg, line, field)), line_(line), field_(std::move(field)) {}

    int line() const noexcept { return line_; }
    const std::string& field() const noexcept { return field_; }

private:
    static std::string format(const std::string& msg, int line, const std::string& field) {
        std::string out;
        if (line > 0) out += "line " + std::to_string(line) + ": ";
        if (!field.empty()) out += "'" + field + "': ";
        return out + msg;
    }

    int line_;
    std::string field_;
};

class ResidualImaginary : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class SingularSystem : public NumericalError {
public:
    SingularSystem(const std::string& msg, double condition)
        : NumericalError(msg), condition_(condition) {}
    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

class StepTooLarge : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class NumericalBlowup : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class NotSettled : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ConvergenceFailure : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace hssmmc
