#pragma once

#include <stdexcept>
#include <string>

namespace attnlab {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed caller input: empty logit list, non-finite logit, unknown token.
struct InvalidInputError : Error {
    using Error::Error;
};

// Shape or index inconsistency between matrices, vectors and layers.
struct DimensionError : Error {
    using Error::Error;
};

// An evaluation produced a non-finite intermediate. The evaluation is aborted
// rather than letting infinities propagate into verification results.
struct PrecisionError : Error {
    explicit PrecisionError(const std::string& where)
        : Error(where + ": non-finite intermediate; retry with extended precision "
                        "(PrecisionConfig::extended)") {}
};

// Argument outside the mathematical domain of a formula (pole, range gate).
struct DomainError : Error {
    using Error::Error;
};

// A builder cannot realize the requested construction.
struct BuildError : Error {
    using Error::Error;
};

// truth_table met an output that is not a 0/1 token; carries the witness input.
struct NotBooleanError : Error {
    std::string witness;
    NotBooleanError(const std::string& msg, std::string witness_bits)
        : Error(msg + " (witness input: " + witness_bits + ")"),
          witness(std::move(witness_bits)) {}
};

struct CalibrationError : Error {
    using Error::Error;
};

}  // namespace attnlab
