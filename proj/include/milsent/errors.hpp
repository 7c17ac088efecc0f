#pragma once

#include <stdexcept>
#include <string>

namespace milsent {

// Error taxonomy. The CLI maps these onto exit codes, so new error kinds
// should subclass one of the existing categories instead of Error directly.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape/dimension mismatch between tensors.
struct DimensionError : Error {
    using Error::Error;
};

// Invalid configuration value (bad probability, unknown schedule name, ...).
struct ConfigError : Error {
    using Error::Error;
};

// Problems with corpus files, embeddings, annotations or indices into them.
struct DataError : Error {
    using Error::Error;
};

// Malformed input file; carries a line number in the message.
struct ParseError : DataError {
    using DataError::DataError;
};

// API misuse: calling an operation outside its documented contract.
struct ContractError : Error {
    using Error::Error;
};

// Training diverged (non-finite loss).
struct TrainingError : Error {
    using Error::Error;
};

} // namespace milsent
