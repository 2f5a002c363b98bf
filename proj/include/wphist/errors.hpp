#pragma once

#include <stdexcept>
#include <string>

namespace wphist {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Dimension or divisibility violations (wrong lengths, ragged grids).
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Bad user-supplied parameter values (fractions, levels, alphas).
class InvalidParameterError : public Error {
public:
    using Error::Error;
};

/// Degenerate or unusable data (zero-variance columns, non-finite input).
class DataError : public Error {
public:
    using Error::Error;
};

/// Numerical breakdown inside an algorithm (non-finite estimates,
/// failed decompositions).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Violated call contract, e.g. a packet surface with nonzero entries
/// outside the historical mask.
class ContractViolationError : public Error {
public:
    using Error::Error;
};

/// File persistence problems: bad magic, truncated payload, broken trailer.
class PersistenceError : public Error {
public:
    using Error::Error;
};

} // namespace wphist
