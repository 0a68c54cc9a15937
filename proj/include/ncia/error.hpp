#pragma once

#include <stdexcept>
#include <string>

namespace ncia {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent user configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A cosine factor of the equivalent channel fell below the degeneracy floor.
class DegeneratePhase : public Error {
public:
    using Error::Error;
};

/// The 3-user alignment matrix has complex eigenvalues.
class NoRealAlignment : public Error {
public:
    using Error::Error;
};

/// Desired signal collapses onto the interference subspace, or a cross
/// channel is too ill-conditioned to invert.
class DegenerateAlignment : public Error {
public:
    using Error::Error;
};

/// Rate loading could not satisfy the requested total rate.
class InfeasibleRate : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

} // namespace ncia
