#pragma once

#include <stdexcept>
#include <string>

namespace dcign {

// Root of every error the library raises. Subclasses name the failure class
// callers are expected to distinguish.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor extents that do not fit the operation.
class DimensionError : public Error {
public:
    using Error::Error;
};

// A network, layout, or training configuration that cannot be realized.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A caller broke an operation's precondition.
class ContractError : public Error {
public:
    using Error::Error;
};

// A numeric argument outside the function's domain.
class DomainError : public Error {
public:
    using Error::Error;
};

// A file that is not what it claims to be (bad magic, unparsable text).
class FormatError : public Error {
public:
    using Error::Error;
};

// A file written by an incompatible format version.
class VersionError : public Error {
public:
    using Error::Error;
};

// A file whose contents are truncated or internally inconsistent.
class CorruptionError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace dcign
