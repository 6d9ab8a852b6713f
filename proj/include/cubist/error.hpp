#pragma once

#include <stdexcept>
#include <string>

namespace cubist {

/// Base class for every error raised by the library.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A reduction spec, window, or rate that cannot be applied to the given grid.
class invalid_spec_error : public error {
public:
    using error::error;
};

/// The requested number of merges exceeds what a line or region can supply.
class infeasible_rate_error : public invalid_spec_error {
public:
    using invalid_spec_error::invalid_spec_error;
};

/// A path line shorter than two tokens.
class invalid_line_error : public invalid_spec_error {
public:
    using invalid_spec_error::invalid_spec_error;
};

/// Tokens of different dimensionality handed to one operation.
class dimension_mismatch_error : public error {
public:
    using error::error;
};

/// Grid file that fails header, length, or payload validation.
class malformed_file_error : public error {
public:
    using error::error;
};

/// A token layout that cannot be tiled by the requested attention window.
/// This is the observable failure of unstructured merging.
class spatial_incompatibility_error : public error {
public:
    using error::error;
};

} // namespace cubist
