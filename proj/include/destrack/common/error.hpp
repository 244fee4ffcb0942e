#pragma once

#include <stdexcept>
#include <string>

namespace destrack {

/// Base of every error thrown by the library. Each subclass names one
/// failure family so callers can react without parsing messages.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define DESTRACK_ERROR(Name)                        \
    class Name : public Error {                     \
    public:                                         \
        using Error::Error;                         \
    }

DESTRACK_ERROR(DimensionError);     // raster or tensor too small / mismatched
DESTRACK_ERROR(ConfigError);        // invalid configuration or arguments
DESTRACK_ERROR(LookupError);        // id or date not present
DESTRACK_ERROR(ClassError);         // a required label class is missing
DESTRACK_ERROR(ShapeError);         // tensor shape disagrees with the network spec
DESTRACK_ERROR(NumericError);       // NaN / Inf or non-convergence
DESTRACK_ERROR(StateError);         // operation called in the wrong state
DESTRACK_ERROR(InputError);         // missing or empty input data
DESTRACK_ERROR(CollinearityError);  // rank-deficient regression design
DESTRACK_ERROR(UndefinedError);     // quantity undefined, e.g. precision with no predictions
DESTRACK_ERROR(FormatError);        // malformed file contents

#undef DESTRACK_ERROR

}  // namespace destrack
