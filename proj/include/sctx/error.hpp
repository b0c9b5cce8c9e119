#pragma once

#include <stdexcept>
#include <string>

namespace sctx {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

}  // namespace sctx
