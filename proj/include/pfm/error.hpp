#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pfm {

enum class ErrorCode {
    InvalidArgument,
    DuplicateId,
    InvalidEvent,
    InvalidRange,
    ParseError,
    SchemaVersionMismatch,
    UnresolvedFood,
    ClientUnavailable,
    NotFound,
    MalformedBarcode,
    EmptySamples,
    UnknownIngredient,
    BadProportions,
    NoRatedEvents,
    NoCandidates,
    MissingConfounderValue,
    NoOccurrences,
    NoControls,
    SchemaError,
    InsufficientData,
    NoProfile,
    NoModel,
    Conflict,
    IoError,
};

std::string_view to_string(ErrorCode code);

// Every domain failure in the library surfaces as this type; `code()` is
// stable and is what the service and the CLI report.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace pfm
