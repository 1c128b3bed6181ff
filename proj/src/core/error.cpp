#include "pfm/error.hpp"

namespace pfm {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::InvalidEvent: return "InvalidEvent";
        case ErrorCode::InvalidRange: return "InvalidRange";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
        case ErrorCode::UnresolvedFood: return "UnresolvedFood";
        case ErrorCode::ClientUnavailable: return "ClientUnavailable";
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::MalformedBarcode: return "MalformedBarcode";
        case ErrorCode::EmptySamples: return "EmptySamples";
        case ErrorCode::UnknownIngredient: return "UnknownIngredient";
        case ErrorCode::BadProportions: return "BadProportions";
        case ErrorCode::NoRatedEvents: return "NoRatedEvents";
        case ErrorCode::NoCandidates: return "NoCandidates";
        case ErrorCode::MissingConfounderValue: return "MissingConfounderValue";
        case ErrorCode::NoOccurrences: return "NoOccurrences";
        case ErrorCode::NoControls: return "NoControls";
        case ErrorCode::SchemaError: return "SchemaError";
        case ErrorCode::InsufficientData: return "InsufficientData";
        case ErrorCode::NoProfile: return "NoProfile";
        case ErrorCode::NoModel: return "NoModel";
        case ErrorCode::Conflict: return "Conflict";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace pfm
