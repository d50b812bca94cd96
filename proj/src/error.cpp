#include "glpin/error.hpp"

namespace glpin {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::HoleOverlap: return "HoleOverlap";
    case ErrorCode::HoleTooCloseToBoundary: return "HoleTooCloseToBoundary";
    case ErrorCode::NonPositiveRadius: return "NonPositiveRadius";
    case ErrorCode::ResolutionTooCoarse: return "ResolutionTooCoarse";
    case ErrorCode::LoopBroken: return "LoopBroken";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::SingularFluxSystem: return "SingularFluxSystem";
    case ErrorCode::BoxTooSmall: return "BoxTooSmall";
    case ErrorCode::AtThreshold: return "AtThreshold";
    case ErrorCode::NonIntegerCirculation: return "NonIntegerCirculation";
    case ErrorCode::ZeroOnLoop: return "ZeroOnLoop";
    case ErrorCode::AmbiguousWinding: return "AmbiguousWinding";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::DegreeMismatch: return "DegreeMismatch";
    case ErrorCode::BulkVortexFound: return "BulkVortexFound";
  }
  return "UnknownError";
}

}  // namespace glpin
