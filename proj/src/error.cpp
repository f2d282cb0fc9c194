#include "gaitwave/error.hpp"

namespace gaitwave {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedFile: return "MalformedFile";
    case ErrorKind::NonFiniteCoordinate: return "NonFiniteCoordinate";
    case ErrorKind::FrameGap: return "FrameGap";
    case ErrorKind::DegenerateSequence: return "DegenerateSequence";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::InvalidRange: return "InvalidRange";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NotScalar: return "NotScalar";
    case ErrorKind::GraphCycle: return "GraphCycle";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::ZeroEmbedding: return "ZeroEmbedding";
    case ErrorKind::DegenerateBatch: return "DegenerateBatch";
    case ErrorKind::InsufficientIdentities: return "InsufficientIdentities";
    case ErrorKind::EmptyCandidateSet: return "EmptyCandidateSet";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace gaitwave
