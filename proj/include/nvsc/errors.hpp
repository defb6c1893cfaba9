#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace nvsc {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// scene-model
struct EmptyScene : Error { using Error::Error; };
struct InvalidBounds : Error { using Error::Error; };
struct SceneParseError : Error { using Error::Error; };
struct MalformedScene : SceneParseError { using SceneParseError::SceneParseError; };
struct TruncatedScene : SceneParseError { using SceneParseError::SceneParseError; };
struct InvariantViolation : SceneParseError { using SceneParseError::SceneParseError; };

// objectives
struct ShapeMismatch : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct InsufficientMatches : Error {
  InsufficientMatches(std::size_t found, std::size_t required)
      : Error("insufficient matches: " + std::to_string(found) + " < " +
              std::to_string(required)),
        found(found), required(required) {}
  std::size_t found;
  std::size_t required;
};

// optimize
struct NumericalFailure : Error {
  NumericalFailure(const std::string& what, std::vector<double> best_x, double best_loss)
      : Error(what), best_x(std::move(best_x)), best_loss(best_loss) {}
  std::vector<double> best_x;
  double best_loss;
};

// residual-codec
struct CodecParseError : Error {
  CodecParseError(const std::string& what, std::size_t offset)
      : Error(what + " at byte " + std::to_string(offset)), offset(offset) {}
  std::size_t offset;
};

// link-protocol
struct PacketError : Error { using Error::Error; };
struct UnsupportedPacket : PacketError { using PacketError::PacketError; };
struct CorruptPacket : PacketError { using PacketError::PacketError; };
struct TruncatedPacket : PacketError { using PacketError::PacketError; };

}  // namespace nvsc
