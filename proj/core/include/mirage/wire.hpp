// Binary telemetry wire protocol: [u8 type][u64 step][u32 payload length]
// [payload], all integers and floats little-endian.
#pragma once

#include "mirage/dynamics.hpp"
#include "mirage/perception.hpp"
#include "mirage/types.hpp"

#include <cstdint>
#include <vector>

namespace mirage {

enum class MsgType : std::uint8_t {
    kMeasurement = 1,
    kMarker = 2,
    kFrame = 3,
    kRotorCommand = 4,
    kHeartbeat = 5,
};

struct TelemetryMessage {
    MsgType type{MsgType::kHeartbeat};
    std::uint64_t step{0};
    std::vector<std::uint8_t> payload;

    bool operator==(const TelemetryMessage&) const = default;
};

inline constexpr std::size_t kWireHeaderSize = 1 + 8 + 4;

std::vector<std::uint8_t> encode(const TelemetryMessage& msg);

enum class DecodeStatus {
    kOk,
    kTruncated,       // buffer shorter than the declared message
    kUnknownTag,
    kLengthMismatch,  // trailing bytes after a whole message
};

struct DecodeResult {
    DecodeStatus status{DecodeStatus::kTruncated};
    TelemetryMessage message;
    std::size_t consumed{0};
};

/// Decodes exactly one message that must span the whole buffer.
DecodeResult decode(const std::vector<std::uint8_t>& bytes);

/// Pulls whole messages off a growing byte stream, leaving the residue.
class StreamDecoder {
  public:
    void feed(const std::uint8_t* data, std::size_t len);
    /// kOk with a message, kTruncated when more bytes are needed, or
    /// kUnknownTag on a malformed stream.
    DecodeResult next();
    std::size_t buffered() const { return buffer_.size(); }

  private:
    std::vector<std::uint8_t> buffer_;
};

// Payload helpers.
std::vector<std::uint8_t> payload_from_doubles(const VecX& values);
VecX doubles_from_payload(const std::vector<std::uint8_t>& payload);

TelemetryMessage make_measurement_msg(std::uint64_t step, const VecX& values);
TelemetryMessage make_marker_msg(std::uint64_t step,
                                 const MarkerObservation& obs);
TelemetryMessage make_frame_msg(std::uint64_t step, const Frame& frame);
TelemetryMessage make_rotor_msg(std::uint64_t step, const RotorCommand& u);
TelemetryMessage make_heartbeat_msg(std::uint64_t step);

MarkerObservation marker_from_msg(const TelemetryMessage& msg);
Frame frame_from_msg(const TelemetryMessage& msg);
RotorCommand rotor_from_msg(const TelemetryMessage& msg);

}  // namespace mirage
