#include "mirage/wire.hpp"

#include <bit>
#include <cstring>

namespace mirage {

namespace {

// Little-endian scalar packing. The build targets little-endian hosts; a
// static check keeps the assumption visible.
static_assert(std::endian::native == std::endian::little,
              "wire format assumes a little-endian host");

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(const std::uint8_t* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

bool known_tag(std::uint8_t t) {
    return t >= 1 && t <= 5;
}

}  // namespace

std::vector<std::uint8_t> encode(const TelemetryMessage& msg) {
    std::vector<std::uint8_t> out;
    out.reserve(kWireHeaderSize + msg.payload.size());
    put(out, static_cast<std::uint8_t>(msg.type));
    put(out, msg.step);
    put(out, static_cast<std::uint32_t>(msg.payload.size()));
    out.insert(out.end(), msg.payload.begin(), msg.payload.end());
    return out;
}

DecodeResult decode(const std::vector<std::uint8_t>& bytes) {
    DecodeResult r;
    if (bytes.size() < kWireHeaderSize) {
        r.status = DecodeStatus::kTruncated;
        return r;
    }
    const std::uint8_t tag = bytes[0];
    if (!known_tag(tag)) {
        r.status = DecodeStatus::kUnknownTag;
        return r;
    }
    const auto step = get<std::uint64_t>(bytes.data() + 1);
    const auto len = get<std::uint32_t>(bytes.data() + 9);
    const std::size_t total = kWireHeaderSize + len;
    if (bytes.size() < total) {
        r.status = DecodeStatus::kTruncated;
        return r;
    }
    if (bytes.size() > total) {
        r.status = DecodeStatus::kLengthMismatch;
        return r;
    }
    r.status = DecodeStatus::kOk;
    r.message.type = static_cast<MsgType>(tag);
    r.message.step = step;
    r.message.payload.assign(bytes.begin() + kWireHeaderSize, bytes.end());
    r.consumed = total;
    return r;
}

void StreamDecoder::feed(const std::uint8_t* data, std::size_t len) {
    buffer_.insert(buffer_.end(), data, data + len);
}

DecodeResult StreamDecoder::next() {
    DecodeResult r;
    if (buffer_.size() < kWireHeaderSize) {
        r.status = DecodeStatus::kTruncated;
        return r;
    }
    const std::uint8_t tag = buffer_[0];
    if (!known_tag(tag)) {
        r.status = DecodeStatus::kUnknownTag;
        return r;
    }
    const auto step = get<std::uint64_t>(buffer_.data() + 1);
    const auto len = get<std::uint32_t>(buffer_.data() + 9);
    const std::size_t total = kWireHeaderSize + len;
    if (buffer_.size() < total) {
        r.status = DecodeStatus::kTruncated;
        return r;
    }
    r.status = DecodeStatus::kOk;
    r.message.type = static_cast<MsgType>(tag);
    r.message.step = step;
    r.message.payload.assign(buffer_.begin() + kWireHeaderSize,
                             buffer_.begin() + static_cast<std::ptrdiff_t>(total));
    r.consumed = total;
    buffer_.erase(buffer_.begin(),
                  buffer_.begin() + static_cast<std::ptrdiff_t>(total));
    return r;
}

std::vector<std::uint8_t> payload_from_doubles(const VecX& values) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(values.size()) *
                                  sizeof(double));
    std::memcpy(out.data(), values.data(), out.size());
    return out;
}

VecX doubles_from_payload(const std::vector<std::uint8_t>& payload) {
    if (payload.size() % sizeof(double) != 0) {
        throw IoError("payload size is not a multiple of 8");
    }
    VecX v(static_cast<Eigen::Index>(payload.size() / sizeof(double)));
    std::memcpy(v.data(), payload.data(), payload.size());
    return v;
}

TelemetryMessage make_measurement_msg(std::uint64_t step, const VecX& values) {
    TelemetryMessage m;
    m.type = MsgType::kMeasurement;
    m.step = step;
    m.payload = payload_from_doubles(values);
    return m;
}

TelemetryMessage make_marker_msg(std::uint64_t step,
                                 const MarkerObservation& obs) {
    TelemetryMessage m;
    m.type = MsgType::kMarker;
    m.step = step;
    VecX v(4);
    v << obs.center.x(), obs.center.y(), obs.side_px, obs.visible ? 1.0 : 0.0;
    m.payload = payload_from_doubles(v);
    return m;
}

TelemetryMessage make_frame_msg(std::uint64_t step, const Frame& frame) {
    TelemetryMessage m;
    m.type = MsgType::kFrame;
    m.step = step;
    m.payload.reserve(8 + frame.data.size());
    put(m.payload, static_cast<std::uint32_t>(frame.width));
    put(m.payload, static_cast<std::uint32_t>(frame.height));
    m.payload.insert(m.payload.end(), frame.data.begin(), frame.data.end());
    return m;
}

TelemetryMessage make_rotor_msg(std::uint64_t step, const RotorCommand& u) {
    TelemetryMessage m;
    m.type = MsgType::kRotorCommand;
    m.step = step;
    VecX v(4);
    v << u[0], u[1], u[2], u[3];
    m.payload = payload_from_doubles(v);
    return m;
}

TelemetryMessage make_heartbeat_msg(std::uint64_t step) {
    TelemetryMessage m;
    m.type = MsgType::kHeartbeat;
    m.step = step;
    return m;
}

MarkerObservation marker_from_msg(const TelemetryMessage& msg) {
    if (msg.type != MsgType::kMarker) throw IoError("not a marker message");
    const VecX v = doubles_from_payload(msg.payload);
    if (v.size() != 4) throw IoError("marker payload must hold 4 doubles");
    MarkerObservation obs;
    obs.center = Vec2{v[0], v[1]};
    obs.side_px = v[2];
    obs.visible = v[3] != 0.0;
    return obs;
}

Frame frame_from_msg(const TelemetryMessage& msg) {
    if (msg.type != MsgType::kFrame) throw IoError("not a frame message");
    if (msg.payload.size() < 8) throw IoError("frame payload too short");
    Frame f;
    f.width = static_cast<int>(get<std::uint32_t>(msg.payload.data()));
    f.height = static_cast<int>(get<std::uint32_t>(msg.payload.data() + 4));
    const std::size_t expected =
        static_cast<std::size_t>(f.width) * static_cast<std::size_t>(f.height);
    if (msg.payload.size() != 8 + expected) {
        throw IoError("frame payload size mismatch");
    }
    f.data.assign(msg.payload.begin() + 8, msg.payload.end());
    f.step = msg.step;
    return f;
}

RotorCommand rotor_from_msg(const TelemetryMessage& msg) {
    if (msg.type != MsgType::kRotorCommand) {
        throw IoError("not a rotor command message");
    }
    const VecX v = doubles_from_payload(msg.payload);
    if (v.size() != 4) throw IoError("rotor payload must hold 4 doubles");
    RotorCommand u;
    for (int i = 0; i < 4; ++i) u[i] = v[i];
    return u;
}

}  // namespace mirage
