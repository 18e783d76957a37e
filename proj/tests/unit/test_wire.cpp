#include "mirage/wire.hpp"

#include <doctest.h>

#include <random>

using namespace mirage;

namespace {

TelemetryMessage random_message(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> type(1, 5);
    std::uniform_int_distribution<int> len(0, 64);
    std::uniform_int_distribution<int> byte(0, 255);
    TelemetryMessage m;
    m.type = static_cast<MsgType>(type(rng));
    m.step = rng();
    const int n = m.type == MsgType::kHeartbeat ? 0 : len(rng);
    for (int i = 0; i < n; ++i) {
        m.payload.push_back(static_cast<std::uint8_t>(byte(rng)));
    }
    return m;
}

}  // namespace

TEST_CASE("encode/decode round trip is exact") {
    std::mt19937_64 rng(77);
    for (int i = 0; i < 200; ++i) {
        const TelemetryMessage m = random_message(rng);
        const DecodeResult r = decode(encode(m));
        REQUIRE(r.status == DecodeStatus::kOk);
        CHECK(r.message == m);
        CHECK(r.consumed == kWireHeaderSize + m.payload.size());
    }

    // A 12-double measurement survives bitwise.
    VecX v(12);
    for (int i = 0; i < 12; ++i) v[i] = std::ldexp(1.0 + i, -i) * 3.14159;
    const TelemetryMessage m = make_measurement_msg(9, v);
    const DecodeResult r = decode(encode(m));
    REQUIRE(r.status == DecodeStatus::kOk);
    CHECK(doubles_from_payload(r.message.payload) == v);
}

TEST_CASE("heartbeat encodes to exactly 13 bytes") {
    const TelemetryMessage hb = make_heartbeat_msg(42);
    CHECK(encode(hb).size() == 13);
}

TEST_CASE("decode errors are distinct values") {
    const TelemetryMessage m = make_rotor_msg(1, RotorCommand{});
    std::vector<std::uint8_t> bytes = encode(m);

    // Truncation: any strict prefix fails without emitting a message.
    for (size_t cut = 0; cut < bytes.size(); ++cut) {
        std::vector<std::uint8_t> prefix(bytes.begin(),
                                         bytes.begin() + static_cast<long>(cut));
        CHECK(decode(prefix).status == DecodeStatus::kTruncated);
    }

    // Unknown tag.
    std::vector<std::uint8_t> bad = bytes;
    bad[0] = 99;
    CHECK(decode(bad).status == DecodeStatus::kUnknownTag);

    // Length mismatch: trailing bytes after a whole message.
    std::vector<std::uint8_t> extra = bytes;
    extra.push_back(0);
    CHECK(decode(extra).status == DecodeStatus::kLengthMismatch);
}

TEST_CASE("stream decoding: any prefix yields whole messages plus a short residue") {
    std::mt19937_64 rng(5);
    std::vector<TelemetryMessage> msgs;
    std::vector<std::uint8_t> stream;
    for (int i = 0; i < 20; ++i) {
        msgs.push_back(random_message(rng));
        const auto bytes = encode(msgs.back());
        stream.insert(stream.end(), bytes.begin(), bytes.end());
    }

    std::uniform_int_distribution<size_t> cut_dist(0, stream.size());
    for (int trial = 0; trial < 50; ++trial) {
        const size_t cut = cut_dist(rng);
        StreamDecoder dec;
        dec.feed(stream.data(), cut);
        size_t count = 0;
        size_t consumed = 0;
        for (;;) {
            const DecodeResult r = dec.next();
            if (r.status != DecodeStatus::kOk) {
                REQUIRE(r.status == DecodeStatus::kTruncated);
                break;
            }
            CHECK(r.message == msgs[count]);
            consumed += r.consumed;
            ++count;
        }
        // Residue is shorter than the next whole message.
        const size_t residue = cut - consumed;
        if (count < msgs.size()) {
            CHECK(residue < kWireHeaderSize + msgs[count].payload.size());
        } else {
            CHECK(residue == 0);
        }
    }
}

TEST_CASE("typed payload converters round trip") {
    MarkerObservation obs;
    obs.center = Vec2{-12.5, 300.25};
    obs.side_px = 88.125;
    obs.visible = true;
    const MarkerObservation obs2 = marker_from_msg(make_marker_msg(3, obs));
    CHECK(obs2.center == obs.center);
    CHECK(obs2.side_px == obs.side_px);
    CHECK(obs2.visible == obs.visible);

    Frame f;
    f.width = 8;
    f.height = 4;
    f.data.resize(32);
    for (size_t i = 0; i < f.data.size(); ++i) {
        f.data[i] = static_cast<std::uint8_t>(i * 7);
    }
    const Frame f2 = frame_from_msg(make_frame_msg(4, f));
    CHECK(f2.width == f.width);
    CHECK(f2.height == f.height);
    CHECK(f2.data == f.data);

    RotorCommand u;
    u[0] = 1.5e5;
    u[3] = 2.25e5;
    const RotorCommand u2 = rotor_from_msg(make_rotor_msg(5, u));
    CHECK(u2.w_sq == u.w_sq);

    CHECK_THROWS_AS(marker_from_msg(make_heartbeat_msg(0)), IoError);
    TelemetryMessage corrupt = make_frame_msg(1, f);
    corrupt.payload.pop_back();
    CHECK_THROWS_AS(frame_from_msg(corrupt), IoError);
}
