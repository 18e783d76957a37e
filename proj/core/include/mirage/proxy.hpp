// MITM telemetry proxy and the split-process simulation/controller
// endpoints. Transport is plain TCP on localhost; one message in flight per
// direction keeps split runs deterministic.
#pragma once

#include "mirage/attack.hpp"
#include "mirage/config.hpp"
#include "mirage/scenario.hpp"
#include "mirage/wire.hpp"

#include <cstdint>
#include <memory>
#include <string>

namespace mirage {

/// host:port pair; host may be empty for listen-on-any.
struct Endpoint {
    std::string host;
    std::uint16_t port{0};

    static Endpoint parse(const std::string& spec);
};

/// Blocking, message-framed TCP connection.
class WireConnection {
  public:
    static WireConnection connect_to(const Endpoint& ep);
    ~WireConnection();
    WireConnection(WireConnection&& other) noexcept;
    WireConnection& operator=(WireConnection&& other) noexcept;
    WireConnection(const WireConnection&) = delete;
    WireConnection& operator=(const WireConnection&) = delete;

    void send(const TelemetryMessage& msg);
    void send_raw(const std::vector<std::uint8_t>& bytes);
    /// Blocks for one whole message; returns false on orderly shutdown.
    bool receive(TelemetryMessage& msg);
    /// Raw bytes as they arrive (pass-through relaying); false on shutdown.
    bool receive_some(std::vector<std::uint8_t>& bytes);

    explicit WireConnection(int fd) : fd_(fd) {}
    int fd() const { return fd_; }

  private:
    int fd_{-1};
    StreamDecoder decoder_;
};

class WireListener {
  public:
    explicit WireListener(const Endpoint& ep);
    ~WireListener();
    WireListener(const WireListener&) = delete;
    WireListener& operator=(const WireListener&) = delete;

    WireConnection accept_one();
    std::uint16_t port() const { return port_; }

  private:
    int fd_{-1};
    std::uint16_t port_{0};
};

enum class ProxyMode { kPass, kAttack };

struct ProxySummary {
    std::uint64_t downstream_messages{0};  // sim -> controller direction
    std::uint64_t upstream_messages{0};
    std::uint64_t falsified_messages{0};
    std::uint64_t bytes_forwarded{0};
    std::int64_t attack_start{-1};
    std::int64_t attack_stop{-1};
    bool clean_shutdown{false};
};

/// Runs one proxy session between an accepted downstream (sim side)
/// connection and the upstream controller endpoint. In pass mode bytes are
/// relayed untouched; in attack mode Measurement/Marker/Frame messages are
/// falsified by the attack engine, which reads RotorCommand messages for u_t.
ProxySummary proxy_session(WireConnection sim_side, WireConnection ctl_side,
                           ProxyMode mode, const ScenarioConfig& cfg);

/// Split-process simulation endpoint: connects to `ctl` (possibly via the
/// proxy) and drives the sensing/actuation loop; writes its view of the run.
void run_sim_endpoint(const ScenarioConfig& cfg, std::uint64_t seed,
                      const Endpoint& connect_to, const std::string& out_dir);

/// Split-process controller endpoint: accepts one connection, runs the
/// controller half, replies with rotor commands; writes its view of the run.
void run_ctl_endpoint(const ScenarioConfig& cfg, const Thresholds& thresholds,
                      std::shared_ptr<const GruModel> recurrent_model,
                      WireListener& listener, const std::string& out_dir);

}  // namespace mirage
