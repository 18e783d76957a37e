#include "mirage/proxy.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>

namespace mirage {

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
    throw IoError(what + ": " + std::strerror(errno));
}

void set_nodelay(int fd) {
    int one = 1;
    setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

}  // namespace

Endpoint Endpoint::parse(const std::string& spec) {
    const std::size_t colon = spec.rfind(':');
    if (colon == std::string::npos) {
        throw ConfigError("endpoint must be host:port, got '" + spec + "'");
    }
    Endpoint ep;
    ep.host = spec.substr(0, colon);
    const std::string port_str = spec.substr(colon + 1);
    try {
        const int port = std::stoi(port_str);
        if (port <= 0 || port > 65535) throw std::out_of_range("port");
        ep.port = static_cast<std::uint16_t>(port);
    } catch (const std::exception&) {
        throw ConfigError("invalid port in endpoint '" + spec + "'");
    }
    return ep;
}

WireConnection WireConnection::connect_to(const Endpoint& ep) {
    const int fd = socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw_errno("socket");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(ep.port);
    const std::string host = ep.host.empty() ? "127.0.0.1" : ep.host;
    if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        close(fd);
        throw IoError("cannot parse address: " + host);
    }
    // Retry briefly so process start order does not matter.
    int attempts = 0;
    while (connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        if (++attempts > 200) {
            close(fd);
            throw_errno("connect to " + host + ":" + std::to_string(ep.port));
        }
        usleep(50 * 1000);
    }
    set_nodelay(fd);
    return WireConnection(fd);
}

WireConnection::~WireConnection() {
    if (fd_ >= 0) close(fd_);
}

WireConnection::WireConnection(WireConnection&& other) noexcept
    : fd_(other.fd_), decoder_(std::move(other.decoder_)) {
    other.fd_ = -1;
}

WireConnection& WireConnection::operator=(WireConnection&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) close(fd_);
        fd_ = other.fd_;
        decoder_ = std::move(other.decoder_);
        other.fd_ = -1;
    }
    return *this;
}

void WireConnection::send_raw(const std::vector<std::uint8_t>& bytes) {
    std::size_t sent = 0;
    while (sent < bytes.size()) {
        const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent,
                                 MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw_errno("send");
        }
        sent += static_cast<std::size_t>(n);
    }
}

void WireConnection::send(const TelemetryMessage& msg) {
    send_raw(encode(msg));
}

bool WireConnection::receive(TelemetryMessage& msg) {
    for (;;) {
        DecodeResult r = decoder_.next();
        if (r.status == DecodeStatus::kOk) {
            msg = std::move(r.message);
            return true;
        }
        if (r.status == DecodeStatus::kUnknownTag) {
            throw IoError("malformed message on wire");
        }
        std::uint8_t buf[65536];
        const ssize_t n = recv(fd_, buf, sizeof(buf), 0);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw_errno("recv");
        }
        if (n == 0) {
            if (decoder_.buffered() > 0) {
                throw IoError("connection closed mid-message");
            }
            return false;
        }
        decoder_.feed(buf, static_cast<std::size_t>(n));
    }
}

bool WireConnection::receive_some(std::vector<std::uint8_t>& bytes) {
    std::uint8_t buf[65536];
    for (;;) {
        const ssize_t n = recv(fd_, buf, sizeof(buf), 0);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw_errno("recv");
        }
        if (n == 0) return false;
        bytes.assign(buf, buf + n);
        return true;
    }
}

WireListener::WireListener(const Endpoint& ep) {
    fd_ = socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw_errno("socket");
    int one = 1;
    setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(ep.port);
    if (ep.host.empty() || ep.host == "0.0.0.0") {
        addr.sin_addr.s_addr = htonl(INADDR_ANY);
    } else if (inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) != 1) {
        close(fd_);
        throw IoError("cannot parse listen address: " + ep.host);
    }
    if (bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        close(fd_);
        throw_errno("bind " + ep.host + ":" + std::to_string(ep.port));
    }
    if (listen(fd_, 4) != 0) {
        close(fd_);
        throw_errno("listen");
    }
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);
}

WireListener::~WireListener() {
    if (fd_ >= 0) close(fd_);
}

WireConnection WireListener::accept_one() {
    for (;;) {
        const int fd = accept(fd_, nullptr, nullptr);
        if (fd < 0) {
            if (errno == EINTR) continue;
            throw_errno("accept");
        }
        set_nodelay(fd);
        return WireConnection(fd);
    }
}

namespace {

// Raw bidirectional relay; byte streams are forwarded untouched.
ProxySummary relay_pass_through(WireConnection& sim_side,
                                WireConnection& ctl_side) {
    ProxySummary summary;
    pollfd fds[2];
    fds[0] = {sim_side.fd(), POLLIN, 0};
    fds[1] = {ctl_side.fd(), POLLIN, 0};
    bool open[2] = {true, true};
    std::vector<std::uint8_t> buf;
    while (open[0] || open[1]) {
        fds[0].events = open[0] ? POLLIN : 0;
        fds[1].events = open[1] ? POLLIN : 0;
        if (poll(fds, 2, -1) < 0) {
            if (errno == EINTR) continue;
            throw_errno("poll");
        }
        for (int i = 0; i < 2; ++i) {
            if (!open[i] || !(fds[i].revents & (POLLIN | POLLHUP))) continue;
            WireConnection& from = i == 0 ? sim_side : ctl_side;
            WireConnection& to = i == 0 ? ctl_side : sim_side;
            if (!from.receive_some(buf)) {
                open[i] = false;
                // Orderly end of the session: stop once either side closes.
                open[0] = open[1] = false;
                summary.clean_shutdown = true;
                break;
            }
            to.send_raw(buf);
            summary.bytes_forwarded += buf.size();
        }
    }
    return summary;
}

}  // namespace

ProxySummary proxy_session(WireConnection sim_side, WireConnection ctl_side,
                           ProxyMode mode, const ScenarioConfig& cfg) {
    if (mode == ProxyMode::kPass) {
        return relay_pass_through(sim_side, ctl_side);
    }

    AttackEngine::Deps deps;
    deps.vehicle = cfg.vehicle;
    deps.camera = cfg.camera;
    deps.marker_side_m = cfg.marker_side;
    deps.dt = cfg.dt;
    deps.ekf = cfg.ekf_params();
    deps.tracker = cfg.vision.tracker;
    deps.mission = cfg.mission;
    deps.cruise_alt = cfg.mission_params.cruise_alt;
    deps.cruise_band = cfg.mission_params.cruise_band;
    AttackEngine engine(deps, cfg.attack);

    ProxySummary summary;
    TelemetryMessage msg;
    for (;;) {
        // Downstream: Measurement, Marker, Frame for one step (or Heartbeat).
        if (!sim_side.receive(msg)) break;
        ++summary.downstream_messages;
        if (msg.type == MsgType::kHeartbeat) {
            ctl_side.send(msg);
            summary.clean_shutdown = true;
            break;
        }
        if (msg.type != MsgType::kMeasurement) {
            throw IoError("attack proxy: expected measurement message");
        }
        Measurement y;
        y.values = doubles_from_payload(msg.payload);
        y.step = msg.step;

        if (!sim_side.receive(msg) || msg.type != MsgType::kMarker) {
            throw IoError("attack proxy: expected marker message");
        }
        ++summary.downstream_messages;
        const MarkerObservation obs = marker_from_msg(msg);

        if (!sim_side.receive(msg) || msg.type != MsgType::kFrame) {
            throw IoError("attack proxy: expected frame message");
        }
        ++summary.downstream_messages;
        Frame frame = frame_from_msg(msg);

        const AttackEngine::SensingResult ar =
            engine.process_sensing(y.step, y, obs);
        if (ar.falsified) {
            ++summary.falsified_messages;
            ctl_side.send(make_measurement_msg(y.step, ar.y_f));
            ctl_side.send(make_marker_msg(y.step, ar.obs_f));
            ctl_side.send(make_frame_msg(y.step, ar.frame_f));
        } else {
            ctl_side.send(make_measurement_msg(y.step, ar.y_f));
            ctl_side.send(make_marker_msg(y.step, obs));
            ctl_side.send(make_frame_msg(y.step, frame));
        }

        // Upstream: one rotor command (or Heartbeat on mission completion).
        if (!ctl_side.receive(msg)) break;
        ++summary.upstream_messages;
        if (msg.type == MsgType::kHeartbeat) {
            sim_side.send(msg);
            summary.clean_shutdown = true;
            break;
        }
        if (msg.type != MsgType::kRotorCommand) {
            throw IoError("attack proxy: expected rotor command");
        }
        engine.process_command(rotor_from_msg(msg));
        sim_side.send(msg);
    }

    if (engine.state().active || engine.state().stopped) {
        summary.attack_start =
            static_cast<std::int64_t>(engine.state().start_step);
        if (engine.state().stopped) {
            summary.attack_stop =
                summary.attack_start + engine.state().steps_since_start;
        }
    }
    return summary;
}

void run_sim_endpoint(const ScenarioConfig& cfg, std::uint64_t seed,
                      const Endpoint& connect_to, const std::string& out_dir) {
    WireConnection conn = WireConnection::connect_to(connect_to);
    SimHalf sim(cfg, seed);
    const auto n_steps =
        static_cast<std::uint64_t>(std::llround(cfg.duration / cfg.dt));

    RunRecord record;
    record.seed = seed;

    TelemetryMessage msg;
    for (std::uint64_t t = 0; t < n_steps; ++t) {
        const SimHalf::Output so = sim.emit(t);
        conn.send(make_measurement_msg(t, so.y.values));
        conn.send(make_marker_msg(t, so.obs));
        conn.send(make_frame_msg(t, so.frame));

        if (!conn.receive(msg)) break;
        StepLog log;
        log.step = t;
        log.truth = so.truth.to_vector();
        log.y = so.y.values;
        log.p_cam_true = so.p_cam_true;
        log.marker_earth = so.marker_earth;
        log.true_visible = so.true_visible;

        if (msg.type == MsgType::kHeartbeat) {
            record.steps.push_back(std::move(log));
            break;
        }
        const RotorCommand u = rotor_from_msg(msg);
        log.command = u;
        record.steps.push_back(std::move(log));

        if (t + 1 < n_steps) {
            sim.advance(u);
        } else {
            conn.send(make_heartbeat_msg(t));
        }
    }

    record.summary.steps = record.steps.size();
    std::filesystem::create_directories(out_dir);
    export_run_csv(record, out_dir + "/sim_run.csv");
    export_run_summary(record, out_dir + "/sim_summary.txt");
}

void run_ctl_endpoint(const ScenarioConfig& cfg, const Thresholds& thresholds,
                      std::shared_ptr<const GruModel> recurrent_model,
                      WireListener& listener, const std::string& out_dir) {
    WireConnection conn = listener.accept_one();
    CtlHalf ctl(cfg, thresholds, std::move(recurrent_model));

    RunRecord record;
    record.seed = cfg.seed;

    TelemetryMessage msg;
    for (;;) {
        if (!conn.receive(msg)) break;
        if (msg.type == MsgType::kHeartbeat) break;
        if (msg.type != MsgType::kMeasurement) {
            throw IoError("controller: expected measurement message");
        }
        Measurement y;
        y.values = doubles_from_payload(msg.payload);
        y.step = msg.step;

        if (!conn.receive(msg) || msg.type != MsgType::kMarker) {
            throw IoError("controller: expected marker message");
        }
        const MarkerObservation obs = marker_from_msg(msg);
        if (!conn.receive(msg) || msg.type != MsgType::kFrame) {
            throw IoError("controller: expected frame message");
        }

        const CtlHalf::Output co = ctl.step(y.step, y, obs);

        StepLog log;
        log.step = y.step;
        log.phase = static_cast<int>(co.phase);
        log.sys_estimate = co.estimate;
        log.y_f = y.values;
        log.p_cam_seen = co.p_cam_seen;
        log.seen_visible = co.seen_visible;
        log.obs_center_px = obs.center;
        log.obs_side_px = obs.side_px;
        log.phys_residual = co.phys_residual;
        log.chi2_score = co.chi2_score;
        log.chi2_df = co.chi2_df;
        log.chi2_alarm = co.chi2_alarm;
        log.cusum_stat = co.cusum_stat;
        log.cusum_alarm = co.cusum_alarm;
        log.recurrent_score = co.recurrent_score;
        log.recurrent_alarm = co.recurrent_alarm;
        log.recurrent_armed = co.recurrent_armed;
        log.vision_score = co.vision_score;
        log.vision_gated = co.vision_gated;
        log.recurrent_input = co.recurrent_input;
        log.command = co.command;
        log.saturated = co.saturated;
        record.steps.push_back(std::move(log));

        if (co.mission_complete) {
            conn.send(make_heartbeat_msg(y.step));
            break;
        }
        conn.send(make_rotor_msg(y.step, co.command));
    }

    record.summary.steps = record.steps.size();
    std::filesystem::create_directories(out_dir);
    export_run_csv(record, out_dir + "/ctl_run.csv");
    export_run_summary(record, out_dir + "/ctl_summary.txt");
}

}  // namespace mirage
