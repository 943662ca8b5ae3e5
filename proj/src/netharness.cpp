#include "iontele/netharness.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <condition_variable>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace iontele::net {

using nlohmann::json;

namespace {

constexpr auto kWaitBudget = std::chrono::seconds(30);

[[noreturn]] void sys_fail(const std::string& what) {
    throw std::runtime_error(what + ": " + std::strerror(errno));
}

// Blocking stream socket with line-oriented framing.
class LineSocket {
public:
    LineSocket() = default;
    explicit LineSocket(int fd) : fd_(fd) {}
    LineSocket(const LineSocket&) = delete;
    LineSocket& operator=(const LineSocket&) = delete;
    LineSocket(LineSocket&& o) noexcept : fd_(o.fd_), buf_(std::move(o.buf_)) { o.fd_ = -1; }
    ~LineSocket() { close(); }

    void close() {
        if (fd_ >= 0) {
            ::shutdown(fd_, SHUT_RDWR);
            ::close(fd_);
            fd_ = -1;
        }
    }

    bool valid() const { return fd_ >= 0; }
    int fd() const { return fd_; }

    void send_line(const std::string& line) {
        std::string framed = line + "\n";
        std::size_t off = 0;
        while (off < framed.size()) {
            ssize_t n = ::send(fd_, framed.data() + off, framed.size() - off, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                sys_fail("send");
            }
            off += static_cast<std::size_t>(n);
        }
    }

    // False on orderly peer shutdown.
    bool recv_line(std::string& line) {
        for (;;) {
            auto nl = buf_.find('\n');
            if (nl != std::string::npos) {
                line = buf_.substr(0, nl);
                buf_.erase(0, nl + 1);
                return true;
            }
            char chunk[4096];
            ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
            if (n < 0) {
                if (errno == EINTR) continue;
                sys_fail("recv");
            }
            if (n == 0) return false;
            buf_.append(chunk, static_cast<std::size_t>(n));
        }
    }

private:
    int fd_ = -1;
    std::string buf_;
};

LineSocket connect_to(const Endpoint& ep) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) sys_fail("socket");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(ep.port);
    if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        throw std::runtime_error("bad endpoint host '" + ep.host + "'");
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        int e = errno;
        ::close(fd);
        errno = e;
        sys_fail("connect " + ep.str());
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return LineSocket(fd);
}

std::string station_of_role(const std::string& role) {
    return role == "alice" ? kStationA : kStationB;
}

// Shared host state; every mutation runs under one lock.
struct HostCore {
    explicit HostCore(const SessionConfig& s) : session(s), exp(s.config) {}

    std::mutex mu;
    std::condition_variable cv;
    SessionConfig session;
    Experiment exp;
    bool alice_here = false;
    bool bob_here = false;
    std::optional<ClassicalMessage> mailbox; // deposited by alice
    bool classical_delivered = false;
    bool cooled = false;
    bool corrected = false;
    int byes = 0;
    int seq = 0;
    std::vector<std::string> transcript;

    bool complete() const {
        return exp.measured() && classical_delivered && cooled && corrected;
    }

    void log(const std::string& role, const json& cmd, const json& resp) {
        json rec;
        rec["seq"] = ++seq;
        rec["role"] = role;
        rec["command"] = cmd;
        rec["response"] = resp;
        rec["state_hash"] = exp.state().state_hash();
        transcript.push_back(rec.dump());
    }
};

json reduced_report(const FidelityReport& full) {
    json j;
    j["outcome"] = outcome_name(full.outcome);
    j["outcome_probability"] = full.outcome_probability;
    j["fidelity"] = full.fidelity;
    j["leakage"] = full.leakage;
    j["complete"] = full.complete;
    return j;
}

json handle_command(HostCore& core, const std::string& role, const json& cmd,
                    std::unique_lock<std::mutex>& lock) {
    const std::string type = cmd.at("type").get<std::string>();
    const Layout& layout = core.exp.state().layout();
    const std::string my_station = station_of_role(role);

    auto require_station = [&](const std::string& ion) {
        if (layout.station_of(ion) != my_station)
            throw std::invalid_argument("locality violation: " + role + " cannot address " +
                                        ion + " at station " + layout.station_of(ion));
    };
    auto bob_causality_guard = [&]() {
        if (role == "bob" && core.exp.measured() && !core.classical_delivered)
            throw std::invalid_argument(
                "causality violation: correction attempted before the classical message");
    };

    if (type == "pulse") {
        bob_causality_guard();
        PulseSpec p;
        p.kind = pulse_kind_from_name(cmd.at("kind").get<std::string>());
        p.ion = cmd.at("ion").get<std::string>();
        if (cmd.contains("mode") && !cmd.at("mode").is_null())
            p.mode = cmd.at("mode").get<std::string>();
        p.area = cmd.at("area").get<double>();
        p.phase = cmd.at("phase").get<double>();
        require_station(p.ion);
        if (p.mode) require_station(*p.mode);
        core.exp.apply_pulse_cmd(p);
        if (role == "bob" && core.exp.measured() && core.classical_delivered)
            core.corrected = true;
        return json{{"status", "ok"}};
    }
    if (type == "raman") {
        bob_causality_guard();
        RamanGateSpec g;
        g.ion_j = cmd.at("ion_j").get<std::string>();
        g.ion_k = cmd.at("ion_k").get<std::string>();
        g.phi = cmd.at("phi").get<double>();
        g.phi0 = cmd.at("phi0").get<double>();
        g.varphi = cmd.at("varphi").get<double>();
        g.angle = cmd.at("angle").get<double>();
        if (role == "alice") {
            // Alice's joint gate waits for ion 2's arrival at her trap.
            bool ok = core.cv.wait_for(lock, kWaitBudget, [&] {
                return layout.station_of(g.ion_j) == my_station &&
                       core.exp.state().layout().station_of(g.ion_k) == my_station;
            });
            if (!ok) throw std::runtime_error("timed out waiting for ion transport");
        }
        require_station(g.ion_j);
        require_station(g.ion_k);
        core.exp.apply_raman_cmd(g);
        return json{{"status", "ok"}};
    }
    if (type == "transport") {
        if (role != "bob") throw std::invalid_argument("only bob commands the transport");
        core.exp.transport_cmd();
        core.cv.notify_all();
        return json{{"status", "ok"}};
    }
    if (type == "cool") {
        if (role != "bob") throw std::invalid_argument("only bob cools trap B");
        core.exp.cool_cmd();
        core.cooled = true;
        return json{{"status", "ok"}};
    }
    if (type == "measure") {
        if (role != "alice") throw std::invalid_argument("only alice measures ions 1 and 2");
        std::vector<std::string> targets = cmd.at("targets").get<std::vector<std::string>>();
        bool ok = core.cv.wait_for(lock, kWaitBudget, [&] {
            for (const auto& t : targets)
                if (core.exp.state().layout().station_of(t) != my_station) return false;
            return true;
        });
        if (!ok) throw std::runtime_error("timed out waiting for ion transport");
        const auto& m = core.exp.measure_cmd(targets, core.session.config.forced_outcome);
        return json{{"status", "ok"}, {"outcome", m.outcome}, {"probability", m.probability}};
    }
    if (type == "classical_send") {
        if (role == "alice") {
            ClassicalMessage msg;
            msg.outcome = outcome_from_name(cmd.at("outcome").get<std::string>());
            msg.theta = cmd.at("theta").get<double>();
            core.mailbox = msg;
            core.cv.notify_all();
            return json{{"status", "ok"}};
        }
        // Bob collects; blocks until the message is there.
        bool ok = core.cv.wait_for(lock, kWaitBudget, [&] { return core.mailbox.has_value(); });
        if (!ok) throw std::runtime_error("timed out waiting for the classical message");
        core.classical_delivered = true;
        return json{{"status", "ok"},
                    {"outcome", outcome_name(core.mailbox->outcome)},
                    {"theta", core.mailbox->theta}};
    }
    if (type == "query_report") {
        FidelityReport full = core.exp.build_report(core.complete());
        return json{{"status", "ok"}, {"report", reduced_report(full)}};
    }
    if (type == "bye") {
        ++core.byes;
        core.cv.notify_all();
        return json{{"status", "ok"}};
    }
    throw std::invalid_argument("unknown command type '" + type + "'");
}

void host_connection(HostCore& core, LineSocket sock) {
    std::string role;
    std::string line;
    while (sock.valid() && sock.recv_line(line)) {
        json cmd;
        json resp;
        long long id = -1;
        bool close_after = false;
        try {
            cmd = json::parse(line);
            if (cmd.contains("id")) id = cmd.at("id").get<long long>();
            const std::string type = cmd.at("type").get<std::string>();
            if (role.empty()) {
                if (type != "hello")
                    throw std::invalid_argument("first command must be hello");
                std::string want = cmd.at("role").get<std::string>();
                if (want != "alice" && want != "bob")
                    throw std::invalid_argument("unknown role '" + want + "'");
                std::unique_lock lock(core.mu);
                bool& here = (want == "alice") ? core.alice_here : core.bob_here;
                if (here) {
                    resp = json{{"status", "error"}, {"error", "duplicate role " + want}};
                    close_after = true;
                    core.log(want, cmd, resp);
                } else {
                    here = true;
                    role = want;
                    const auto& c = core.session.config;
                    resp = json{{"status", "ok"},
                                {"session",
                                 {{"phi_a", c.phi_a},
                                  {"phi_b", c.phi_b},
                                  {"phi0", c.phi0},
                                  {"varphi", c.varphi},
                                  {"n_max", c.n_max}}}};
                    core.log(role, cmd, resp);
                }
            } else {
                std::unique_lock lock(core.mu);
                try {
                    resp = handle_command(core, role, cmd, lock);
                } catch (const std::exception& e) {
                    resp = json{{"status", "error"}, {"error", e.what()}};
                }
                core.log(role, cmd, resp);
                if (cmd.at("type") == "bye") close_after = true;
            }
        } catch (const std::exception& e) {
            // Malformed message: reject, state untouched.
            resp = json{{"status", "error"}, {"error", e.what()}};
            close_after = true;
        }
        if (id >= 0) resp["id"] = id;
        try {
            sock.send_line(resp.dump());
        } catch (const std::exception&) {
            break;
        }
        if (close_after) break;
    }
}

class ClientConnection {
public:
    explicit ClientConnection(const Endpoint& ep) : sock_(connect_to(ep)) {}

    json call(json cmd) {
        cmd["id"] = ++id_;
        sock_.send_line(cmd.dump());
        std::string line;
        if (!sock_.recv_line(line)) throw std::runtime_error("host closed the connection");
        json resp = json::parse(line);
        if (resp.value("status", "") != "ok")
            throw std::runtime_error("host rejected " + cmd.at("type").get<std::string>() +
                                     ": " + resp.value("error", "unknown error"));
        return resp;
    }

private:
    LineSocket sock_;
    long long id_ = 0;
};

} // namespace

Endpoint Endpoint::parse(const std::string& text) {
    auto colon = text.rfind(':');
    if (colon == std::string::npos)
        throw std::invalid_argument("endpoint must look like host:port, got '" + text + "'");
    Endpoint ep;
    ep.host = text.substr(0, colon);
    int port = std::stoi(text.substr(colon + 1));
    if (port < 0 || port > 65535) throw std::invalid_argument("port out of range");
    ep.port = static_cast<std::uint16_t>(port);
    return ep;
}

std::string Endpoint::str() const { return host + ":" + std::to_string(port); }

ServeResult serve(const SessionConfig& session) {
    if (!session.config.noise.all_zero())
        throw std::invalid_argument("networked sessions run without noise");
    session.config.validate();

    int lfd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (lfd < 0) sys_fail("socket");
    int one = 1;
    ::setsockopt(lfd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(session.endpoint.port);
    if (::inet_pton(AF_INET, session.endpoint.host.c_str(), &addr.sin_addr) != 1) {
        ::close(lfd);
        throw std::runtime_error("bad endpoint host '" + session.endpoint.host + "'");
    }
    if (::bind(lfd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        int e = errno;
        ::close(lfd);
        errno = e;
        sys_fail("bind " + session.endpoint.str());
    }
    if (::listen(lfd, 4) != 0) {
        int e = errno;
        ::close(lfd);
        errno = e;
        sys_fail("listen");
    }
    sockaddr_in bound{};
    socklen_t blen = sizeof(bound);
    ::getsockname(lfd, reinterpret_cast<sockaddr*>(&bound), &blen);
    std::uint16_t port = ntohs(bound.sin_port);
    if (!session.port_file.empty()) {
        std::ofstream pf(session.port_file);
        pf << port << "\n";
    }

    HostCore core(session);
    {
        // Session header: enough to replay the evolution; the teleported
        // state itself never appears here.
        json header;
        header["type"] = "session";
        header["n_max"] = session.config.n_max;
        header["seed"] = session.config.seed;
        header["constants"] = {{"phi_a", session.config.phi_a},
                               {"phi_b", session.config.phi_b},
                               {"phi0", session.config.phi0},
                               {"varphi", session.config.varphi}};
        if (session.config.forced_outcome)
            header["forced_outcome"] = outcome_name(*session.config.forced_outcome);
        core.transcript.push_back(header.dump());
    }

    std::vector<std::thread> handlers;
    auto deadline = std::chrono::steady_clock::now() + kWaitBudget;
    while (std::chrono::steady_clock::now() < deadline) {
        {
            std::unique_lock lock(core.mu);
            if (core.alice_here && core.bob_here) break;
        }
        pollfd pfd{lfd, POLLIN, 0};
        int pr = ::poll(&pfd, 1, 200);
        if (pr <= 0) continue;
        int cfd = ::accept(lfd, nullptr, nullptr);
        if (cfd < 0) continue;
        ::setsockopt(cfd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
        handlers.emplace_back(
            [&core, cfd]() { host_connection(core, LineSocket(cfd)); });
    }
    ::close(lfd);
    for (auto& h : handlers) h.join();

    ServeResult result;
    result.port = port;
    {
        std::unique_lock lock(core.mu);
        result.report = core.exp.build_report(core.complete());
        std::string text;
        for (const auto& l : core.transcript) text += l + "\n";
        result.transcript = std::move(text);
    }
    if (!session.transcript_path.empty()) {
        std::ofstream tf(session.transcript_path);
        tf << result.transcript;
    }
    return result;
}

ClassicalMessage alice_client(const Endpoint& endpoint, cplx alpha, cplx beta, double theta) {
    ClientConnection conn(endpoint);
    json hello = conn.call(json{{"type", "hello"}, {"role", "alice"}});
    const json& s = hello.at("session");
    double phi_a = s.at("phi_a").get<double>();
    double phi0 = s.at("phi0").get<double>();
    double varphi = s.at("varphi").get<double>();

    auto send_pulse = [&](const PulseSpec& p) {
        json cmd{{"type", "pulse"},
                 {"kind", pulse_kind_name(p.kind)},
                 {"ion", p.ion},
                 {"area", p.area},
                 {"phase", p.phase}};
        if (p.mode) cmd["mode"] = *p.mode;
        conn.call(std::move(cmd));
    };

    for (const auto& p : prep_pulse_sequence(alpha, beta)) send_pulse(p);
    send_pulse(mapping_pulse(theta));
    send_pulse(basis_flip_pulse());

    RamanGateSpec gate = bell_gate(phi_a, phi0, varphi);
    conn.call(json{{"type", "raman"},
                   {"ion_j", gate.ion_j},
                   {"ion_k", gate.ion_k},
                   {"phi", gate.phi},
                   {"phi0", gate.phi0},
                   {"varphi", gate.varphi},
                   {"angle", gate.angle}});

    json m = conn.call(json{{"type", "measure"}, {"targets", {kIon1, kIon2}}});
    ClassicalMessage msg;
    msg.outcome = outcome_from_name(m.at("outcome").get<std::string>());
    msg.theta = theta;
    conn.call(json{{"type", "classical_send"},
                   {"outcome", outcome_name(msg.outcome)},
                   {"theta", msg.theta}});
    conn.call(json{{"type", "bye"}});
    return msg;
}

std::string bob_client(const Endpoint& endpoint) {
    ClientConnection conn(endpoint);
    json hello = conn.call(json{{"type", "hello"}, {"role", "bob"}});
    const json& s = hello.at("session");
    double phi_a = s.at("phi_a").get<double>();
    double phi_b = s.at("phi_b").get<double>();
    double phi0 = s.at("phi0").get<double>();
    double varphi = s.at("varphi").get<double>();

    RamanGateSpec gate = epr_gate(phi_b, phi0, varphi);
    conn.call(json{{"type", "raman"},
                   {"ion_j", gate.ion_j},
                   {"ion_k", gate.ion_k},
                   {"phi", gate.phi},
                   {"phi0", gate.phi0},
                   {"varphi", gate.varphi},
                   {"angle", gate.angle}});
    conn.call(json{{"type", "transport"}});
    conn.call(json{{"type", "cool"}});

    json delivered = conn.call(json{{"type", "classical_send"}}); // blocking collect
    ClassicalMessage msg;
    msg.outcome = outcome_from_name(delivered.at("outcome").get<std::string>());
    msg.theta = delivered.at("theta").get<double>();

    CorrectionPrescription rx = correction_prescription(
        msg.outcome, msg.theta, phi_a, phi_b, phi0, BobStrategy::conditional_pulse);
    conn.call(json{{"type", "pulse"},
                   {"kind", pulse_kind_name(rx.pulse_kind)},
                   {"ion", kIon3},
                   {"mode", kModeB},
                   {"area", kPi},
                   {"phase", rx.laser_phase()}});

    json rep = conn.call(json{{"type", "query_report"}});
    conn.call(json{{"type", "bye"}});
    return rep.at("report").dump();
}

bool replay_transcript(const std::string& transcript_jsonl, std::string* why) {
    auto fail = [&](const std::string& reason) {
        if (why) *why = reason;
        return false;
    };
    std::istringstream in(transcript_jsonl);
    std::string line;
    if (!std::getline(in, line)) return fail("empty transcript");
    json header = json::parse(line);
    if (header.value("type", "") != "session") return fail("missing session header");

    ProtocolConfig cfg;
    cfg.n_max = header.at("n_max").get<std::size_t>();
    cfg.seed = header.at("seed").get<std::uint64_t>();
    const json& c = header.at("constants");
    cfg.phi_a = c.at("phi_a").get<double>();
    cfg.phi_b = c.at("phi_b").get<double>();
    cfg.phi0 = c.at("phi0").get<double>();
    cfg.varphi = c.at("varphi").get<double>();
    Experiment exp(cfg);

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json rec = json::parse(line);
        const json& cmd = rec.at("command");
        const json& resp = rec.at("response");
        const std::string type = cmd.at("type").get<std::string>();
        if (resp.value("status", "") == "ok") {
            if (type == "pulse") {
                PulseSpec p;
                p.kind = pulse_kind_from_name(cmd.at("kind").get<std::string>());
                p.ion = cmd.at("ion").get<std::string>();
                if (cmd.contains("mode") && !cmd.at("mode").is_null())
                    p.mode = cmd.at("mode").get<std::string>();
                p.area = cmd.at("area").get<double>();
                p.phase = cmd.at("phase").get<double>();
                exp.apply_pulse_cmd(p);
            } else if (type == "raman") {
                RamanGateSpec g;
                g.ion_j = cmd.at("ion_j").get<std::string>();
                g.ion_k = cmd.at("ion_k").get<std::string>();
                g.phi = cmd.at("phi").get<double>();
                g.phi0 = cmd.at("phi0").get<double>();
                g.varphi = cmd.at("varphi").get<double>();
                g.angle = cmd.at("angle").get<double>();
                exp.apply_raman_cmd(g);
            } else if (type == "transport") {
                exp.transport_cmd();
            } else if (type == "cool") {
                exp.cool_cmd();
            } else if (type == "measure") {
                std::vector<std::string> targets =
                    cmd.at("targets").get<std::vector<std::string>>();
                Outcome recorded = outcome_from_name(resp.at("outcome").get<std::string>());
                exp.measure_cmd(targets, recorded);
            }
            // hello / classical_send / query_report / bye leave the state alone
        }
        std::string want = rec.at("state_hash").get<std::string>();
        std::string got = exp.state().state_hash();
        if (want != got)
            return fail("state hash mismatch at seq " + std::to_string(rec.value("seq", -1)) +
                        ": recorded " + want + ", replayed " + got);
    }
    return true;
}

} // namespace iontele::net
