// netharness.hpp
// Three-process harness for the protocol: a host that owns the quantum state
// and the rng, plus Alice and Bob clients that may only command operations on
// their own station's ions. The classical channel is a real relayed wire
// message. Wire format: one JSON object per line, UTF-8, request/response
// lockstep per client.
//
// Message schema (command -> response):
//   {"id":N,"type":"hello","role":"alice"|"bob"}
//       -> {"id":N,"status":"ok","session":{"phi_a","phi_b","phi0","varphi","n_max"}}
//   {"id":N,"type":"pulse","kind":"carrier"|"jc"|"antijc","ion":L,
//    "mode":L?,"area":x,"phase":x}                    -> {"status":"ok"}
//   {"id":N,"type":"raman","ion_j":L,"ion_k":L,"phi":x,"phi0":x,
//    "varphi":x,"angle":x}                            -> {"status":"ok"}
//   {"id":N,"type":"transport"}                       -> {"status":"ok"}
//   {"id":N,"type":"cool"}                            -> {"status":"ok"}
//   {"id":N,"type":"measure","targets":[L,...]}
//       -> {"status":"ok","outcome":"eg","probability":p}   (alice only)
//   {"id":N,"type":"classical_send","outcome":"eg","theta":x}  (alice: deposit)
//   {"id":N,"type":"classical_send"}
//       -> {"status":"ok","outcome":"eg","theta":x}          (bob: collect;
//          blocks until Alice's message arrives)
//   {"id":N,"type":"query_report"}
//       -> {"status":"ok","report":{...}}  (report to clients carries only
//          outcome/probability/fidelity/leakage/complete; the full report
//          with state amplitudes stays host-side)
//   {"id":N,"type":"bye"}                             -> {"status":"ok"}
//
// Locality: a command may name only ions owned by the sender's station
// (classical_send and query_report excepted). An Alice command that needs
// ion 2 at station A blocks until Bob's transport lands. After the joint
// measurement, Bob's pulse/raman commands are rejected until he has collected
// the classical message.

#pragma once

#include <cstdint>

#include "iontele/protocol.hpp"

namespace iontele::net {

struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 7023;

    static Endpoint parse(const std::string& text); // "host:port"
    std::string str() const;
};

struct SessionConfig {
    ProtocolConfig config;       // host-side description; noise must be all zero
    Endpoint endpoint;           // port 0 = kernel-assigned
    std::string transcript_path; // when set, the JSONL transcript is written here
    std::string port_file;       // when set, the bound port is written here
};

struct ServeResult {
    FidelityReport report;   // full host-side report
    std::string transcript;  // JSONL: session header + per-command records
    std::uint16_t port = 0;
};

// Runs one session: accepts one alice and one bob, executes their commands,
// returns after both said bye (or a peer vanished).
ServeResult serve(const SessionConfig& session);

// Alice's half: preparation pulses, mapping pulse, joint coupling (waits for
// the transport), measurement, and the classical message. Never transmits
// alpha or beta.
ClassicalMessage alice_client(const Endpoint& endpoint, cplx alpha, cplx beta, double theta);

// Bob's half: EPR gate, transport, cooling, blocking collect of the classical
// message, the prescribed correction pulse, and a final report query. Returns
// the host's report JSON as delivered to Bob.
std::string bob_client(const Endpoint& endpoint);

// Re-executes a transcript through a fresh engine and compares the per-step
// state hashes. Returns true when every step matches.
bool replay_transcript(const std::string& transcript_jsonl, std::string* why = nullptr);

} // namespace iontele::net
