// protocol.hpp
// Orchestration of the motional-state teleportation between two traps:
// preparation of alpha|0> + beta|1> in trap A, mapping into ion 1's internal
// state, EPR generation on ions 2-3, transport of ion 2, sympathetic cooling
// of trap B, the joint Raman coupling, projective measurement, the classical
// message, and Bob's conditional correction plus reverse mapping.

#pragma once

#include <array>
#include <cstdint>

#include "iontele/dynamics.hpp"
#include "iontele/noise.hpp"
#include "iontele/statevec.hpp"

namespace iontele {

// Canonical subsystem labels and stations used by the protocol layout.
inline constexpr const char* kIon1 = "ion1.spin";
inline constexpr const char* kIon2 = "ion2.spin";
inline constexpr const char* kIon3 = "ion3.spin";
inline constexpr const char* kModeA = "trapA.mode";
inline constexpr const char* kModeB = "trapB.mode";
inline constexpr const char* kStationA = "A";
inline constexpr const char* kStationB = "B";

enum class Outcome { gg, ge, eg, ee };

const char* outcome_name(Outcome o);
Outcome outcome_from_name(const std::string& name);

enum class BobStrategy { conditional_pulse, rotate_then_antijc };

const char* strategy_name(BobStrategy s);
BobStrategy strategy_from_name(const std::string& name);

// Full description of one protocol run.
struct ProtocolConfig {
    cplx alpha{1.0, 0.0};
    cplx beta{0.0, 0.0};
    double theta = 0.0;   // mapping laser phase
    double phi_a = kPi;   // Raman pair phase, trap A
    double phi_b = kPi;   // Raman pair phase, trap B
    double phi0 = 0.0;    // equilibrium-separation phase
    double varphi = 0.0;  // overall Raman drive phase
    std::size_t n_max = 3;
    BobStrategy strategy = BobStrategy::conditional_pulse;
    std::optional<Outcome> forced_outcome;
    std::uint64_t seed = 0;
    NoiseModel noise;
    // When set, validation requires phi_a = phi_b = pi - phi0/2.
    bool enforce_phase_condition = false;

    void validate() const;

    // Sets phi_a = phi_b = pi - phi0/2 and flags the condition as enforced.
    void set_canonical_phases();

    // Stable JSON form; parsing it back reproduces the config exactly.
    std::string canonical_json() const;
    static ProtocolConfig from_json(const std::string& text);

    std::string hash() const;
};

// Everything that crosses the classical channel.
struct ClassicalMessage {
    Outcome outcome = Outcome::gg;
    double theta = 0.0;
};

enum class PreRotation { none, x, y, z };

const char* pre_rotation_name(PreRotation r);

// Bob's recipe for one measurement outcome. `pulse_phase` is the correction
// phase in the derivation's symbols (chi for the JC pulse, theta-tilde for
// the anti-JC pulse). The anti-JC symbol absorbs a factor -i, so the laser
// phase actually programmed on the pulse differs by a fixed offset;
// laser_phase() performs that map.
struct CorrectionPrescription {
    PulseKind pulse_kind = PulseKind::jc;
    double pulse_phase = 0.0;                 // chi or theta-tilde, wrapped
    PreRotation pre_rotation = PreRotation::none;
    double pre_rotation_phase = 0.0;          // carrier phase for x/y rotations

    // Phase to program on the correction pulse itself:
    // JC: chi unchanged; anti-JC: -(theta-tilde) - pi/2.
    double laser_phase() const;
};

struct TranscriptEntry {
    std::string op;
    std::string detail;
    std::string state_hash;
};

struct FidelityReport {
    Outcome outcome = Outcome::gg;
    double outcome_probability = 0.0;
    double fidelity = 0.0;
    std::array<cplx, 2> final_mode_state{cplx(0, 0), cplx(0, 0)};
    std::array<cplx, 2> target_state{cplx(0, 0), cplx(0, 0)};
    double leakage = 0.0; // peak population on n >= 2 over the run, both modes
    std::vector<TranscriptEntry> transcript;
    std::uint64_t seed = 0;
    std::string config_hash;
    bool complete = true;

    std::string to_json(bool include_transcript = true) const;
    std::string to_csv_row() const;
    static const char* csv_header();
};

// Layout with ion 1 and trap A's mode at station A, ions 2-3 and trap B's
// mode at station B. Subsystem order: ion1, ion2, ion3, trapA.mode,
// trapB.mode (last varies fastest).
Layout standard_layout(std::size_t n_max);

// |e,0,g,g,0>: ion 1 excited, ions 2-3 ground, both modes cooled.
StateVector initial_state(std::size_t n_max);

// ---- pulse-sequence builders (shared by the local runner and the clients) --

// Carrier + anti-JC pi pair preparing alpha|0> + beta|1> on trap A's mode
// starting from |e,0>. The anti-JC phase is a free choice; the carrier phase
// and area carry the state.
std::vector<PulseSpec> prep_pulse_sequence(cplx alpha, cplx beta,
                                           double prep_antijc_phase = 0.0);

// Anti-JC pi pulse mapping the motional superposition onto ion 1's spin.
PulseSpec mapping_pulse(double theta);

// Carrier pi (phase 0) on ion 1 ahead of the joint gate. The mapping leaves
// alpha on |e> while the joint-evolution branch table assumes alpha on |g>;
// this basis flip reconciles the two conventions exactly.
PulseSpec basis_flip_pulse();

RamanGateSpec epr_gate(double phi_b, double phi0, double varphi);
RamanGateSpec bell_gate(double phi_a, double phi0, double varphi);

// ---- protocol operations ----

struct PrepResult {
    std::vector<PulseSpec> pulses;
    StateVector state;
};

// Builds the initial state and prepares alpha|0> + beta|1> on trap A's mode.
PrepResult prepare_motional_superposition(cplx alpha, cplx beta,
                                          double prep_antijc_phase = 0.0,
                                          std::size_t n_max = 3);

// Applies the mapping pulse; requires ion 1 in |e> with the mode supported on
// {0, 1} (population above n=1 below 1e-12).
StateVector map_motional_to_internal(const StateVector& state, const std::string& ion1,
                                     double theta);

// Raman gate at angle pi/4 taking |g,g> on (ion2, ion3) to the EPR pair.
StateVector make_epr(const StateVector& state, const std::string& ion2,
                     const std::string& ion3, double phi_b, double phi0, double varphi);

// Relabels ion 2's station from B to A; amplitudes untouched.
StateVector transport_ion2(const StateVector& state);

// Resets trap B's mode to |0>; requires it separable within 1e-9.
StateVector cool_trapB_mode(const StateVector& state);

// Basis flip on ion 1 followed by the trap-A Raman gate at angle pi/4.
// Requires ion 2 co-located at station A.
StateVector bell_coupling(const StateVector& state, const std::string& ion1,
                          const std::string& ion2, double phi_a, double phi0,
                          double varphi);

// Bob's pulse recipe for a measurement outcome, from the classical message
// plus the pre-agreed phase constants. Closed form for arbitrary phases; at
// the canonical setting phi_a = phi_b = pi - phi0/2 the conditional_pulse
// table reduces to
//   ee -> (JC, chi = pi - theta)        gg -> (JC, chi = -theta)
//   eg -> (anti-JC, tt = pi/2 - theta)  ge -> (anti-JC, tt = -pi/2 - theta).
CorrectionPrescription correction_prescription(Outcome outcome, double message_theta,
                                               double phi_a, double phi_b, double phi0,
                                               BobStrategy strategy);

// Test hook: offsets every prescription phase (negative control for the
// verification suite). Zero restores normal behaviour.
void set_correction_phase_sabotage(double offset);
double correction_phase_sabotage();

// Applies the prescription (optional pre-rotation, then the pi pulse) to
// ion 3 and trap B's mode. Requires the mode in |0> and ions 1-2 measured.
StateVector bob_correct_and_unmap(const StateVector& state,
                                  const CorrectionPrescription& rx,
                                  const std::string& ion3);

// ---- execution engine ----

// Serializes one run: applies primitives in order, draws noise, tracks the
// transcript and the leakage peak. The networked host drives the same engine
// so wire sessions and local runs share one code path.
class Experiment {
public:
    explicit Experiment(const ProtocolConfig& config);

    const ProtocolConfig& config() const { return cfg_; }
    const StateVector& state() const { return state_; }
    StateVector& state() { return state_; }
    Rng& rng() { return rng_; }

    void apply_pulse_cmd(const PulseSpec& pulse);
    void apply_raman_cmd(const RamanGateSpec& gate);
    void apply_zrot_cmd(const std::string& ion);
    void transport_cmd();
    void cool_cmd();
    const MeasurementResult& measure_cmd(const std::vector<std::string>& targets,
                                         const std::optional<Outcome>& forced);
    // Heating injection point; draws one jump chance per trap mode.
    void heating_boundary(const std::string& stage);

    bool measured() const { return measurement_.has_value(); }
    const MeasurementResult& measurement() const;
    double leakage_peak() const { return leakage_peak_; }
    const std::vector<TranscriptEntry>& transcript() const { return transcript_; }

    FidelityReport build_report(bool complete) const;

private:
    void record(const std::string& op, const std::string& detail);
    void track_leakage();

    ProtocolConfig cfg_;
    StateVector state_;
    Rng rng_;
    std::vector<TranscriptEntry> transcript_;
    double leakage_peak_ = 0.0;
    std::optional<MeasurementResult> measurement_;
};

// Runs the whole protocol and reports the teleportation fidelity.
FidelityReport run_teleportation(const ProtocolConfig& config);

// Outcome counts over repeated unforced runs; trial i uses the seed derived
// from (config.seed, i). Counts are indexed gg, ge, eg, ee.
std::array<std::uint64_t, 4> outcome_statistics(const ProtocolConfig& config,
                                                std::uint64_t trials);

// alpha = cos(bloch_theta/2), beta = e^{i bloch_phi} sin(bloch_theta/2).
void bloch_to_amplitudes(double bloch_theta, double bloch_phi, cplx& alpha, cplx& beta);

// Fidelity over a (bloch_theta, bloch_phi) grid with every outcome forced;
// density points per axis, poles included. CSV columns:
// theta_bloch,phi_bloch,outcome,fidelity. Row (g, outcome) runs with the seed
// derived from (config.seed, flat grid index).
std::string sweep_bloch_csv(const ProtocolConfig& base_config, std::size_t density);

} // namespace iontele
