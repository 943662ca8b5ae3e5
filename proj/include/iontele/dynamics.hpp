// dynamics.hpp
// Exact unitaries for the pulse toolbox: carrier rotations, red-sideband (JC)
// and blue-sideband (anti-JC) pulses on spin (x) mode, and the two-ion Raman
// gate. Matrices are assembled from closed-form 2x2 rotations on the coupled
// rungs, so they are unitary to machine precision.
//
// Phase conventions (canonical for this codebase, pinned by the unit tests):
//   carrier(A, phi):   |g> -> cos(A/2)|g> - i e^{+i phi} sin(A/2)|e>
//                      |e> -> cos(A/2)|e> - i e^{-i phi} sin(A/2)|g>
//   anti-JC(A, phi):   couples |g,n> <-> |e,n+1> at angle A*sqrt(n+1);
//                      a pi pulse sends |e,1> -> -i e^{+i phi}|g,0> and
//                      |g,0> -> -i e^{-i phi}|e,1>.  |e,0> is dark, and the
//                      truncation edge |g,n_max> is treated as dark.
//   JC(A, phi):        couples |e,n> <-> |g,n+1> at angle A*sqrt(n+1);
//                      a pi pulse sends |e,0> -> -i e^{+i phi}|g,1> and
//                      |g,1> -> -i e^{-i phi}|e,0>.  |g,0> is dark, and
//                      |e,n_max> is treated as dark.
//
// Spin basis order is (g, e); spin-(x)-mode matrices order the spin slowest,
// i.e. row/column = s*(n_max+1) + n.

#pragma once

#include "iontele/statevec.hpp"

namespace iontele {

enum class PulseKind { carrier, jc, antijc };

const char* pulse_kind_name(PulseKind kind);
PulseKind pulse_kind_from_name(const std::string& name);

// One addressed laser pulse. `area` is the rotation angle on the addressed
// transition (for sidebands, the lowest rung); `phase` is the laser phase in
// the conventions above. Carrier pulses reference no mode.
struct PulseSpec {
    PulseKind kind = PulseKind::carrier;
    std::string ion;             // spin label
    std::optional<std::string> mode; // mode label; absent for carrier
    double area = 0.0;           // radians, >= 0
    double phase = 0.0;          // radians

    void validate() const;
};

// Two-ion internal-state gate parameters. `angle` is the dimensionless
// rotation |Omega| * t; pi/4 is the Bell-generating value.
struct RamanGateSpec {
    std::string ion_j;
    std::string ion_k;
    double phi = 0.0;    // effective phase of each Raman laser pair
    double phi0 = 0.0;   // phase difference from the equilibrium ion separation
    double varphi = 0.0; // overall drive phase; 0 unless deliberately scanned
    double angle = 0.0;  // |Omega| * t, >= 0

    void validate() const;
};

struct RamanPhysicalParams {
    double omega0 = 0.0; // Raman effective Rabi frequency (angular units)
    double eta = 0.0;    // Lamb-Dicke parameter
    double delta = 0.0;  // Raman detuning (angular units)
};

// 2x2 carrier rotation on a spin.
Matrix carrier_unitary(double area, double phase);

// z-axis pi rotation on a spin: diag(i, -i) in the (g, e) basis.
Matrix spin_z_pi();

// Blue-sideband pulse on spin (x) mode with Fock levels 0..n_max.
Matrix antijc_unitary(double area, double phase, std::size_t n_max);

// Red-sideband pulse on spin (x) mode with Fock levels 0..n_max.
Matrix jc_unitary(double area, double phase, std::size_t n_max);

// Two-ion Raman gate in the (|gg>,|ge>,|eg>,|ee>) basis, ion_j slowest.
// Structure: {|gg>,|ee>} mixed with off-diagonal phase e^{i(2 phi + varphi)},
// {|ge>,|eg>} mixed with off-diagonal phase -e^{i(phi0 + varphi)}, plus a
// uniform -cos(varphi) diagonal shift (a global phase on each block).
Matrix raman_unitary(const RamanGateSpec& spec);

// |Omega| = 2 * omega0 * eta^2 / delta. Throws on zero detuning.
double effective_rabi(const RamanPhysicalParams& params);

// Bell-generating interaction time tau = pi / (4 |Omega|). Throws when the
// coupling vanishes.
double raman_bell_time(const RamanPhysicalParams& params);

// Embeds a pulse as a full unitary on the state (carrier on the ion alone,
// sidebands on ion (x) mode).
StateVector apply_pulse(const StateVector& state, const PulseSpec& pulse);

// Applies the Raman gate to the two named ions.
StateVector apply_raman(const StateVector& state, const RamanGateSpec& spec);

} // namespace iontele
