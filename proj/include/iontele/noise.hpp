// noise.hpp
// Phenomenological imperfection knobs: pulse-area and laser-phase jitter,
// transport dephasing, and motional heating, sampled per trajectory.

#pragma once

#include <vector>

#include "iontele/dynamics.hpp"
#include "iontele/statevec.hpp"

namespace iontele {

struct ProtocolConfig;

struct NoiseModel {
    double pulse_area_sigma = 0.0;     // relative Gaussian error on pulse areas
    double phase_jitter_sigma = 0.0;   // radians, Gaussian on laser phases
    double transport_dephasing_p = 0.0; // z-flip chance on ion 2 in transit
    double heating_p = 0.0;            // one n -> n+1 jump chance per stage

    bool all_zero() const;
    void validate() const;
};

// Known knob names, in the order used everywhere: pulse_area_sigma,
// phase_jitter_sigma, transport_dephasing_p, heating_p.
const std::vector<std::string>& noise_knob_names();
double noise_knob_value(const NoiseModel& model, const std::string& knob);
void set_noise_knob(NoiseModel& model, const std::string& knob, double value);

// Applies area/phase jitter to one pulse. Zero sigmas leave the spec
// untouched and draw nothing from the rng; perturbed areas clamp at zero.
PulseSpec perturb_pulse(const PulseSpec& spec, const NoiseModel& model, Rng& rng);

// With probability p flips the sign of the ion's |e> amplitudes. Draws one
// uniform deviate iff p > 0.
StateVector apply_transport_dephasing(const StateVector& state, const std::string& ion,
                                      double p, Rng& rng);

// With probability p applies one raising jump (a^dagger, renormalized) to the
// mode; amplitude at the truncation edge is discarded by the jump. Draws one
// uniform deviate iff p > 0. No-op if the jump would annihilate the state.
StateVector apply_heating_jump(const StateVector& state, const std::string& mode,
                               double p, Rng& rng);

struct SweepRow {
    double value = 0.0;
    std::size_t trials = 0;
    double mean_fidelity = 0.0;
    double std_fidelity = 0.0; // sample standard deviation
};

// Mean/std of the teleportation fidelity as one noise knob sweeps a grid.
// Trial (point, i) runs with the seed derived from (base seed, point, i).
std::vector<SweepRow> sweep_fidelity_vs_noise(const ProtocolConfig& base_config,
                                              const std::string& knob,
                                              const std::vector<double>& grid,
                                              std::size_t trials_per_point);

// CSV with header knob,value,trials,mean_fidelity,std_fidelity.
std::string sweep_to_csv(const std::string& knob, const std::vector<SweepRow>& rows);

} // namespace iontele
