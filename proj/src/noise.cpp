#include "iontele/noise.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "iontele/protocol.hpp"

namespace iontele {

bool NoiseModel::all_zero() const {
    return pulse_area_sigma == 0.0 && phase_jitter_sigma == 0.0 &&
           transport_dephasing_p == 0.0 && heating_p == 0.0;
}

void NoiseModel::validate() const {
    if (pulse_area_sigma < 0.0 || phase_jitter_sigma < 0.0)
        throw std::invalid_argument("noise sigmas must be >= 0");
    if (transport_dephasing_p < 0.0 || transport_dephasing_p > 1.0)
        throw std::invalid_argument("transport_dephasing_p must be in [0, 1]");
    if (heating_p < 0.0 || heating_p > 1.0)
        throw std::invalid_argument("heating_p must be in [0, 1]");
}

const std::vector<std::string>& noise_knob_names() {
    static const std::vector<std::string> names = {
        "pulse_area_sigma", "phase_jitter_sigma", "transport_dephasing_p", "heating_p"};
    return names;
}

double noise_knob_value(const NoiseModel& model, const std::string& knob) {
    if (knob == "pulse_area_sigma") return model.pulse_area_sigma;
    if (knob == "phase_jitter_sigma") return model.phase_jitter_sigma;
    if (knob == "transport_dephasing_p") return model.transport_dephasing_p;
    if (knob == "heating_p") return model.heating_p;
    throw std::invalid_argument("unknown noise knob '" + knob + "'");
}

void set_noise_knob(NoiseModel& model, const std::string& knob, double value) {
    if (knob == "pulse_area_sigma")
        model.pulse_area_sigma = value;
    else if (knob == "phase_jitter_sigma")
        model.phase_jitter_sigma = value;
    else if (knob == "transport_dephasing_p")
        model.transport_dephasing_p = value;
    else if (knob == "heating_p")
        model.heating_p = value;
    else
        throw std::invalid_argument("unknown noise knob '" + knob + "'");
    model.validate();
}

PulseSpec perturb_pulse(const PulseSpec& spec, const NoiseModel& model, Rng& rng) {
    PulseSpec out = spec;
    if (model.pulse_area_sigma > 0.0)
        out.area = std::max(0.0, spec.area * (1.0 + model.pulse_area_sigma * rng.gaussian()));
    if (model.phase_jitter_sigma > 0.0)
        out.phase = spec.phase + model.phase_jitter_sigma * rng.gaussian();
    return out;
}

StateVector apply_transport_dephasing(const StateVector& state, const std::string& ion,
                                      double p, Rng& rng) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("dephasing probability out of range");
    if (p <= 0.0) return state;
    if (rng.uniform() >= p) return state;
    std::size_t stride = state.layout().stride_of(ion);
    StateVector out = state;
    auto& amps = out.mutable_amplitudes();
    for (std::size_t i = 0; i < amps.size(); ++i)
        if ((i / stride) % 2 == 1) amps[i] = -amps[i];
    return out;
}

StateVector apply_heating_jump(const StateVector& state, const std::string& mode,
                               double p, Rng& rng) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("heating probability out of range");
    if (p <= 0.0) return state;
    if (rng.uniform() >= p) return state;
    std::size_t dim = state.layout().dimension_of(mode);
    std::size_t stride = state.layout().stride_of(mode);
    const auto& in = state.amplitudes();
    std::vector<cplx> amps(in.size(), cplx(0.0, 0.0));
    // Raising jump a^dagger: |n> -> sqrt(n+1)|n+1>; the edge level is lost to
    // the truncation and the trajectory renormalizes afterwards.
    for (std::size_t i = 0; i < in.size(); ++i) {
        std::size_t n = (i / stride) % dim;
        if (n + 1 >= dim) continue;
        amps[i + stride] += std::sqrt(static_cast<double>(n + 1)) * in[i];
    }
    double nrm = 0.0;
    for (const auto& a : amps) nrm += std::norm(a);
    if (nrm == 0.0) return state; // jump annihilated everything; skip it
    nrm = std::sqrt(nrm);
    for (auto& a : amps) a /= nrm;
    return StateVector(state.layout(), std::move(amps));
}

std::vector<SweepRow> sweep_fidelity_vs_noise(const ProtocolConfig& base_config,
                                              const std::string& knob,
                                              const std::vector<double>& grid,
                                              std::size_t trials_per_point) {
    if (grid.empty()) throw std::invalid_argument("sweep grid is empty");
    if (trials_per_point < 1) throw std::invalid_argument("need at least one trial per point");
    noise_knob_value(base_config.noise, knob); // validates the knob name

    std::vector<SweepRow> rows;
    rows.reserve(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
        ProtocolConfig cfg = base_config;
        set_noise_knob(cfg.noise, knob, grid[g]);
        std::vector<double> fids(trials_per_point);
        for (std::size_t t = 0; t < trials_per_point; ++t) {
            cfg.seed = derive_seed(base_config.seed, g * trials_per_point + t);
            fids[t] = run_teleportation(cfg).fidelity;
        }
        double n = static_cast<double>(trials_per_point);
        double mean = 0.0;
        for (double f : fids) mean += f;
        mean /= n;
        double var = 0.0;
        if (trials_per_point > 1) {
            for (double f : fids) var += (f - mean) * (f - mean);
            var /= (n - 1.0);
        }
        rows.push_back(SweepRow{grid[g], trials_per_point, mean, std::sqrt(var)});
    }
    return rows;
}

std::string sweep_to_csv(const std::string& knob, const std::vector<SweepRow>& rows) {
    auto g17 = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    std::string csv = "knob,value,trials,mean_fidelity,std_fidelity\n";
    for (const auto& r : rows)
        csv += knob + "," + g17(r.value) + "," + std::to_string(r.trials) + "," +
               g17(r.mean_fidelity) + "," + g17(r.std_fidelity) + "\n";
    return csv;
}

} // namespace iontele
