#include "iontele/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "json.hpp"

namespace iontele {

namespace {

std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double g_correction_sabotage = 0.0;

} // namespace

const char* outcome_name(Outcome o) {
    switch (o) {
        case Outcome::gg: return "gg";
        case Outcome::ge: return "ge";
        case Outcome::eg: return "eg";
        case Outcome::ee: return "ee";
    }
    return "?";
}

Outcome outcome_from_name(const std::string& name) {
    if (name == "gg") return Outcome::gg;
    if (name == "ge") return Outcome::ge;
    if (name == "eg") return Outcome::eg;
    if (name == "ee") return Outcome::ee;
    throw std::invalid_argument("unknown outcome '" + name + "'");
}

const char* strategy_name(BobStrategy s) {
    return s == BobStrategy::conditional_pulse ? "conditional_pulse" : "rotate_then_antijc";
}

BobStrategy strategy_from_name(const std::string& name) {
    if (name == "conditional_pulse") return BobStrategy::conditional_pulse;
    if (name == "rotate_then_antijc") return BobStrategy::rotate_then_antijc;
    throw std::invalid_argument("unknown Bob strategy '" + name + "'");
}

const char* pre_rotation_name(PreRotation r) {
    switch (r) {
        case PreRotation::none: return "none";
        case PreRotation::x: return "x";
        case PreRotation::y: return "y";
        case PreRotation::z: return "z";
    }
    return "?";
}

void ProtocolConfig::validate() const {
    double nrm = std::norm(alpha) + std::norm(beta);
    if (std::abs(nrm - 1.0) > 1e-12)
        throw std::invalid_argument("(alpha, beta) must be normalized: |a|^2+|b|^2 = " +
                                    fmt_g17(nrm));
    if (n_max < 2)
        throw std::invalid_argument(
            "n_max must be >= 2 (the mapping needs headroom above the {0,1} manifold)");
    noise.validate();
    if (enforce_phase_condition) {
        double want = kPi - phi0 / 2.0;
        if (phase_distance(phi_a, want) > 1e-12 || phase_distance(phi_b, want) > 1e-12)
            throw std::invalid_argument(
                "phase condition violated: need phi_a = phi_b = pi - phi0/2");
    }
}

void ProtocolConfig::set_canonical_phases() {
    phi_a = kPi - phi0 / 2.0;
    phi_b = phi_a;
    enforce_phase_condition = true;
}

std::string ProtocolConfig::canonical_json() const {
    nlohmann::json j;
    j["alpha"] = {alpha.real(), alpha.imag()};
    j["beta"] = {beta.real(), beta.imag()};
    j["theta"] = theta;
    j["phi_a"] = phi_a;
    j["phi_b"] = phi_b;
    j["phi0"] = phi0;
    j["varphi"] = varphi;
    j["n_max"] = n_max;
    j["strategy"] = strategy_name(strategy);
    if (forced_outcome)
        j["forced_outcome"] = outcome_name(*forced_outcome);
    else
        j["forced_outcome"] = nullptr;
    j["seed"] = seed;
    j["enforce_phase_condition"] = enforce_phase_condition;
    j["noise"] = {{"pulse_area_sigma", noise.pulse_area_sigma},
                  {"phase_jitter_sigma", noise.phase_jitter_sigma},
                  {"transport_dephasing_p", noise.transport_dephasing_p},
                  {"heating_p", noise.heating_p}};
    return j.dump();
}

ProtocolConfig ProtocolConfig::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ProtocolConfig c;
    auto complex_at = [&](const char* key, cplx fallback) {
        if (!j.contains(key)) return fallback;
        const auto& v = j.at(key);
        return cplx(v.at(0).get<double>(), v.size() > 1 ? v.at(1).get<double>() : 0.0);
    };
    c.alpha = complex_at("alpha", c.alpha);
    c.beta = complex_at("beta", c.beta);
    c.theta = j.value("theta", c.theta);
    c.phi_a = j.value("phi_a", c.phi_a);
    c.phi_b = j.value("phi_b", c.phi_b);
    c.phi0 = j.value("phi0", c.phi0);
    c.varphi = j.value("varphi", c.varphi);
    c.n_max = j.value("n_max", c.n_max);
    if (j.contains("strategy")) c.strategy = strategy_from_name(j.at("strategy"));
    if (j.contains("forced_outcome") && !j.at("forced_outcome").is_null())
        c.forced_outcome = outcome_from_name(j.at("forced_outcome"));
    c.seed = j.value("seed", c.seed);
    c.enforce_phase_condition = j.value("enforce_phase_condition", c.enforce_phase_condition);
    if (j.contains("noise")) {
        const auto& n = j.at("noise");
        c.noise.pulse_area_sigma = n.value("pulse_area_sigma", 0.0);
        c.noise.phase_jitter_sigma = n.value("phase_jitter_sigma", 0.0);
        c.noise.transport_dephasing_p = n.value("transport_dephasing_p", 0.0);
        c.noise.heating_p = n.value("heating_p", 0.0);
    }
    return c;
}

std::string ProtocolConfig::hash() const {
    std::string bytes = canonical_json();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

double CorrectionPrescription::laser_phase() const {
    if (pulse_kind == PulseKind::jc) return pulse_phase;
    return wrap_phase(-pulse_phase - kPi / 2.0);
}

std::string FidelityReport::to_json(bool include_transcript) const {
    nlohmann::json j;
    j["outcome"] = outcome_name(outcome);
    j["outcome_probability"] = outcome_probability;
    j["fidelity"] = fidelity;
    j["leakage"] = leakage;
    j["final_mode_state"] = {{final_mode_state[0].real(), final_mode_state[0].imag()},
                             {final_mode_state[1].real(), final_mode_state[1].imag()}};
    j["target_state"] = {{target_state[0].real(), target_state[0].imag()},
                         {target_state[1].real(), target_state[1].imag()}};
    j["seed"] = seed;
    j["config_hash"] = config_hash;
    j["complete"] = complete;
    if (include_transcript) {
        nlohmann::json steps = nlohmann::json::array();
        for (const auto& t : transcript)
            steps.push_back({{"op", t.op}, {"detail", t.detail}, {"state_hash", t.state_hash}});
        j["transcript"] = std::move(steps);
    }
    return j.dump();
}

const char* FidelityReport::csv_header() {
    return "outcome,probability,fidelity,leakage,seed,config_hash";
}

std::string FidelityReport::to_csv_row() const {
    std::string row = outcome_name(outcome);
    row += "," + fmt_g17(outcome_probability);
    row += "," + fmt_g17(fidelity);
    row += "," + fmt_g17(leakage);
    row += "," + std::to_string(seed);
    row += "," + config_hash;
    return row;
}

Layout standard_layout(std::size_t n_max) {
    std::vector<SubsystemDescriptor> subs = {
        {kIon1, SubsystemKind::spin, 2},
        {kIon2, SubsystemKind::spin, 2},
        {kIon3, SubsystemKind::spin, 2},
        {kModeA, SubsystemKind::mode, n_max + 1},
        {kModeB, SubsystemKind::mode, n_max + 1},
    };
    std::map<std::string, std::string> stations = {
        {kIon1, kStationA}, {kIon2, kStationB}, {kIon3, kStationB},
        {kModeA, kStationA}, {kModeB, kStationB},
    };
    return Layout(std::move(subs), std::move(stations));
}

StateVector initial_state(std::size_t n_max) {
    return make_basis_state(standard_layout(n_max),
                            {{kIon1, 1}, {kIon2, 0}, {kIon3, 0}, {kModeA, 0}, {kModeB, 0}});
}

std::vector<PulseSpec> prep_pulse_sequence(cplx alpha, cplx beta, double prep_antijc_phase) {
    double nrm = std::norm(alpha) + std::norm(beta);
    if (std::abs(nrm - 1.0) > 1e-12)
        throw std::invalid_argument("(alpha, beta) must be normalized");
    double mag_a = std::min(1.0, std::abs(alpha));
    double area = 2.0 * std::acos(mag_a);
    // Starting from |e,0>, carrier(A, phi_c) then anti-JC pi (phase tp) gives
    //   |e> (x) [cos(A/2)|0> - e^{-i(phi_c+tp)} sin(A/2)|1>];
    // solving -e^{-i(phi_c+tp)} sin(A/2) = beta e^{-i arg(alpha)} fixes phi_c.
    double phi_c = 0.0;
    if (std::abs(beta) > 0.0)
        phi_c = wrap_phase(kPi - prep_antijc_phase - std::arg(beta) + std::arg(alpha));
    PulseSpec carrier{PulseKind::carrier, kIon1, std::nullopt, area, phi_c};
    PulseSpec blue{PulseKind::antijc, kIon1, kModeA, kPi, prep_antijc_phase};
    return {carrier, blue};
}

PulseSpec mapping_pulse(double theta) {
    return PulseSpec{PulseKind::antijc, kIon1, kModeA, kPi, theta};
}

PulseSpec basis_flip_pulse() {
    return PulseSpec{PulseKind::carrier, kIon1, std::nullopt, kPi, 0.0};
}

RamanGateSpec epr_gate(double phi_b, double phi0, double varphi) {
    return RamanGateSpec{kIon2, kIon3, phi_b, phi0, varphi, kPi / 4.0};
}

RamanGateSpec bell_gate(double phi_a, double phi0, double varphi) {
    return RamanGateSpec{kIon1, kIon2, phi_a, phi0, varphi, kPi / 4.0};
}

PrepResult prepare_motional_superposition(cplx alpha, cplx beta, double prep_antijc_phase,
                                          std::size_t n_max) {
    auto pulses = prep_pulse_sequence(alpha, beta, prep_antijc_phase);
    StateVector state = initial_state(n_max);
    for (const auto& p : pulses) state = apply_pulse(state, p);
    return PrepResult{std::move(pulses), std::move(state)};
}

StateVector map_motional_to_internal(const StateVector& state, const std::string& ion1,
                                     double theta) {
    const Layout& layout = state.layout();
    std::string mode = layout.station_of(ion1) == kStationA ? kModeA : kModeB;
    if (state.population_at_or_above(mode, 2) > 1e-12)
        throw std::invalid_argument(
            "mapping requires the mode supported on {0,1}: population above n=1 found");
    // Ion must be excited so that |e,n> rungs carry the whole state.
    auto dist = outcome_distribution(state, {ion1});
    if (dist["e"] < 1.0 - 1e-12)
        throw std::invalid_argument("mapping requires ion '" + ion1 + "' in |e>");
    PulseSpec p{PulseKind::antijc, ion1, mode, kPi, theta};
    return apply_pulse(state, p);
}

StateVector make_epr(const StateVector& state, const std::string& ion2,
                     const std::string& ion3, double phi_b, double phi0, double varphi) {
    auto dist = outcome_distribution(state, {ion2, ion3});
    if (dist["gg"] < 1.0 - 1e-12)
        throw std::invalid_argument("EPR preparation requires ions in |g,g>");
    RamanGateSpec gate{ion2, ion3, phi_b, phi0, varphi, kPi / 4.0};
    return apply_raman(state, gate);
}

StateVector transport_ion2(const StateVector& state) {
    if (state.layout().station_of(kIon2) == kStationA)
        throw std::invalid_argument("ion2 is already at station A");
    StateVector moved = state;
    moved.layout().set_station(kIon2, kStationA);
    return moved;
}

StateVector cool_trapB_mode(const StateVector& state) {
    auto mode_vec = extract_subsystem(state, kModeB, kPurityTol); // throws if entangled
    const Layout& layout = state.layout();
    std::size_t dim = layout.dimension_of(kModeB);
    std::size_t stride = layout.stride_of(kModeB);
    std::vector<cplx> amps(state.dimension(), cplx(0.0, 0.0));
    const auto& in = state.amplitudes();
    for (std::size_t i = 0; i < in.size(); ++i) {
        if ((i / stride) % dim != 0) continue;
        cplx rest(0.0, 0.0);
        for (std::size_t n = 0; n < dim; ++n)
            rest += std::conj(mode_vec[n]) * in[i + n * stride];
        amps[i] = rest; // mode component n = 0
    }
    StateVector out(state.layout(), std::move(amps));
    double nrm = std::sqrt(out.norm_squared());
    for (auto& a : out.mutable_amplitudes()) a /= nrm;
    return out;
}

StateVector bell_coupling(const StateVector& state, const std::string& ion1,
                          const std::string& ion2, double phi_a, double phi0,
                          double varphi) {
    const Layout& layout = state.layout();
    if (layout.station_of(ion1) != kStationA || layout.station_of(ion2) != kStationA)
        throw std::invalid_argument("joint coupling requires ions 1 and 2 at station A");
    StateVector flipped = apply_pulse(state, basis_flip_pulse());
    RamanGateSpec gate{ion1, ion2, phi_a, phi0, varphi, kPi / 4.0};
    return apply_raman(flipped, gate);
}

void set_correction_phase_sabotage(double offset) { g_correction_sabotage = offset; }
double correction_phase_sabotage() { return g_correction_sabotage; }

CorrectionPrescription correction_prescription(Outcome outcome, double message_theta,
                                               double phi_a, double phi_b, double phi0,
                                               BobStrategy strategy) {
    // Branch phases after the joint coupling:
    //   ee/gg carry beta with exp(i Phi), Phi = 2(phi_b - phi_a) + theta;
    //   eg/ge carry alpha with exp(i Sigma), Sigma = 2 phi_b + phi0.
    double big_phi = 2.0 * (phi_b - phi_a) + message_theta;
    double sigma = 2.0 * phi_b + phi0;

    CorrectionPrescription rx;
    if (strategy == BobStrategy::conditional_pulse) {
        switch (outcome) {
            case Outcome::ee:
                rx.pulse_kind = PulseKind::jc;
                rx.pulse_phase = kPi - big_phi;
                break;
            case Outcome::gg:
                rx.pulse_kind = PulseKind::jc;
                rx.pulse_phase = -big_phi;
                break;
            case Outcome::eg:
                rx.pulse_kind = PulseKind::antijc;
                rx.pulse_phase = kPi / 2.0 - message_theta + sigma;
                break;
            case Outcome::ge:
                rx.pulse_kind = PulseKind::antijc;
                rx.pulse_phase = -kPi / 2.0 - message_theta + sigma;
                break;
        }
    } else {
        // One pi rotation brings every branch to the mapped-state form
        // alpha|e> - i e^{i theta_eff} beta|g>; a single anti-JC pi then
        // reverses the mapping.
        rx.pulse_kind = PulseKind::antijc;
        double theta_eff = message_theta;
        switch (outcome) {
            case Outcome::ee:
                rx.pre_rotation = PreRotation::x;
                rx.pre_rotation_phase = wrap_phase(phi_b - phi_a);
                break;
            case Outcome::gg:
                rx.pre_rotation = PreRotation::y;
                rx.pre_rotation_phase = wrap_phase(phi_b - phi_a + kPi / 2.0);
                break;
            case Outcome::eg:
                rx.pre_rotation = PreRotation::none;
                theta_eff = message_theta - sigma;
                break;
            case Outcome::ge:
                rx.pre_rotation = PreRotation::z;
                theta_eff = message_theta - sigma;
                break;
        }
        // theta-tilde solving the reverse mapping, paper convention.
        rx.pulse_phase = kPi / 2.0 - theta_eff;
    }
    rx.pulse_phase = wrap_phase(rx.pulse_phase + g_correction_sabotage);
    return rx;
}

StateVector bob_correct_and_unmap(const StateVector& state,
                                  const CorrectionPrescription& rx,
                                  const std::string& ion3) {
    if (state.population_at_or_above(kModeB, 1) > 1e-9)
        throw std::invalid_argument("trap B's mode must be cooled to |0> before the correction");
    auto dist = outcome_distribution(state, {kIon1, kIon2});
    double top = 0.0;
    for (const auto& [name, p] : dist) top = std::max(top, p);
    if (top < 1.0 - 1e-9)
        throw std::invalid_argument("ions 1 and 2 must be measured before the correction");

    StateVector out = state;
    switch (rx.pre_rotation) {
        case PreRotation::none:
            break;
        case PreRotation::x:
        case PreRotation::y:
            out = apply_unitary(out, carrier_unitary(kPi, rx.pre_rotation_phase), {ion3});
            break;
        case PreRotation::z:
            out = apply_unitary(out, spin_z_pi(), {ion3});
            break;
    }
    PulseSpec pulse{rx.pulse_kind, ion3, kModeB, kPi, rx.laser_phase()};
    return apply_pulse(out, pulse);
}

Experiment::Experiment(const ProtocolConfig& config)
    : cfg_(config), state_(initial_state(config.n_max)), rng_(config.seed) {
    cfg_.validate();
    track_leakage();
}

void Experiment::record(const std::string& op, const std::string& detail) {
    transcript_.push_back(TranscriptEntry{op, detail, state_.state_hash()});
}

void Experiment::track_leakage() {
    double pop = state_.population_at_or_above(kModeA, 2) +
                 state_.population_at_or_above(kModeB, 2);
    leakage_peak_ = std::max(leakage_peak_, pop);
}

void Experiment::apply_pulse_cmd(const PulseSpec& pulse) {
    PulseSpec applied = perturb_pulse(pulse, cfg_.noise, rng_);
    state_ = apply_pulse(state_, applied);
    track_leakage();
    std::string detail = std::string("kind=") + pulse_kind_name(applied.kind) +
                         " ion=" + applied.ion +
                         (applied.mode ? " mode=" + *applied.mode : std::string()) +
                         " area=" + fmt_g17(applied.area) + " phase=" + fmt_g17(applied.phase);
    record("pulse", detail);
}

void Experiment::apply_raman_cmd(const RamanGateSpec& gate) {
    state_ = apply_raman(state_, gate);
    track_leakage();
    record("raman", "ions=(" + gate.ion_j + "," + gate.ion_k + ") phi=" + fmt_g17(gate.phi) +
                        " phi0=" + fmt_g17(gate.phi0) + " varphi=" + fmt_g17(gate.varphi) +
                        " angle=" + fmt_g17(gate.angle));
}

void Experiment::apply_zrot_cmd(const std::string& ion) {
    state_ = apply_unitary(state_, spin_z_pi(), {ion});
    record("zrot", "ion=" + ion + " area=pi");
}

void Experiment::transport_cmd() {
    state_ = transport_ion2(state_);
    bool flipped = false;
    if (cfg_.noise.transport_dephasing_p > 0.0) {
        StateVector next =
            apply_transport_dephasing(state_, kIon2, cfg_.noise.transport_dephasing_p, rng_);
        flipped = next.amplitudes() != state_.amplitudes();
        state_ = std::move(next);
    }
    record("transport", std::string("ion2.spin B->A dephased=") + (flipped ? "1" : "0"));
}

void Experiment::cool_cmd() {
    state_ = cool_trapB_mode(state_);
    record("cool", "trapB.mode -> |0>");
}

const MeasurementResult& Experiment::measure_cmd(const std::vector<std::string>& targets,
                                                 const std::optional<Outcome>& forced) {
    std::optional<std::string> forced_name;
    if (forced) forced_name = outcome_name(*forced);
    measurement_ = measure_projective(state_, targets, rng_, forced_name);
    state_ = measurement_->collapsed;
    std::string tlist;
    for (const auto& t : targets) tlist += (tlist.empty() ? "" : ",") + t;
    record("measure", "targets=(" + tlist + ") outcome=" + measurement_->outcome +
                          " probability=" + fmt_g17(measurement_->probability) +
                          " forced=" + (forced ? "1" : "0"));
    return *measurement_;
}

void Experiment::heating_boundary(const std::string& stage) {
    if (cfg_.noise.heating_p <= 0.0) return;
    for (const char* mode : {kModeA, kModeB}) {
        StateVector next = apply_heating_jump(state_, mode, cfg_.noise.heating_p, rng_);
        bool jumped = next.amplitudes() != state_.amplitudes();
        state_ = std::move(next);
        record("heating", "stage=" + stage + " mode=" + mode + " jump=" + (jumped ? "1" : "0"));
    }
}

const MeasurementResult& Experiment::measurement() const {
    if (!measurement_) throw std::runtime_error("no measurement has been performed");
    return *measurement_;
}

FidelityReport Experiment::build_report(bool complete) const {
    FidelityReport r;
    if (measurement_) {
        r.outcome = outcome_from_name(measurement_->outcome);
        r.outcome_probability = measurement_->probability;
    }
    r.target_state = {cfg_.alpha, cfg_.beta};
    r.leakage = leakage_peak_;
    r.transcript = transcript_;
    r.seed = cfg_.seed;
    r.config_hash = cfg_.hash();
    r.complete = complete;

    // Fidelity against alpha|0> + beta|1> from the mode's reduced density
    // operator; identical to the pure-state overlap on product states and
    // still meaningful on noisy trajectories that end slightly entangled.
    Matrix rho = state_.reduced_density(kModeB);
    std::vector<cplx> target(rho.n, cplx(0.0, 0.0));
    target[0] = cfg_.alpha;
    target[1] = cfg_.beta;
    cplx f(0.0, 0.0);
    for (std::size_t a = 0; a < rho.n; ++a)
        for (std::size_t b = 0; b < rho.n; ++b)
            f += std::conj(target[a]) * rho.at(a, b) * target[b];
    r.fidelity = std::clamp(f.real(), 0.0, 1.0);

    auto mode_vec = dominant_pure_component(rho);
    r.final_mode_state = {mode_vec[0], mode_vec[1]};
    return r;
}

FidelityReport run_teleportation(const ProtocolConfig& config) {
    config.validate();
    Experiment exp(config);

    for (const auto& p : prep_pulse_sequence(config.alpha, config.beta))
        exp.apply_pulse_cmd(p);
    exp.heating_boundary("after_prep");

    exp.apply_pulse_cmd(mapping_pulse(config.theta));
    exp.apply_raman_cmd(epr_gate(config.phi_b, config.phi0, config.varphi));
    exp.transport_cmd();
    exp.heating_boundary("after_transport");
    exp.cool_cmd();

    exp.apply_pulse_cmd(basis_flip_pulse());
    exp.apply_raman_cmd(bell_gate(config.phi_a, config.phi0, config.varphi));

    const auto& m = exp.measure_cmd({kIon1, kIon2}, config.forced_outcome);
    ClassicalMessage msg{outcome_from_name(m.outcome), config.theta};

    exp.heating_boundary("before_correction");

    auto rx = correction_prescription(msg.outcome, msg.theta, config.phi_a, config.phi_b,
                                      config.phi0, config.strategy);
    switch (rx.pre_rotation) {
        case PreRotation::none:
            break;
        case PreRotation::x:
        case PreRotation::y:
            exp.apply_pulse_cmd(
                PulseSpec{PulseKind::carrier, kIon3, std::nullopt, kPi, rx.pre_rotation_phase});
            break;
        case PreRotation::z:
            exp.apply_zrot_cmd(kIon3);
            break;
    }
    exp.apply_pulse_cmd(PulseSpec{rx.pulse_kind, kIon3, kModeB, kPi, rx.laser_phase()});

    return exp.build_report(true);
}

std::array<std::uint64_t, 4> outcome_statistics(const ProtocolConfig& config,
                                                std::uint64_t trials) {
    if (trials < 1) throw std::invalid_argument("need at least one trial");
    if (config.forced_outcome)
        throw std::invalid_argument("outcome statistics need unforced measurements");
    config.validate();

    std::array<std::uint64_t, 4> counts{0, 0, 0, 0};
    if (config.noise.all_zero()) {
        // Ideal runs share one pre-measurement state; each trial then spends
        // exactly the first deviate of its derived seed, matching what a full
        // per-trial run would draw.
        Experiment exp(config);
        for (const auto& p : prep_pulse_sequence(config.alpha, config.beta))
            exp.apply_pulse_cmd(p);
        exp.apply_pulse_cmd(mapping_pulse(config.theta));
        exp.apply_raman_cmd(epr_gate(config.phi_b, config.phi0, config.varphi));
        exp.transport_cmd();
        exp.cool_cmd();
        exp.apply_pulse_cmd(basis_flip_pulse());
        exp.apply_raman_cmd(bell_gate(config.phi_a, config.phi0, config.varphi));
        auto dist = outcome_distribution(exp.state(), {kIon1, kIon2});
        const std::array<const char*, 4> order{"gg", "ge", "eg", "ee"};
        for (std::uint64_t t = 0; t < trials; ++t) {
            Rng rng(derive_seed(config.seed, t));
            double r = rng.uniform();
            double acc = 0.0;
            std::size_t pick = order.size() - 1;
            for (std::size_t k = 0; k < order.size(); ++k) {
                acc += dist[order[k]];
                if (r < acc) {
                    pick = k;
                    break;
                }
            }
            ++counts[pick];
        }
        return counts;
    }

    for (std::uint64_t t = 0; t < trials; ++t) {
        ProtocolConfig c = config;
        c.seed = derive_seed(config.seed, t);
        FidelityReport rep = run_teleportation(c);
        ++counts[static_cast<std::size_t>(rep.outcome)];
    }
    return counts;
}

void bloch_to_amplitudes(double bloch_theta, double bloch_phi, cplx& alpha, cplx& beta) {
    alpha = cplx(std::cos(bloch_theta / 2.0), 0.0);
    beta = std::polar(std::sin(bloch_theta / 2.0), bloch_phi);
}

std::string sweep_bloch_csv(const ProtocolConfig& base_config, std::size_t density) {
    if (density < 2) throw std::invalid_argument("grid density must be >= 2");
    std::string csv = "theta_bloch,phi_bloch,outcome,fidelity\n";
    const std::array<Outcome, 4> outcomes{Outcome::gg, Outcome::ge, Outcome::eg, Outcome::ee};
    std::size_t flat = 0;
    for (std::size_t i = 0; i < density; ++i) {
        double bt = kPi * static_cast<double>(i) / static_cast<double>(density - 1);
        for (std::size_t j = 0; j < density; ++j) {
            double bp = 2.0 * kPi * static_cast<double>(j) / static_cast<double>(density);
            ProtocolConfig cfg = base_config;
            bloch_to_amplitudes(bt, bp, cfg.alpha, cfg.beta);
            for (Outcome o : outcomes) {
                cfg.forced_outcome = o;
                cfg.seed = derive_seed(base_config.seed, flat);
                FidelityReport rep = run_teleportation(cfg);
                csv += fmt_g17(bt) + "," + fmt_g17(bp) + "," + outcome_name(o) + "," +
                       fmt_g17(rep.fidelity) + "\n";
            }
            ++flat;
        }
    }
    return csv;
}

} // namespace iontele
