#include "iontele/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace iontele {

namespace {

const cplx kI(0.0, 1.0);

cplx polar1(double phase) { return cplx(std::cos(phase), std::sin(phase)); }

} // namespace

const char* pulse_kind_name(PulseKind kind) {
    switch (kind) {
        case PulseKind::carrier: return "carrier";
        case PulseKind::jc: return "jc";
        case PulseKind::antijc: return "antijc";
    }
    return "?";
}

PulseKind pulse_kind_from_name(const std::string& name) {
    if (name == "carrier") return PulseKind::carrier;
    if (name == "jc") return PulseKind::jc;
    if (name == "antijc") return PulseKind::antijc;
    throw std::invalid_argument("unknown pulse kind '" + name + "'");
}

void PulseSpec::validate() const {
    if (area < 0.0) throw std::invalid_argument("pulse area must be >= 0");
    if (kind == PulseKind::carrier) {
        if (mode) throw std::invalid_argument("carrier pulses reference no mode");
    } else if (!mode) {
        throw std::invalid_argument("sideband pulses need a target mode");
    }
}

void RamanGateSpec::validate() const {
    if (ion_j == ion_k) throw std::invalid_argument("Raman gate needs two distinct ions");
    if (angle < 0.0) throw std::invalid_argument("Raman angle must be >= 0");
}

Matrix carrier_unitary(double area, double phase) {
    Matrix u(2);
    // Generator M = e^{i phase}|e><g| + e^{-i phase}|g><e|; U = cos(A/2) I - i sin(A/2) M.
    double c = std::cos(area / 2.0);
    double s = std::sin(area / 2.0);
    u.at(0, 0) = c;
    u.at(1, 1) = c;
    u.at(1, 0) = -kI * s * polar1(phase);  // |g> -> ... -i e^{+i phi}|e>
    u.at(0, 1) = -kI * s * polar1(-phase); // |e> -> ... -i e^{-i phi}|g>
    return u;
}

Matrix spin_z_pi() {
    Matrix u(2);
    u.at(0, 0) = kI;
    u.at(1, 1) = -kI;
    return u;
}

Matrix antijc_unitary(double area, double phase, std::size_t n_max) {
    if (n_max < 1) throw std::invalid_argument("anti-JC needs n_max >= 1");
    std::size_t levels = n_max + 1;
    Matrix u = Matrix::identity(2 * levels);
    // Rung n: |g,n> <-> |e,n+1>, angle area*sqrt(n+1).
    // <e,n+1| M |g,n> = e^{-i phase} so that a pi pulse gives
    // |g,0> -> -i e^{-i phase}|e,1> and |e,1> -> -i e^{+i phase}|g,0>.
    for (std::size_t n = 0; n + 1 < levels; ++n) {
        std::size_t g_n = 0 * levels + n;
        std::size_t e_n1 = 1 * levels + (n + 1);
        double angle = area * std::sqrt(static_cast<double>(n + 1));
        double c = std::cos(angle / 2.0);
        double s = std::sin(angle / 2.0);
        u.at(g_n, g_n) = c;
        u.at(e_n1, e_n1) = c;
        u.at(e_n1, g_n) = -kI * s * polar1(-phase);
        u.at(g_n, e_n1) = -kI * s * polar1(phase);
    }
    // |e,0> and the truncation edge |g,n_max> stay identity rows (dark).
    return u;
}

Matrix jc_unitary(double area, double phase, std::size_t n_max) {
    if (n_max < 1) throw std::invalid_argument("JC needs n_max >= 1");
    std::size_t levels = n_max + 1;
    Matrix u = Matrix::identity(2 * levels);
    // Rung n: |e,n> <-> |g,n+1>, angle area*sqrt(n+1).
    // A pi pulse gives |e,0> -> -i e^{+i phase}|g,1> and
    // |g,1> -> -i e^{-i phase}|e,0>.
    for (std::size_t n = 0; n + 1 < levels; ++n) {
        std::size_t e_n = 1 * levels + n;
        std::size_t g_n1 = 0 * levels + (n + 1);
        double angle = area * std::sqrt(static_cast<double>(n + 1));
        double c = std::cos(angle / 2.0);
        double s = std::sin(angle / 2.0);
        u.at(e_n, e_n) = c;
        u.at(g_n1, g_n1) = c;
        u.at(g_n1, e_n) = -kI * s * polar1(phase);
        u.at(e_n, g_n1) = -kI * s * polar1(-phase);
    }
    return u;
}

Matrix raman_unitary(const RamanGateSpec& spec) {
    spec.validate();
    // H / (hbar |Omega|) = [couplings] - cos(varphi) * I on the two-spin
    // space; exponentiate each 2x2 block in closed form.
    Matrix u(4);
    double a = spec.angle;
    cplx block_phase = polar1(a * std::cos(spec.varphi)); // from the -cos diag
    double c = std::cos(a);
    double s = std::sin(a);
    // Basis order |gg>=0, |ge>=1, |eg>=2, |ee>=3 (ion_j slowest).
    cplx m_gg_ee = polar1(2.0 * spec.phi + spec.varphi);   // <ee|K|gg>
    cplx m_ge_eg = -polar1(spec.phi0 + spec.varphi);       // <eg|K|ge>
    u.at(0, 0) = block_phase * c;
    u.at(3, 3) = block_phase * c;
    u.at(3, 0) = block_phase * -kI * s * m_gg_ee;
    u.at(0, 3) = block_phase * -kI * s * std::conj(m_gg_ee);
    u.at(1, 1) = block_phase * c;
    u.at(2, 2) = block_phase * c;
    u.at(2, 1) = block_phase * -kI * s * m_ge_eg;
    u.at(1, 2) = block_phase * -kI * s * std::conj(m_ge_eg);
    return u;
}

double effective_rabi(const RamanPhysicalParams& params) {
    if (params.delta == 0.0) throw std::invalid_argument("Raman detuning must be nonzero");
    if (params.eta < 0.0) throw std::invalid_argument("Lamb-Dicke parameter must be >= 0");
    return 2.0 * params.omega0 * params.eta * params.eta / params.delta;
}

double raman_bell_time(const RamanPhysicalParams& params) {
    double omega = effective_rabi(params);
    if (omega == 0.0)
        throw std::invalid_argument("interaction time undefined for vanishing coupling");
    return kPi / (4.0 * std::abs(omega));
}

StateVector apply_pulse(const StateVector& state, const PulseSpec& pulse) {
    pulse.validate();
    if (pulse.kind == PulseKind::carrier)
        return apply_unitary(state, carrier_unitary(pulse.area, pulse.phase), {pulse.ion});
    std::size_t n_max = state.layout().dimension_of(*pulse.mode) - 1;
    Matrix u = (pulse.kind == PulseKind::jc) ? jc_unitary(pulse.area, pulse.phase, n_max)
                                             : antijc_unitary(pulse.area, pulse.phase, n_max);
    return apply_unitary(state, u, {pulse.ion, *pulse.mode});
}

StateVector apply_raman(const StateVector& state, const RamanGateSpec& spec) {
    return apply_unitary(state, raman_unitary(spec), {spec.ion_j, spec.ion_k});
}

} // namespace iontele
