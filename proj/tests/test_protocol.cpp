#include <cmath>

#include "doctest.h"
#include "iontele/dynamics.hpp"
#include "iontele/protocol.hpp"
#include "oracles.hpp"

using namespace iontele;

namespace {

const cplx kIu(0.0, 1.0);

cplx ephase(double x) { return std::polar(1.0, x); }

// [alpha|e1> - i e^{i theta} beta|g1>] (x) EPR(phi_b) (x) |0,0>, with ion 2
// relocated to station A, built directly from amplitudes.
StateVector joint_input(cplx alpha, cplx beta, double theta, double phi_b) {
    Layout lay = standard_layout(3);
    std::vector<cplx> amps(lay.total_dimension(), cplx(0, 0));
    StateVector st(lay, std::move(amps));
    auto idx = [&](std::size_t s1, std::size_t s2, std::size_t s3) {
        return st.flat_index({{kIon1, s1}, {kIon2, s2}, {kIon3, s3}, {kModeA, 0}, {kModeB, 0}});
    };
    cplx c_e1 = alpha, c_g1 = -kIu * ephase(theta) * beta;
    cplx gg = 1.0 / std::sqrt(2.0), ee = -kIu * ephase(2.0 * phi_b) / std::sqrt(2.0);
    auto& a = st.mutable_amplitudes();
    a[idx(1, 0, 0)] = c_e1 * gg;
    a[idx(1, 1, 1)] = c_e1 * ee;
    a[idx(0, 0, 0)] = c_g1 * gg;
    a[idx(0, 1, 1)] = c_g1 * ee;
    st.layout().set_station(kIon2, kStationA);
    return st;
}

// The eight joint-branch amplitudes (outcome index gg,ge,eg,ee x ion-3 g/e).
void expected_branches(cplx alpha, cplx beta, double theta, double phi_a, double phi_b,
                       double phi0, cplx out[4][2]) {
    out[3][0] = -kIu * ephase(2 * phi_a) * alpha / 2.0;
    out[3][1] = -kIu * ephase(2 * phi_a) *
                (-kIu * ephase(2 * (phi_b - phi_a + theta / 2))) * beta / 2.0;
    out[0][0] = alpha / 2.0;
    out[0][1] = kIu * ephase(2 * (phi_b - phi_a + theta / 2)) * beta / 2.0;
    out[2][0] = -kIu * ephase(theta) * beta / 2.0;
    out[2][1] = ephase(2 * phi_b + phi0) * alpha / 2.0;
    out[1][0] = -kIu * ephase(-phi0) * (kIu * ephase(theta)) * beta / 2.0;
    out[1][1] = -kIu * ephase(-phi0) * ephase(2 * phi_b + phi0) * alpha / 2.0;
}

} // namespace

TEST_CASE("state preparation") {
    SUBCASE("no superposition means a zero-area carrier") {
        PrepResult prep = prepare_motional_superposition(cplx(1, 0), cplx(0, 0));
        REQUIRE(prep.pulses.size() == 2);
        CHECK(prep.pulses[0].kind == PulseKind::carrier);
        CHECK(prep.pulses[0].area == doctest::Approx(0.0));
        CHECK(prep.pulses[1].kind == PulseKind::antijc);
        CHECK(prep.pulses[1].area == doctest::Approx(kPi));
        StateVector want = initial_state(3);
        CHECK(std::norm(want.overlap(prep.state)) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("balanced superposition") {
        double r = 1.0 / std::sqrt(2.0);
        PrepResult prep = prepare_motional_superposition(cplx(r, 0), cplx(r, 0));
        auto mode = extract_subsystem(prep.state, kModeA);
        std::vector<cplx> want = {cplx(r, 0), cplx(r, 0), cplx(0, 0), cplx(0, 0)};
        CHECK(fidelity_up_to_phase(mode, want) == doctest::Approx(1.0).epsilon(1e-12));
        auto spin = extract_subsystem(prep.state, kIon1);
        CHECK(std::abs(spin[1]) == doctest::Approx(1.0).epsilon(1e-12)); // still |e>
    }
    SUBCASE("pure |1> payload needs a pi carrier") {
        PrepResult prep = prepare_motional_superposition(cplx(0, 0), cplx(1, 0));
        CHECK(prep.pulses[0].area == doctest::Approx(kPi).epsilon(1e-15));
        auto mode = extract_subsystem(prep.state, kModeA);
        CHECK(std::abs(mode[1]) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("random payloads, exact fidelity") {
        std::mt19937_64 eng(77);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        for (int i = 0; i < 50; ++i) {
            cplx alpha, beta;
            bloch_to_amplitudes(std::acos(1 - 2 * u01(eng)), 2 * kPi * u01(eng), alpha, beta);
            // Random extra phase on alpha to leave the Bloch gauge.
            double extra = 2 * kPi * u01(eng);
            alpha *= ephase(extra);
            beta *= ephase(-0.5 * extra);
            PrepResult prep = prepare_motional_superposition(alpha, beta);
            auto mode = extract_subsystem(prep.state, kModeA);
            std::vector<cplx> want = {alpha, beta, cplx(0, 0), cplx(0, 0)};
            CHECK(fidelity_up_to_phase(mode, want) == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    SUBCASE("unnormalized input is rejected") {
        CHECK_THROWS_AS(prepare_motional_superposition(cplx(1, 0), cplx(0.1, 0)),
                        std::invalid_argument);
    }
}

TEST_CASE("external-to-internal mapping") {
    SUBCASE("the general identity") {
        std::mt19937_64 eng(78);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        for (int i = 0; i < 30; ++i) {
            cplx alpha, beta;
            bloch_to_amplitudes(std::acos(1 - 2 * u01(eng)), 2 * kPi * u01(eng), alpha, beta);
            double theta = 2 * kPi * u01(eng) - kPi;
            PrepResult prep = prepare_motional_superposition(alpha, beta);
            StateVector mapped = map_motional_to_internal(prep.state, kIon1, theta);
            // trap A's mode must be exactly parked in |0>
            CHECK(mapped.population_at_or_above(kModeA, 1) < 1e-12);
            auto spin = extract_subsystem(mapped, kIon1);
            std::vector<cplx> want = {-kIu * ephase(theta) * beta, alpha};
            CHECK(fidelity_up_to_phase(spin, want) == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    SUBCASE("beta = 0 leaves the dark state alone") {
        PrepResult prep = prepare_motional_superposition(cplx(1, 0), cplx(0, 0));
        StateVector mapped = map_motional_to_internal(prep.state, kIon1, 1.23);
        CHECK(std::norm(mapped.overlap(prep.state)) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("theta = pi/2 with a pure |1> payload lands on +|g,0>") {
        PrepResult prep = prepare_motional_superposition(cplx(0, 0), cplx(1, 0));
        StateVector mapped = map_motional_to_internal(prep.state, kIon1, kPi / 2.0);
        auto spin = extract_subsystem(mapped, kIon1);
        // -i e^{i pi/2} = 1, so the spin is |g> exactly (up to prep's phase)
        CHECK(std::abs(spin[0]) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("population above n=1 is rejected") {
        StateVector st = make_basis_state(
            standard_layout(3), {{kIon1, 1}, {kIon2, 0}, {kIon3, 0}, {kModeA, 2}, {kModeB, 0}});
        CHECK_THROWS_AS(map_motional_to_internal(st, kIon1, 0.0), std::invalid_argument);
    }
    SUBCASE("the ion must be excited") {
        StateVector st = make_basis_state(
            standard_layout(3), {{kIon1, 0}, {kIon2, 0}, {kIon3, 0}, {kModeA, 0}, {kModeB, 0}});
        CHECK_THROWS_AS(map_motional_to_internal(st, kIon1, 0.0), std::invalid_argument);
    }
}

TEST_CASE("EPR generation") {
    StateVector st = initial_state(3);
    SUBCASE("phi_b = 0") {
        StateVector epr = make_epr(st, kIon2, kIon3, 0.0, 0.4, 0.0);
        std::vector<cplx> got = {
            epr.amplitudes()[epr.flat_index(
                {{kIon1, 1}, {kIon2, 0}, {kIon3, 0}, {kModeA, 0}, {kModeB, 0}})],
            epr.amplitudes()[epr.flat_index(
                {{kIon1, 1}, {kIon2, 1}, {kIon3, 1}, {kModeA, 0}, {kModeB, 0}})]};
        double r = 1.0 / std::sqrt(2.0);
        std::vector<cplx> want = {cplx(r, 0), -kIu * r};
        CHECK(fidelity_up_to_phase(got, want) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("phi_b = pi/2 flips the sign") {
        StateVector epr = make_epr(st, kIon2, kIon3, kPi / 2.0, 0.0, 0.0);
        std::vector<cplx> got = {
            epr.amplitudes()[epr.flat_index(
                {{kIon1, 1}, {kIon2, 0}, {kIon3, 0}, {kModeA, 0}, {kModeB, 0}})],
            epr.amplitudes()[epr.flat_index(
                {{kIon1, 1}, {kIon2, 1}, {kIon3, 1}, {kModeA, 0}, {kModeB, 0}})]};
        double r = 1.0 / std::sqrt(2.0);
        std::vector<cplx> want = {cplx(r, 0), kIu * r};
        CHECK(fidelity_up_to_phase(got, want) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("the vibrational state rides along untouched") {
        Matrix rot(4);
        double r = 1.0 / std::sqrt(2.0);
        rot.at(0, 0) = r;
        rot.at(1, 0) = r;
        rot.at(0, 1) = r;
        rot.at(1, 1) = -r;
        rot.at(2, 2) = 1.0;
        rot.at(3, 3) = 1.0;
        StateVector with_mode = apply_unitary(st, rot, {kModeB});
        Matrix before = with_mode.reduced_density(kModeB);
        StateVector epr = make_epr(with_mode, kIon2, kIon3, 0.9, 0.3, 0.0);
        CHECK(oracles::max_abs_diff(epr.reduced_density(kModeB), before) < 1e-12);
    }
    SUBCASE("requires |g,g>") {
        StateVector epr = make_epr(st, kIon2, kIon3, 0.1, 0.0, 0.0);
        CHECK_THROWS_AS(make_epr(epr, kIon2, kIon3, 0.1, 0.0, 0.0), std::invalid_argument);
    }
}

TEST_CASE("transport") {
    StateVector st = initial_state(3);
    CHECK(st.layout().station_of(kIon2) == kStationB);
    StateVector moved = transport_ion2(st);
    CHECK(moved.layout().station_of(kIon2) == kStationA);
    CHECK(moved.amplitudes() == st.amplitudes()); // bit-identical
    CHECK_THROWS_AS(transport_ion2(moved), std::invalid_argument);
}

TEST_CASE("sympathetic cooling") {
    SUBCASE("already cooled is a no-op") {
        StateVector st = initial_state(3);
        StateVector cooled = cool_trapB_mode(st);
        CHECK(std::norm(cooled.overlap(st)) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("a product |1> resets to |0>, spins untouched") {
        StateVector st = make_basis_state(
            standard_layout(3), {{kIon1, 1}, {kIon2, 0}, {kIon3, 0}, {kModeA, 0}, {kModeB, 1}});
        StateVector cooled = cool_trapB_mode(st);
        StateVector want = initial_state(3);
        CHECK(std::norm(cooled.overlap(want)) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("an entangled mode is rejected") {
        StateVector st = initial_state(3);
        // Entangle ion3's spin with trap B's mode via a JC half pulse on |e,0>.
        Matrix flip = carrier_unitary(kPi, 0.0);
        st = apply_unitary(st, flip, {kIon3}); // ion3 -> |e>
        st = apply_unitary(st, jc_unitary(kPi / 2.0, 0.0, 3), {kIon3, kModeB});
        CHECK_THROWS_AS(cool_trapB_mode(st), std::invalid_argument);
    }
}

TEST_CASE("joint coupling reproduces the branch table") {
    SUBCASE("random parameters, all eight amplitudes, one global phase") {
        std::mt19937_64 eng(303);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        for (int trial = 0; trial < 25; ++trial) {
            cplx alpha, beta;
            bloch_to_amplitudes(std::acos(1 - 2 * u01(eng)), 2 * kPi * u01(eng), alpha, beta);
            double theta = 2 * kPi * u01(eng) - kPi;
            double phi_a = 2 * kPi * u01(eng) - kPi;
            double phi_b = 2 * kPi * u01(eng) - kPi;
            double phi0 = 2 * kPi * u01(eng) - kPi;
            StateVector input = joint_input(alpha, beta, theta, phi_b);
            StateVector out = bell_coupling(input, kIon1, kIon2, phi_a, phi0, 0.0);

            cplx want[4][2];
            expected_branches(alpha, beta, theta, phi_a, phi_b, phi0, want);
            // Independent oracle: each branch has norm 1/2, so every outcome
            // carries probability 1/4.
            auto dist = outcome_distribution(out, {kIon1, kIon2});
            for (int o = 0; o < 4; ++o) {
                double norm2 = std::norm(want[o][0]) + std::norm(want[o][1]);
                CHECK(norm2 == doctest::Approx(0.25).epsilon(1e-12));
            }
            for (auto& [name, p] : dist) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
            auto idx = [&](std::size_t s1, std::size_t s2, std::size_t s3) {
                return out.flat_index(
                    {{kIon1, s1}, {kIon2, s2}, {kIon3, s3}, {kModeA, 0}, {kModeB, 0}});
            };
            cplx g(0, 0);
            double best = -1;
            for (int o = 0; o < 4; ++o)
                for (int s3 = 0; s3 < 2; ++s3)
                    if (std::abs(want[o][s3]) > best) {
                        best = std::abs(want[o][s3]);
                        g = out.amplitudes()[idx((o >> 1) & 1, o & 1, s3)] / want[o][s3];
                    }
            CHECK(std::abs(std::abs(g) - 1.0) < 1e-12);
            for (int o = 0; o < 4; ++o)
                for (int s3 = 0; s3 < 2; ++s3)
                    CHECK(std::abs(out.amplitudes()[idx((o >> 1) & 1, o & 1, s3)] -
                                   g * want[o][s3]) < 1e-10);
        }
    }
    SUBCASE("spec-case alpha = 1: four equal-weight branches") {
        StateVector input = joint_input(cplx(1, 0), cplx(0, 0), 0.0, 0.0);
        StateVector out = bell_coupling(input, kIon1, kIon2, 0.0, 0.0, 0.0);
        auto idx = [&](std::size_t s1, std::size_t s2, std::size_t s3) {
            return out.flat_index(
                {{kIon1, s1}, {kIon2, s2}, {kIon3, s3}, {kModeA, 0}, {kModeB, 0}});
        };
        // (1/2)[-i|e e g> + |g g g> + |e g e> - i|g e e>] up to a global phase
        cplx g = out.amplitudes()[idx(0, 0, 0)] / cplx(0.5, 0.0);
        CHECK(std::abs(std::abs(g) - 1.0) < 1e-12);
        CHECK(std::abs(out.amplitudes()[idx(1, 1, 0)] - g * (-kIu * 0.5)) < 1e-12);
        CHECK(std::abs(out.amplitudes()[idx(1, 0, 1)] - g * cplx(0.5, 0)) < 1e-12);
        CHECK(std::abs(out.amplitudes()[idx(0, 1, 1)] - g * (-kIu * 0.5)) < 1e-12);
    }
    SUBCASE("locality precondition") {
        StateVector input = joint_input(cplx(1, 0), cplx(0, 0), 0.0, 0.0);
        input.layout().set_station(kIon2, kStationB);
        CHECK_THROWS_AS(bell_coupling(input, kIon1, kIon2, 0.0, 0.0, 0.0),
                        std::invalid_argument);
    }
}

TEST_CASE("forced measurement collapses to the advertised branch") {
    cplx alpha, beta;
    bloch_to_amplitudes(1.1, 0.7, alpha, beta);
    double theta = 0.35, phi_a = 0.6, phi_b = 1.9, phi0 = 0.8;
    StateVector input = joint_input(alpha, beta, theta, phi_b);
    StateVector out = bell_coupling(input, kIon1, kIon2, phi_a, phi0, 0.0);
    Rng rng(4);
    auto m = measure_projective(out, {kIon1, kIon2}, rng, std::string("gg"));
    CHECK(m.probability == doctest::Approx(0.25).epsilon(1e-12));
    auto ion3 = extract_subsystem(m.collapsed, kIon3);
    std::vector<cplx> want = {alpha, kIu * ephase(2 * (phi_b - phi_a + theta / 2)) * beta};
    CHECK(fidelity_up_to_phase(ion3, want) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("correction prescriptions") {
    SUBCASE("canonical table") {
        double phi0 = 0.8;
        double canonical = kPi - phi0 / 2.0;
        for (double theta : {0.0, 0.3, -1.2, 2.9}) {
            auto ee = correction_prescription(Outcome::ee, theta, canonical, canonical, phi0,
                                              BobStrategy::conditional_pulse);
            CHECK(ee.pulse_kind == PulseKind::jc);
            CHECK(phase_distance(ee.pulse_phase, kPi - theta) < 1e-12);
            auto gg = correction_prescription(Outcome::gg, theta, canonical, canonical, phi0,
                                              BobStrategy::conditional_pulse);
            CHECK(gg.pulse_kind == PulseKind::jc);
            CHECK(phase_distance(gg.pulse_phase, -theta) < 1e-12);
            auto eg = correction_prescription(Outcome::eg, theta, canonical, canonical, phi0,
                                              BobStrategy::conditional_pulse);
            CHECK(eg.pulse_kind == PulseKind::antijc);
            CHECK(phase_distance(eg.pulse_phase, kPi / 2.0 - theta) < 1e-12);
            auto ge = correction_prescription(Outcome::ge, theta, canonical, canonical, phi0,
                                              BobStrategy::conditional_pulse);
            CHECK(ge.pulse_kind == PulseKind::antijc);
            CHECK(phase_distance(ge.pulse_phase, -kPi / 2.0 - theta) < 1e-12);
        }
    }
    SUBCASE("spot values") {
        double phi0 = 0.0, canonical = kPi;
        auto gg = correction_prescription(Outcome::gg, 0.0, canonical, canonical, phi0,
                                          BobStrategy::conditional_pulse);
        CHECK(phase_distance(gg.pulse_phase, 0.0) < 1e-12);
        auto ee = correction_prescription(Outcome::ee, 0.0, canonical, canonical, phi0,
                                          BobStrategy::conditional_pulse);
        CHECK(phase_distance(ee.pulse_phase, kPi) < 1e-12);
        auto eg = correction_prescription(Outcome::eg, kPi / 2.0, canonical, canonical, phi0,
                                          BobStrategy::conditional_pulse);
        CHECK(phase_distance(eg.pulse_phase, 0.0) < 1e-12);
    }
    SUBCASE("strategy 2 rotation table") {
        double phi0 = 0.4, canonical = kPi - phi0 / 2.0;
        auto ee = correction_prescription(Outcome::ee, 0.2, canonical, canonical, phi0,
                                          BobStrategy::rotate_then_antijc);
        CHECK(ee.pre_rotation == PreRotation::x);
        CHECK(ee.pulse_kind == PulseKind::antijc);
        auto gg = correction_prescription(Outcome::gg, 0.2, canonical, canonical, phi0,
                                          BobStrategy::rotate_then_antijc);
        CHECK(gg.pre_rotation == PreRotation::y);
        auto eg = correction_prescription(Outcome::eg, 0.2, canonical, canonical, phi0,
                                          BobStrategy::rotate_then_antijc);
        CHECK(eg.pre_rotation == PreRotation::none);
        auto ge = correction_prescription(Outcome::ge, 0.2, canonical, canonical, phi0,
                                          BobStrategy::rotate_then_antijc);
        CHECK(ge.pre_rotation == PreRotation::z);
    }
    SUBCASE("jc outcomes pair with ee/gg under strategy 1") {
        for (int o = 0; o < 4; ++o) {
            auto rx = correction_prescription(static_cast<Outcome>(o), 0.1, kPi, kPi, 0.0,
                                              BobStrategy::conditional_pulse);
            bool is_jc = rx.pulse_kind == PulseKind::jc;
            bool expects_jc = (static_cast<Outcome>(o) == Outcome::ee ||
                               static_cast<Outcome>(o) == Outcome::gg);
            CHECK(is_jc == expects_jc);
        }
    }
}

TEST_CASE("correction and reverse mapping") {
    cplx alpha, beta;
    bloch_to_amplitudes(1.2, -0.6, alpha, beta);
    double theta = 0.9, phi0 = 0.8;

    auto run_until_measured = [&](Outcome o, ProtocolConfig& cfg) {
        cfg.alpha = alpha;
        cfg.beta = beta;
        cfg.theta = theta;
        cfg.phi0 = phi0;
        cfg.set_canonical_phases();
        PrepResult prep = prepare_motional_superposition(alpha, beta);
        StateVector st = map_motional_to_internal(prep.state, kIon1, theta);
        st = make_epr(st, kIon2, kIon3, cfg.phi_b, phi0, 0.0);
        st = transport_ion2(st);
        st = cool_trapB_mode(st);
        st = bell_coupling(st, kIon1, kIon2, cfg.phi_a, phi0, 0.0);
        Rng rng(8);
        return measure_projective(st, {kIon1, kIon2}, rng, std::string(outcome_name(o)));
    };

    SUBCASE("gg lands in |g> with the payload on the mode") {
        ProtocolConfig cfg;
        auto m = run_until_measured(Outcome::gg, cfg);
        auto rx = correction_prescription(Outcome::gg, theta, cfg.phi_a, cfg.phi_b, phi0,
                                          BobStrategy::conditional_pulse);
        StateVector fin = bob_correct_and_unmap(m.collapsed, rx, kIon3);
        auto mode = extract_subsystem(fin, kModeB);
        std::vector<cplx> want = {alpha, beta, cplx(0, 0), cplx(0, 0)};
        CHECK(fidelity_up_to_phase(mode, want) == doctest::Approx(1.0).epsilon(1e-10));
        auto spin = extract_subsystem(fin, kIon3);
        CHECK(std::abs(spin[0]) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("eg lands in |e> with the payload on the mode") {
        ProtocolConfig cfg;
        auto m = run_until_measured(Outcome::eg, cfg);
        auto rx = correction_prescription(Outcome::eg, theta, cfg.phi_a, cfg.phi_b, phi0,
                                          BobStrategy::conditional_pulse);
        StateVector fin = bob_correct_and_unmap(m.collapsed, rx, kIon3);
        auto mode = extract_subsystem(fin, kModeB);
        std::vector<cplx> want = {alpha, beta, cplx(0, 0), cplx(0, 0)};
        CHECK(fidelity_up_to_phase(mode, want) == doctest::Approx(1.0).epsilon(1e-10));
        auto spin = extract_subsystem(fin, kIon3);
        CHECK(std::abs(spin[1]) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("beta = 0 is insensitive to the pulse phase") {
        ProtocolConfig cfg;
        cfg.alpha = cplx(1, 0);
        cfg.beta = cplx(0, 0);
        cfg.theta = theta;
        cfg.phi0 = phi0;
        cfg.set_canonical_phases();
        for (int o = 0; o < 4; ++o) {
            cfg.forced_outcome = static_cast<Outcome>(o);
            cfg.seed = 3;
            FidelityReport rep = run_teleportation(cfg);
            CHECK(rep.fidelity == doctest::Approx(1.0).epsilon(1e-10));
        }
    }
    SUBCASE("an uncooled mode is rejected") {
        StateVector st = make_basis_state(
            standard_layout(3), {{kIon1, 1}, {kIon2, 0}, {kIon3, 0}, {kModeA, 0}, {kModeB, 1}});
        auto rx = correction_prescription(Outcome::gg, 0.0, kPi, kPi, 0.0,
                                          BobStrategy::conditional_pulse);
        CHECK_THROWS_AS(bob_correct_and_unmap(st, rx, kIon3), std::invalid_argument);
    }
}

TEST_CASE("full runs") {
    cplx alpha, beta;
    bloch_to_amplitudes(0.9, 2.1, alpha, beta);

    SUBCASE("every outcome and both strategies teleport exactly") {
        for (int s = 0; s < 2; ++s)
            for (int o = 0; o < 4; ++o) {
                ProtocolConfig cfg;
                cfg.alpha = alpha;
                cfg.beta = beta;
                cfg.theta = -0.7;
                cfg.phi0 = 1.3;
                cfg.set_canonical_phases();
                cfg.strategy = s ? BobStrategy::rotate_then_antijc
                                 : BobStrategy::conditional_pulse;
                cfg.forced_outcome = static_cast<Outcome>(o);
                cfg.seed = 11;
                FidelityReport rep = run_teleportation(cfg);
                CHECK(rep.fidelity >= 1.0 - 1e-10);
                CHECK(rep.outcome_probability == doctest::Approx(0.25).epsilon(1e-12));
                CHECK(rep.leakage < 1e-20);
                CHECK(rep.outcome == static_cast<Outcome>(o));
                CHECK(rep.complete);
            }
    }
    SUBCASE("strategy 2 logs its pre-rotation") {
        ProtocolConfig cfg;
        cfg.alpha = alpha;
        cfg.beta = beta;
        cfg.theta = 0.4;
        cfg.phi0 = 0.0;
        cfg.set_canonical_phases();
        cfg.strategy = BobStrategy::rotate_then_antijc;
        cfg.forced_outcome = Outcome::ge;
        FidelityReport rep = run_teleportation(cfg);
        bool saw_zrot = false;
        for (const auto& t : rep.transcript)
            if (t.op == "zrot") saw_zrot = true;
        CHECK(saw_zrot);
    }
    SUBCASE("strategies agree on the final mode state") {
        for (int o = 0; o < 4; ++o) {
            ProtocolConfig cfg;
            cfg.alpha = alpha;
            cfg.beta = beta;
            cfg.theta = 1.9;
            cfg.phi0 = 2.2;
            cfg.set_canonical_phases();
            cfg.forced_outcome = static_cast<Outcome>(o);
            cfg.strategy = BobStrategy::conditional_pulse;
            FidelityReport a = run_teleportation(cfg);
            cfg.strategy = BobStrategy::rotate_then_antijc;
            FidelityReport b = run_teleportation(cfg);
            std::vector<cplx> va = {a.final_mode_state[0], a.final_mode_state[1]};
            std::vector<cplx> vb = {b.final_mode_state[0], b.final_mode_state[1]};
            CHECK(fidelity_up_to_phase(va, vb) == doctest::Approx(1.0).epsilon(1e-10));
        }
    }
    SUBCASE("non-canonical phases still teleport exactly") {
        std::mt19937_64 eng(19);
        std::uniform_real_distribution<double> u(-kPi, kPi);
        for (int i = 0; i < 10; ++i) {
            ProtocolConfig cfg;
            cfg.alpha = alpha;
            cfg.beta = beta;
            cfg.theta = u(eng);
            cfg.phi_a = u(eng);
            cfg.phi_b = u(eng);
            cfg.phi0 = u(eng);
            cfg.forced_outcome = static_cast<Outcome>(i % 4);
            cfg.strategy = (i % 2) ? BobStrategy::rotate_then_antijc
                                   : BobStrategy::conditional_pulse;
            FidelityReport rep = run_teleportation(cfg);
            CHECK(rep.fidelity >= 1.0 - 1e-10);
        }
    }
    SUBCASE("the runner agrees with the composed operations") {
        ProtocolConfig cfg;
        cfg.alpha = alpha;
        cfg.beta = beta;
        cfg.theta = 0.25;
        cfg.phi0 = 0.6;
        cfg.set_canonical_phases();
        cfg.forced_outcome = Outcome::ee;
        FidelityReport rep = run_teleportation(cfg);

        PrepResult prep = prepare_motional_superposition(alpha, beta);
        StateVector st = map_motional_to_internal(prep.state, kIon1, cfg.theta);
        st = make_epr(st, kIon2, kIon3, cfg.phi_b, cfg.phi0, 0.0);
        st = transport_ion2(st);
        st = cool_trapB_mode(st);
        st = bell_coupling(st, kIon1, kIon2, cfg.phi_a, cfg.phi0, 0.0);
        Rng rng(cfg.seed);
        auto m = measure_projective(st, {kIon1, kIon2}, rng, std::string("ee"));
        auto rx = correction_prescription(Outcome::ee, cfg.theta, cfg.phi_a, cfg.phi_b,
                                          cfg.phi0, cfg.strategy);
        StateVector fin = bob_correct_and_unmap(m.collapsed, rx, kIon3);
        auto mode = extract_subsystem(fin, kModeB);
        std::vector<cplx> got = {rep.final_mode_state[0], rep.final_mode_state[1]};
        std::vector<cplx> composed = {mode[0], mode[1]};
        CHECK(fidelity_up_to_phase(got, composed) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(rep.outcome_probability == doctest::Approx(m.probability).epsilon(1e-12));
    }
}

TEST_CASE("outcome statistics") {
    ProtocolConfig cfg;
    bloch_to_amplitudes(1.4, 0.3, cfg.alpha, cfg.beta);
    cfg.theta = 0.2;
    cfg.phi0 = 1.0;
    cfg.set_canonical_phases();
    cfg.seed = 1234;

    SUBCASE("one trial, one count") {
        auto counts = outcome_statistics(cfg, 1);
        std::uint64_t total = counts[0] + counts[1] + counts[2] + counts[3];
        CHECK(total == 1);
    }
    SUBCASE("determinism") {
        CHECK(outcome_statistics(cfg, 500) == outcome_statistics(cfg, 500));
    }
    SUBCASE("the fast path matches per-trial full runs") {
        auto counts = outcome_statistics(cfg, 16);
        std::array<std::uint64_t, 4> slow{0, 0, 0, 0};
        for (std::uint64_t t = 0; t < 16; ++t) {
            ProtocolConfig c = cfg;
            c.seed = derive_seed(cfg.seed, t);
            ++slow[static_cast<std::size_t>(run_teleportation(c).outcome)];
        }
        CHECK(counts == slow);
    }
    SUBCASE("uniformity at scale (5-sigma binomial)") {
        const std::uint64_t trials = 40000;
        auto counts = outcome_statistics(cfg, trials);
        double expect = trials / 4.0;
        double sigma = std::sqrt(trials * 0.25 * 0.75);
        for (auto c : counts)
            CHECK(std::abs(static_cast<double>(c) - expect) < 5.0 * sigma);
        CHECK(counts[0] + counts[1] + counts[2] + counts[3] == trials);
    }
    SUBCASE("forced configs are rejected") {
        ProtocolConfig forced = cfg;
        forced.forced_outcome = Outcome::gg;
        CHECK_THROWS_AS(outcome_statistics(forced, 10), std::invalid_argument);
    }
}

TEST_CASE("config and report serialization") {
    ProtocolConfig cfg;
    bloch_to_amplitudes(0.7, -1.9, cfg.alpha, cfg.beta);
    cfg.theta = 0.123456789012345;
    cfg.phi0 = 2.5;
    cfg.set_canonical_phases();
    cfg.seed = 987654321;
    cfg.strategy = BobStrategy::rotate_then_antijc;
    cfg.forced_outcome = Outcome::eg;
    cfg.noise.pulse_area_sigma = 0.01;

    SUBCASE("config round-trips exactly") {
        std::string j = cfg.canonical_json();
        ProtocolConfig back = ProtocolConfig::from_json(j);
        CHECK(back.canonical_json() == j);
        CHECK(back.alpha == cfg.alpha);
        CHECK(back.seed == cfg.seed);
        CHECK(back.noise.pulse_area_sigma == cfg.noise.pulse_area_sigma);
        CHECK(back.hash() == cfg.hash());
    }
    SUBCASE("validation rejects bad configs") {
        ProtocolConfig bad = cfg;
        bad.alpha = cplx(1.0, 0.0); // now |a|^2+|b|^2 > 1
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        ProtocolConfig small = cfg;
        small.n_max = 1;
        CHECK_THROWS_AS(small.validate(), std::invalid_argument);
        ProtocolConfig off = cfg;
        off.phi_a += 0.1;
        CHECK_THROWS_AS(off.validate(), std::invalid_argument); // condition enforced
    }
    SUBCASE("report serializes with stable fields") {
        ProtocolConfig run_cfg = cfg;
        run_cfg.noise = NoiseModel{};
        FidelityReport rep = run_teleportation(run_cfg);
        std::string j = rep.to_json(true);
        CHECK(j.find("\"outcome\":\"eg\"") != std::string::npos);
        CHECK(j.find("\"fidelity\"") != std::string::npos);
        CHECK(j.find("\"transcript\"") != std::string::npos);
        std::string row = rep.to_csv_row();
        CHECK(row.rfind("eg,", 0) == 0);
        CHECK(std::string(FidelityReport::csv_header()) ==
              "outcome,probability,fidelity,leakage,seed,config_hash");
    }
}

TEST_CASE("bloch sweep") {
    ProtocolConfig cfg;
    cfg.phi0 = 0.5;
    cfg.set_canonical_phases();
    std::string csv = sweep_bloch_csv(cfg, 2);
    // header + 4 * density^2 rows
    std::size_t rows = 0;
    for (char c : csv)
        if (c == '\n') ++rows;
    CHECK(rows == 1 + 4 * 2 * 2);
    CHECK(csv.rfind("theta_bloch,phi_bloch,outcome,fidelity\n", 0) == 0);
    // poles included: a row starting with 0, and one with pi
    CHECK(csv.find("\n0,") != std::string::npos);
    CHECK(csv.find("\n3.141592653589793") != std::string::npos);
    CHECK_THROWS_AS(sweep_bloch_csv(cfg, 1), std::invalid_argument);
}

TEST_CASE("sabotaged corrections are caught by the release criteria") {
    set_correction_phase_sabotage(0.05);
    ProtocolConfig cfg;
    bloch_to_amplitudes(1.0, 0.2, cfg.alpha, cfg.beta);
    cfg.theta = 0.4;
    cfg.phi0 = 0.6;
    cfg.set_canonical_phases();
    cfg.forced_outcome = Outcome::gg;
    FidelityReport rep = run_teleportation(cfg);
    set_correction_phase_sabotage(0.0);
    CHECK(rep.fidelity < 1.0 - 1e-6); // the fault is visible
    FidelityReport clean = run_teleportation(cfg);
    CHECK(clean.fidelity >= 1.0 - 1e-10); // and the hook resets
}
