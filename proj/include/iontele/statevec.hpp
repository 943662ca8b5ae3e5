// statevec.hpp
// Dense complex state vectors over composite Hilbert spaces (spins and
// motional modes), with subsystem-targeted unitaries, projective measurement,
// fidelity, and pure-subsystem extraction.

#pragma once

#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace iontele {

using cplx = std::complex<double>;

constexpr double kPi = 3.14159265358979323846;

// Normalization drift allowed after any public operation.
constexpr double kNormTol = 1e-12;
// Unitarity tolerance for user-supplied matrices.
constexpr double kUnitaryTol = 1e-10;
// Default purity tolerance for subsystem extraction.
constexpr double kPurityTol = 1e-9;

// Wraps an angle to (-pi, pi].
double wrap_phase(double radians);

// |wrap(a - b)|: distance between two angles modulo 2*pi.
double phase_distance(double a, double b);

// Deterministic random source. The raw engine is std::mt19937_64 (the
// standard pins its sequence), and uniform/gaussian deviates are derived
// with fixed arithmetic so streams are identical across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    // Uniform in [0, 1) with 53 random bits.
    double uniform();

    // Standard normal via Box-Muller; consumes two uniforms per pair and
    // caches the second deviate.
    double gaussian();

    std::uint64_t raw() { return eng_(); }

private:
    std::mt19937_64 eng_;
    std::optional<double> cached_gaussian_;
};

// Mixes a base seed with an index into an independent per-trial seed
// (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

enum class SubsystemKind { spin, mode };

struct SubsystemDescriptor {
    std::string label;     // unique, e.g. "ion1.spin", "trapA.mode"
    SubsystemKind kind;
    std::size_t dimension; // 2 for spins, n_max+1 for modes
};

// Ordered subsystem registry plus station ownership for the spins/modes.
// Basis convention: the last subsystem varies fastest, i.e. the flat index is
// (((i0*d1 + i1)*d2 + i2) ... ).
class Layout {
public:
    Layout() = default;
    Layout(std::vector<SubsystemDescriptor> subsystems,
           std::map<std::string, std::string> station_of);

    const std::vector<SubsystemDescriptor>& subsystems() const { return subsystems_; }
    std::size_t total_dimension() const { return total_dim_; }
    std::size_t count() const { return subsystems_.size(); }

    bool has(const std::string& label) const;
    std::size_t position_of(const std::string& label) const; // throws on unknown label
    const SubsystemDescriptor& descriptor(const std::string& label) const;
    std::size_t dimension_of(const std::string& label) const;

    // Stride of a subsystem in the flat index (product of dimensions of all
    // later subsystems).
    std::size_t stride_of(const std::string& label) const;

    const std::string& station_of(const std::string& label) const;
    void set_station(const std::string& label, const std::string& station);

private:
    std::vector<SubsystemDescriptor> subsystems_;
    std::map<std::string, std::string> stations_;
    std::size_t total_dim_ = 1;
};

// Small square complex matrix, row major.
struct Matrix {
    std::size_t n = 0;
    std::vector<cplx> a;

    Matrix() = default;
    explicit Matrix(std::size_t dim) : n(dim), a(dim * dim, cplx(0.0, 0.0)) {}

    cplx& at(std::size_t r, std::size_t c) { return a[r * n + c]; }
    const cplx& at(std::size_t r, std::size_t c) const { return a[r * n + c]; }

    static Matrix identity(std::size_t dim);
    Matrix multiply(const Matrix& rhs) const;
    Matrix dagger() const;

    // max |(U^dag U - I)_{ij}|
    double unitarity_defect() const;
};

class StateVector {
public:
    StateVector() = default;
    StateVector(Layout layout, std::vector<cplx> amplitudes);

    const Layout& layout() const { return layout_; }
    Layout& layout() { return layout_; }
    const std::vector<cplx>& amplitudes() const { return amps_; }
    std::size_t dimension() const { return amps_.size(); }

    double norm_squared() const;

    // Basis index of the given per-subsystem assignment.
    std::size_t flat_index(const std::map<std::string, std::size_t>& assignment) const;

    // <this|other>
    cplx overlap(const StateVector& other) const;

    // Probability that the given mode subsystem holds n or more quanta.
    double population_at_or_above(const std::string& mode_label, std::size_t n) const;

    // Reduced density matrix of one subsystem (row major, dim x dim).
    Matrix reduced_density(const std::string& label) const;

    // All amplitudes as "[index,re,im]" triples, 17 significant digits.
    std::string serialize_triples() const;

    // FNV-1a over the canonical triple serialization; stable across runs.
    std::string state_hash() const;

    std::vector<cplx>& mutable_amplitudes() { return amps_; }

private:
    Layout layout_;
    std::vector<cplx> amps_;
};

// Product basis state with amplitude 1 on the assigned index per subsystem.
// Every subsystem must be assigned; indices are range checked.
StateVector make_basis_state(const Layout& layout,
                             const std::map<std::string, std::size_t>& assignment);

// Applies u on the ordered target subsystems (identity elsewhere).
// Requires dim(u) = product of target dimensions and u unitary within 1e-10.
StateVector apply_unitary(const StateVector& state, const Matrix& u,
                          const std::vector<std::string>& targets);

// Joint outcome probabilities for projective readout of spin subsystems.
// Keys are strings of 'g'/'e', one character per target in the given order.
std::map<std::string, double> outcome_distribution(const StateVector& state,
                                                   const std::vector<std::string>& targets);

struct MeasurementResult {
    std::string outcome;   // 'g'/'e' per target
    StateVector collapsed; // renormalized post-measurement state
    double probability;    // branch probability of the outcome
};

// Projective measurement of spin subsystems. When `forced` is set the branch
// is selected deterministically (its probability still reported) and the rng
// is not consumed; otherwise one uniform deviate picks the branch.
MeasurementResult measure_projective(const StateVector& state,
                                     const std::vector<std::string>& targets,
                                     Rng& rng,
                                     const std::optional<std::string>& forced = std::nullopt);

// Pure state of one subsystem, valid when its reduced density operator has
// purity >= 1 - tol. Global phase is fixed by making the largest-magnitude
// component real positive (ties resolved to the lowest index).
std::vector<cplx> extract_subsystem(const StateVector& state, const std::string& target,
                                    double tol = kPurityTol);

// Dominant pure component of a density matrix (normalized principal
// eigenvector, phase-canonicalized like extract_subsystem). Exact on rank-one
// input; a best pure approximation otherwise.
std::vector<cplx> dominant_pure_component(const Matrix& rho);

// |<a|b>|^2 for normalized vectors of equal length.
double fidelity_up_to_phase(const std::vector<cplx>& a, const std::vector<cplx>& b);

} // namespace iontele
