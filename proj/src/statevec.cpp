#include "iontele/statevec.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

namespace iontele {

double wrap_phase(double radians) {
    double w = std::fmod(radians, 2.0 * kPi);
    if (w <= -kPi) w += 2.0 * kPi;
    if (w > kPi) w -= 2.0 * kPi;
    return w;
}

double phase_distance(double a, double b) {
    return std::abs(wrap_phase(a - b));
}

double Rng::uniform() {
    // 53 high bits -> [0, 1) double, independent of library distributions.
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
    if (cached_gaussian_) {
        double v = *cached_gaussian_;
        cached_gaussian_.reset();
        return v;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    cached_gaussian_ = r * std::sin(2.0 * kPi * u2);
    return r * std::cos(2.0 * kPi * u2);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    // splitmix64 finalizer on base + golden-ratio stepped index
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Layout::Layout(std::vector<SubsystemDescriptor> subsystems,
               std::map<std::string, std::string> station_of)
    : subsystems_(std::move(subsystems)), stations_(std::move(station_of)) {
    std::set<std::string> seen;
    total_dim_ = 1;
    for (const auto& s : subsystems_) {
        if (s.dimension == 0)
            throw std::invalid_argument("subsystem '" + s.label + "' has zero dimension");
        if (s.kind == SubsystemKind::spin && s.dimension != 2)
            throw std::invalid_argument("spin subsystem '" + s.label + "' must have dimension 2");
        if (!seen.insert(s.label).second)
            throw std::invalid_argument("duplicate subsystem label '" + s.label + "'");
        total_dim_ *= s.dimension;
    }
}

bool Layout::has(const std::string& label) const {
    for (const auto& s : subsystems_)
        if (s.label == label) return true;
    return false;
}

std::size_t Layout::position_of(const std::string& label) const {
    for (std::size_t i = 0; i < subsystems_.size(); ++i)
        if (subsystems_[i].label == label) return i;
    throw std::invalid_argument("unknown subsystem label '" + label + "'");
}

const SubsystemDescriptor& Layout::descriptor(const std::string& label) const {
    return subsystems_[position_of(label)];
}

std::size_t Layout::dimension_of(const std::string& label) const {
    return descriptor(label).dimension;
}

std::size_t Layout::stride_of(const std::string& label) const {
    std::size_t pos = position_of(label);
    std::size_t stride = 1;
    for (std::size_t i = pos + 1; i < subsystems_.size(); ++i)
        stride *= subsystems_[i].dimension;
    return stride;
}

const std::string& Layout::station_of(const std::string& label) const {
    auto it = stations_.find(label);
    if (it == stations_.end())
        throw std::invalid_argument("no station recorded for '" + label + "'");
    return it->second;
}

void Layout::set_station(const std::string& label, const std::string& station) {
    if (!has(label))
        throw std::invalid_argument("unknown subsystem label '" + label + "'");
    stations_[label] = station;
}

Matrix Matrix::identity(std::size_t dim) {
    Matrix m(dim);
    for (std::size_t i = 0; i < dim; ++i) m.at(i, i) = 1.0;
    return m;
}

Matrix Matrix::multiply(const Matrix& rhs) const {
    if (n != rhs.n) throw std::invalid_argument("matrix dimension mismatch");
    Matrix out(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) {
            cplx v = at(i, k);
            if (v == cplx(0.0, 0.0)) continue;
            for (std::size_t j = 0; j < n; ++j)
                out.at(i, j) += v * rhs.at(k, j);
        }
    return out;
}

Matrix Matrix::dagger() const {
    Matrix out(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out.at(i, j) = std::conj(at(j, i));
    return out;
}

double Matrix::unitarity_defect() const {
    Matrix p = dagger().multiply(*this);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            cplx expect = (i == j) ? cplx(1.0, 0.0) : cplx(0.0, 0.0);
            worst = std::max(worst, std::abs(p.at(i, j) - expect));
        }
    return worst;
}

StateVector::StateVector(Layout layout, std::vector<cplx> amplitudes)
    : layout_(std::move(layout)), amps_(std::move(amplitudes)) {
    if (amps_.size() != layout_.total_dimension())
        throw std::invalid_argument("amplitude array length does not match layout dimension");
}

double StateVector::norm_squared() const {
    double s = 0.0;
    for (const auto& a : amps_) s += std::norm(a);
    return s;
}

std::size_t StateVector::flat_index(const std::map<std::string, std::size_t>& assignment) const {
    std::size_t idx = 0;
    for (const auto& sub : layout_.subsystems()) {
        auto it = assignment.find(sub.label);
        if (it == assignment.end())
            throw std::invalid_argument("missing assignment for subsystem '" + sub.label + "'");
        if (it->second >= sub.dimension)
            throw std::invalid_argument("basis index " + std::to_string(it->second) +
                                        " out of range for '" + sub.label + "'");
        idx = idx * sub.dimension + it->second;
    }
    return idx;
}

cplx StateVector::overlap(const StateVector& other) const {
    if (amps_.size() != other.amps_.size())
        throw std::invalid_argument("state dimension mismatch");
    cplx s(0.0, 0.0);
    for (std::size_t i = 0; i < amps_.size(); ++i)
        s += std::conj(amps_[i]) * other.amps_[i];
    return s;
}

double StateVector::population_at_or_above(const std::string& mode_label, std::size_t n) const {
    std::size_t dim = layout_.dimension_of(mode_label);
    std::size_t stride = layout_.stride_of(mode_label);
    double p = 0.0;
    for (std::size_t i = 0; i < amps_.size(); ++i) {
        std::size_t level = (i / stride) % dim;
        if (level >= n) p += std::norm(amps_[i]);
    }
    return p;
}

Matrix StateVector::reduced_density(const std::string& label) const {
    std::size_t dim = layout_.dimension_of(label);
    std::size_t stride = layout_.stride_of(label);
    Matrix rho(dim);
    // Iterate over the complement: indices with the target held at level 0.
    for (std::size_t i = 0; i < amps_.size(); ++i) {
        if ((i / stride) % dim != 0) continue;
        for (std::size_t r = 0; r < dim; ++r)
            for (std::size_t c = 0; c < dim; ++c)
                rho.at(r, c) += amps_[i + r * stride] * std::conj(amps_[i + c * stride]);
    }
    return rho;
}

namespace {

void append_number(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

} // namespace

std::string StateVector::serialize_triples() const {
    std::string out = "[";
    for (std::size_t i = 0; i < amps_.size(); ++i) {
        if (i) out += ",";
        out += "[" + std::to_string(i) + ",";
        append_number(out, amps_[i].real());
        out += ",";
        append_number(out, amps_[i].imag());
        out += "]";
    }
    out += "]";
    return out;
}

std::string StateVector::state_hash() const {
    std::string bytes = serialize_triples();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

StateVector make_basis_state(const Layout& layout,
                             const std::map<std::string, std::size_t>& assignment) {
    for (const auto& [label, idx] : assignment) {
        if (!layout.has(label))
            throw std::invalid_argument("unknown subsystem label '" + label + "'");
        (void)idx;
    }
    std::vector<cplx> amps(layout.total_dimension(), cplx(0.0, 0.0));
    StateVector tmp(layout, std::move(amps));
    std::size_t idx = tmp.flat_index(assignment); // validates completeness + ranges
    tmp.mutable_amplitudes()[idx] = cplx(1.0, 0.0);
    return tmp;
}

StateVector apply_unitary(const StateVector& state, const Matrix& u,
                          const std::vector<std::string>& targets) {
    const Layout& layout = state.layout();
    if (targets.empty()) throw std::invalid_argument("no target subsystems");
    {
        std::set<std::string> uniq(targets.begin(), targets.end());
        if (uniq.size() != targets.size())
            throw std::invalid_argument("duplicate target subsystems");
    }
    std::size_t block = 1;
    std::vector<std::size_t> strides(targets.size());
    std::vector<std::size_t> dims(targets.size());
    for (std::size_t t = 0; t < targets.size(); ++t) {
        dims[t] = layout.dimension_of(targets[t]);
        strides[t] = layout.stride_of(targets[t]);
        block *= dims[t];
    }
    if (u.n != block)
        throw std::invalid_argument("matrix dimension " + std::to_string(u.n) +
                                    " does not match target dimension " + std::to_string(block));
    if (u.unitarity_defect() > kUnitaryTol)
        throw std::invalid_argument("matrix is not unitary within tolerance");

    // Offset of each target-subspace basis combination in the flat index,
    // with the last target varying fastest.
    std::vector<std::size_t> offsets(block, 0);
    for (std::size_t b = 0; b < block; ++b) {
        std::size_t rem = b;
        std::size_t off = 0;
        for (std::size_t t = targets.size(); t-- > 0;) {
            off += (rem % dims[t]) * strides[t];
            rem /= dims[t];
        }
        offsets[b] = off;
    }

    std::vector<cplx> amps = state.amplitudes();
    std::vector<cplx> gathered(block), mixed(block);
    const std::size_t total = amps.size();
    for (std::size_t base = 0; base < total; ++base) {
        // Visit each block once, from its all-zeros representative.
        bool representative = true;
        for (std::size_t t = 0; t < targets.size(); ++t) {
            if ((base / strides[t]) % dims[t] != 0) {
                representative = false;
                break;
            }
        }
        if (!representative) continue;
        for (std::size_t b = 0; b < block; ++b) gathered[b] = amps[base + offsets[b]];
        for (std::size_t r = 0; r < block; ++r) {
            cplx s(0.0, 0.0);
            for (std::size_t c = 0; c < block; ++c) s += u.at(r, c) * gathered[c];
            mixed[r] = s;
        }
        for (std::size_t b = 0; b < block; ++b) amps[base + offsets[b]] = mixed[b];
    }
    return StateVector(state.layout(), std::move(amps));
}

namespace {

void require_spins(const Layout& layout, const std::vector<std::string>& targets) {
    if (targets.empty()) throw std::invalid_argument("no measurement targets");
    for (const auto& t : targets) {
        if (layout.descriptor(t).kind != SubsystemKind::spin)
            throw std::invalid_argument(
                "measurement target '" + t +
                "' is a mode; fluorescence readout applies to internal states only");
    }
}

} // namespace

std::map<std::string, double> outcome_distribution(const StateVector& state,
                                                   const std::vector<std::string>& targets) {
    const Layout& layout = state.layout();
    require_spins(layout, targets);
    std::vector<std::size_t> strides(targets.size());
    for (std::size_t t = 0; t < targets.size(); ++t)
        strides[t] = layout.stride_of(targets[t]);

    std::size_t n_outcomes = std::size_t{1} << targets.size();
    std::vector<double> probs(n_outcomes, 0.0);
    const auto& amps = state.amplitudes();
    for (std::size_t i = 0; i < amps.size(); ++i) {
        double p = std::norm(amps[i]);
        if (p == 0.0) continue;
        std::size_t key = 0;
        for (std::size_t t = 0; t < targets.size(); ++t)
            key = (key << 1) | ((i / strides[t]) % 2);
        probs[key] += p;
    }
    std::map<std::string, double> dist;
    for (std::size_t key = 0; key < n_outcomes; ++key) {
        std::string name(targets.size(), 'g');
        for (std::size_t t = 0; t < targets.size(); ++t)
            if ((key >> (targets.size() - 1 - t)) & 1) name[t] = 'e';
        dist[name] = probs[key];
    }
    return dist;
}

MeasurementResult measure_projective(const StateVector& state,
                                     const std::vector<std::string>& targets,
                                     Rng& rng,
                                     const std::optional<std::string>& forced) {
    const Layout& layout = state.layout();
    require_spins(layout, targets);
    auto dist = outcome_distribution(state, targets);

    std::string picked;
    double probability = 0.0;
    if (forced) {
        auto it = dist.find(*forced);
        if (it == dist.end())
            throw std::invalid_argument("forced outcome '" + *forced +
                                        "' does not name a joint g/e value of the targets");
        picked = it->first;
        probability = it->second;
    } else {
        // Cumulative scan in basis-index order (g before e per target).
        std::vector<std::pair<std::string, double>> ordered;
        std::size_t n_outcomes = std::size_t{1} << targets.size();
        for (std::size_t key = 0; key < n_outcomes; ++key) {
            std::string name(targets.size(), 'g');
            for (std::size_t t = 0; t < targets.size(); ++t)
                if ((key >> (targets.size() - 1 - t)) & 1) name[t] = 'e';
            ordered.emplace_back(name, dist[name]);
        }
        double r = rng.uniform();
        double acc = 0.0;
        for (std::size_t k = 0; k < ordered.size(); ++k) {
            acc += ordered[k].second;
            if (r < acc || k + 1 == ordered.size()) {
                picked = ordered[k].first;
                probability = ordered[k].second;
                break;
            }
        }
    }
    if (probability <= 0.0)
        throw std::runtime_error("measurement selected a zero-probability branch (outcome '" +
                                 picked + "')");

    std::vector<std::size_t> strides(targets.size());
    for (std::size_t t = 0; t < targets.size(); ++t)
        strides[t] = layout.stride_of(targets[t]);

    std::vector<cplx> amps = state.amplitudes();
    double inv = 1.0 / std::sqrt(probability);
    for (std::size_t i = 0; i < amps.size(); ++i) {
        bool keep = true;
        for (std::size_t t = 0; t < targets.size(); ++t) {
            std::size_t bit = (i / strides[t]) % 2;
            if ((picked[t] == 'e') != (bit == 1)) {
                keep = false;
                break;
            }
        }
        amps[i] = keep ? amps[i] * inv : cplx(0.0, 0.0);
    }
    return MeasurementResult{picked, StateVector(layout, std::move(amps)), probability};
}

std::vector<cplx> dominant_pure_component(const Matrix& rho) {
    std::size_t dim = rho.n;
    // Start from the column under the largest diagonal entry (exact for rank
    // one), then power-iterate to absorb small impurities.
    std::size_t best = 0;
    for (std::size_t r = 1; r < dim; ++r)
        if (rho.at(r, r).real() > rho.at(best, best).real()) best = r;
    std::vector<cplx> vec(dim);
    for (std::size_t r = 0; r < dim; ++r) vec[r] = rho.at(r, best);
    for (int iter = 0; iter < 3; ++iter) {
        std::vector<cplx> next(dim, cplx(0.0, 0.0));
        for (std::size_t r = 0; r < dim; ++r)
            for (std::size_t c = 0; c < dim; ++c)
                next[r] += rho.at(r, c) * vec[c];
        vec = std::move(next);
    }
    double nrm = 0.0;
    for (const auto& v : vec) nrm += std::norm(v);
    nrm = std::sqrt(nrm);
    if (nrm == 0.0) throw std::runtime_error("zero density matrix");
    for (auto& v : vec) v /= nrm;

    // Canonical global phase: largest-magnitude component real positive.
    std::size_t big = 0;
    for (std::size_t r = 1; r < dim; ++r)
        if (std::abs(vec[r]) > std::abs(vec[big])) big = r;
    cplx phase = vec[big] / std::abs(vec[big]);
    for (auto& v : vec) v /= phase;
    return vec;
}

std::vector<cplx> extract_subsystem(const StateVector& state, const std::string& target,
                                    double tol) {
    Matrix rho = state.reduced_density(target);
    double purity = 0.0;
    for (std::size_t r = 0; r < rho.n; ++r)
        for (std::size_t c = 0; c < rho.n; ++c)
            purity += std::norm(rho.at(r, c));
    if (purity < 1.0 - tol)
        throw std::invalid_argument("subsystem '" + target +
                                    "' is entangled with the rest (purity " +
                                    std::to_string(purity) + ")");
    return dominant_pure_component(rho);
}

double fidelity_up_to_phase(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("fidelity arguments have different lengths");
    double na = 0.0, nb = 0.0;
    cplx ov(0.0, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        na += std::norm(a[i]);
        nb += std::norm(b[i]);
        ov += std::conj(a[i]) * b[i];
    }
    if (std::abs(na - 1.0) > kUnitaryTol || std::abs(nb - 1.0) > kUnitaryTol)
        throw std::invalid_argument("fidelity arguments must be normalized");
    return std::norm(ov);
}

} // namespace iontele
