#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <complex>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ecpsim {

using Complex = std::complex<double>;

// Photon count per registered mode, same order as the registry.
using Occupation = std::vector<int>;

// Label of a spatial optical mode ("a1", "d2", ...).
struct ModeId {
    std::string label;

    friend auto operator<=>(const ModeId&, const ModeId&) = default;
};

struct mode_registry_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct cutoff_exceeded : std::length_error {
    using std::length_error::length_error;
};

struct degenerate_input : std::domain_error {
    using std::domain_error::domain_error;
};

struct branch_not_found : std::logic_error {
    using std::logic_error::logic_error;
};

inline constexpr int kDefaultPhotonCutoff = 4;
inline constexpr double kNormTolerance = 1e-12;
inline constexpr double kPruneThreshold = 1e-15;

inline int total_photons(const Occupation& occ) {
    return std::accumulate(occ.begin(), occ.end(), 0);
}

// Sparse superposition over photon-number basis states of named modes.
// Value type: every operation returns a new state. Construction validates
// occupation shape, photon cutoff and amplitude finiteness, and drops terms
// with |amplitude| < kPruneThreshold.
class StateVector {
public:
    StateVector() = default;

    StateVector(std::vector<ModeId> modes, std::map<Occupation, Complex> terms,
                int cutoff = kDefaultPhotonCutoff)
        : modes_(std::move(modes)), terms_(std::move(terms)), cutoff_(cutoff) {
        validate_and_prune();
    }

    static StateVector vacuum(std::vector<ModeId> modes, int cutoff = kDefaultPhotonCutoff) {
        Occupation zero(modes.size(), 0);
        std::map<Occupation, Complex> terms{{std::move(zero), Complex{1.0, 0.0}}};
        return StateVector(std::move(modes), std::move(terms), cutoff);
    }

    static StateVector basis(std::vector<ModeId> modes, Occupation counts,
                             int cutoff = kDefaultPhotonCutoff) {
        std::map<Occupation, Complex> terms{{std::move(counts), Complex{1.0, 0.0}}};
        return StateVector(std::move(modes), std::move(terms), cutoff);
    }

    const std::vector<ModeId>& modes() const { return modes_; }
    const std::map<Occupation, Complex>& terms() const { return terms_; }
    int photon_cutoff() const { return cutoff_; }
    std::size_t term_count() const { return terms_.size(); }

    bool has_mode(const ModeId& mode) const {
        return std::find(modes_.begin(), modes_.end(), mode) != modes_.end();
    }

    std::size_t mode_index(const ModeId& mode) const {
        auto it = std::find(modes_.begin(), modes_.end(), mode);
        if (it == modes_.end())
            throw mode_registry_error("mode '" + mode.label + "' is not registered");
        return static_cast<std::size_t>(it - modes_.begin());
    }

    Complex amplitude(const Occupation& occ) const {
        auto it = terms_.find(occ);
        return it == terms_.end() ? Complex{} : it->second;
    }

private:
    void validate_and_prune() {
        for (std::size_t i = 0; i < modes_.size(); ++i)
            for (std::size_t j = i + 1; j < modes_.size(); ++j)
                if (modes_[i] == modes_[j])
                    throw mode_registry_error("duplicate mode '" + modes_[i].label +
                                              "' in registry");
        if (cutoff_ < 0) throw std::invalid_argument("photon cutoff must be non-negative");
        for (auto it = terms_.begin(); it != terms_.end();) {
            const auto& [occ, amp] = *it;
            if (occ.size() != modes_.size())
                throw std::invalid_argument("occupation length does not match registry size");
            for (int n : occ)
                if (n < 0) throw std::invalid_argument("negative photon count");
            if (total_photons(occ) > cutoff_)
                throw cutoff_exceeded("term exceeds photon cutoff " + std::to_string(cutoff_));
            if (!std::isfinite(amp.real()) || !std::isfinite(amp.imag()))
                throw std::runtime_error("non-finite amplitude");
            if (std::abs(amp) < kPruneThreshold)
                it = terms_.erase(it);
            else
                ++it;
        }
    }

    std::vector<ModeId> modes_;
    std::map<Occupation, Complex> terms_;
    int cutoff_ = kDefaultPhotonCutoff;
};

// Sum of |amplitude|^2. 1 within kNormTolerance for physical states.
inline double norm_check(const StateVector& state) {
    double sum = 0.0;
    for (const auto& [occ, amp] : state.terms()) sum += std::norm(amp);
    return sum;
}

inline StateVector scaled(const StateVector& state, Complex factor) {
    std::map<Occupation, Complex> terms;
    for (const auto& [occ, amp] : state.terms()) terms.emplace(occ, amp * factor);
    return StateVector(state.modes(), std::move(terms), state.photon_cutoff());
}

inline StateVector normalized(const StateVector& state) {
    const double n = norm_check(state);
    if (n <= 0.0) throw std::runtime_error("cannot normalize a zero state");
    return scaled(state, Complex{1.0 / std::sqrt(n), 0.0});
}

// Kronecker product; registries must be disjoint. Cutoff is the larger of the
// two operands', so the combined photon total is still checked against it.
inline StateVector tensor(const StateVector& left, const StateVector& right) {
    for (const auto& mode : right.modes())
        if (left.has_mode(mode))
            throw mode_registry_error("tensor: mode '" + mode.label +
                                      "' present in both registries");
    std::vector<ModeId> modes = left.modes();
    modes.insert(modes.end(), right.modes().begin(), right.modes().end());

    std::map<Occupation, Complex> terms;
    for (const auto& [locc, lamp] : left.terms()) {
        for (const auto& [rocc, ramp] : right.terms()) {
            Occupation occ = locc;
            occ.insert(occ.end(), rocc.begin(), rocc.end());
            terms.emplace(std::move(occ), lamp * ramp);
        }
    }
    const int cutoff = std::max(left.photon_cutoff(), right.photon_cutoff());
    return StateVector(std::move(modes), std::move(terms), cutoff);
}

// Multiplies each term by exp(i * phase * n) where n is the photon count in
// `mode`. phase = pi realizes the classical feed-forward sign flip.
inline StateVector apply_mode_phase(const StateVector& state, const ModeId& mode, double phase) {
    const std::size_t idx = state.mode_index(mode);
    std::map<Occupation, Complex> terms;
    for (const auto& [occ, amp] : state.terms())
        terms.emplace(occ, amp * std::polar(1.0, phase * occ[idx]));
    return StateVector(state.modes(), std::move(terms), state.photon_cutoff());
}

// Re-orders the registry to `order` (a permutation of the current modes).
inline StateVector with_mode_order(const StateVector& state, const std::vector<ModeId>& order) {
    if (order.size() != state.modes().size())
        throw mode_registry_error("mode order must be a permutation of the registry");
    std::vector<std::size_t> perm(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) perm[i] = state.mode_index(order[i]);
    std::map<Occupation, Complex> terms;
    for (const auto& [occ, amp] : state.terms()) {
        Occupation reordered(occ.size());
        for (std::size_t i = 0; i < perm.size(); ++i) reordered[i] = occ[perm[i]];
        terms.emplace(std::move(reordered), amp);
    }
    return StateVector(order, std::move(terms), state.photon_cutoff());
}

inline StateVector canonicalized(const StateVector& state) {
    std::vector<ModeId> order = state.modes();
    std::sort(order.begin(), order.end());
    return with_mode_order(state, order);
}

// <a|b>. Registries must hold the same modes; order may differ.
inline Complex inner_product(const StateVector& a, const StateVector& b) {
    for (const auto& mode : b.modes())
        if (!a.has_mode(mode))
            throw mode_registry_error("inner product: registries hold different modes");
    if (a.modes().size() != b.modes().size())
        throw mode_registry_error("inner product: registries hold different modes");
    const StateVector baligned = a.modes() == b.modes() ? b : with_mode_order(b, a.modes());
    Complex sum{};
    for (const auto& [occ, amp] : a.terms()) sum += std::conj(amp) * baligned.amplitude(occ);
    return sum;
}

// |<target|state>|^2; insensitive to a global phase on either side.
inline double fidelity(const StateVector& state, const StateVector& target) {
    return std::norm(inner_product(target, state));
}

inline bool approx_equal(const StateVector& a, const StateVector& b,
                         double tol = kNormTolerance) {
    if (a.modes().size() != b.modes().size()) return false;
    for (const auto& mode : b.modes())
        if (!a.has_mode(mode)) return false;
    const StateVector ca = canonicalized(a);
    const StateVector cb = canonicalized(b);
    for (const auto& [occ, amp] : ca.terms())
        if (std::abs(amp - cb.amplitude(occ)) > tol) return false;
    for (const auto& [occ, amp] : cb.terms())
        if (std::abs(amp - ca.amplitude(occ)) > tol) return false;
    return true;
}

// Inserts an unoccupied mode at `pos` in the registry.
inline StateVector insert_vacuum_mode(const StateVector& state, std::size_t pos,
                                      const ModeId& mode) {
    if (state.has_mode(mode))
        throw mode_registry_error("mode '" + mode.label + "' is already registered");
    if (pos > state.modes().size())
        throw mode_registry_error("vacuum insertion position out of range");
    std::vector<ModeId> modes = state.modes();
    modes.insert(modes.begin() + pos, mode);
    std::map<Occupation, Complex> terms;
    for (const auto& [occ, amp] : state.terms()) {
        Occupation extended = occ;
        extended.insert(extended.begin() + pos, 0);
        terms.emplace(std::move(extended), amp);
    }
    return StateVector(std::move(modes), std::move(terms), state.photon_cutoff());
}

}  // namespace ecpsim
