#pragma once

#include <string>
#include <vector>

#include "fock.hpp"

namespace ecpsim {

struct MeasurementBranch {
    std::string outcome;
    double probability = 0.0;
    StateVector post_state;
};

// Nondestructive parity probe: each photon in mode_plus shifts a coherent
// probe by +theta, each in mode_minus by -theta. A homodyne readout resolves
// only |delta| = |n_plus - n_minus|, so branches are keyed by that.
struct QndSpec {
    ModeId mode_plus;
    ModeId mode_minus;
    double theta = 0.0;  // carried for traceability; classes depend only on |delta|
};

inline std::string detection_label(const std::vector<ModeId>& measured, const Occupation& counts) {
    std::string out;
    for (std::size_t i = 0; i < measured.size(); ++i) {
        if (i) out += ',';
        out += measured[i].label;
        out += '=';
        out += std::to_string(counts[i]);
    }
    return out;
}

inline std::string qnd_label(int abs_delta) {
    return "qnd:|delta|=" + std::to_string(abs_delta);
}

namespace detail {

inline void require_normalized(const StateVector& state) {
    if (std::abs(norm_check(state) - 1.0) > 1e-9)
        throw std::invalid_argument("measurement requires a normalized state");
}

}  // namespace detail

// Photon-number-resolving detection on `measured`. Photons in those modes are
// destroyed and the modes leave the registry; each branch's post-state is the
// renormalized projection on the remaining modes. Branches are ordered by
// detected pattern and their probabilities sum to 1.
inline std::vector<MeasurementBranch> measure_photon_numbers(const StateVector& state,
                                                             const std::vector<ModeId>& measured) {
    detail::require_normalized(state);
    std::vector<std::size_t> idx;
    idx.reserve(measured.size());
    for (const auto& mode : measured) idx.push_back(state.mode_index(mode));
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = i + 1; j < idx.size(); ++j)
            if (idx[i] == idx[j])
                throw mode_registry_error("measured modes must be distinct");

    std::vector<ModeId> remaining;
    for (std::size_t i = 0; i < state.modes().size(); ++i)
        if (std::find(idx.begin(), idx.end(), i) == idx.end())
            remaining.push_back(state.modes()[i]);

    struct Group {
        double prob = 0.0;
        std::map<Occupation, Complex> terms;
    };
    std::map<Occupation, Group> groups;
    for (const auto& [occ, amp] : state.terms()) {
        Occupation pattern(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) pattern[i] = occ[idx[i]];
        Occupation rest;
        rest.reserve(occ.size() - idx.size());
        for (std::size_t i = 0; i < occ.size(); ++i)
            if (std::find(idx.begin(), idx.end(), i) == idx.end()) rest.push_back(occ[i]);
        Group& g = groups[std::move(pattern)];
        g.prob += std::norm(amp);
        g.terms.emplace(std::move(rest), amp);
    }

    std::vector<MeasurementBranch> branches;
    branches.reserve(groups.size());
    for (auto& [pattern, group] : groups) {
        const double scale = 1.0 / std::sqrt(group.prob);
        std::map<Occupation, Complex> terms;
        for (auto& [occ, amp] : group.terms) terms.emplace(occ, amp * scale);
        branches.push_back(MeasurementBranch{
            detection_label(measured, pattern), group.prob,
            StateVector(remaining, std::move(terms), state.photon_cutoff())});
    }
    return branches;
}

// Groups amplitudes by |n_plus - n_minus| without destroying photons: the
// post-states keep the full registry and their per-term photon counts.
inline std::vector<MeasurementBranch> qnd_measure(const StateVector& state, const QndSpec& spec) {
    detail::require_normalized(state);
    const std::size_t ip = state.mode_index(spec.mode_plus);
    const std::size_t im = state.mode_index(spec.mode_minus);
    if (ip == im) throw mode_registry_error("probe modes must be distinct");

    struct Group {
        double prob = 0.0;
        std::map<Occupation, Complex> terms;
    };
    std::map<int, Group> groups;
    for (const auto& [occ, amp] : state.terms()) {
        const int delta = occ[ip] - occ[im];
        Group& g = groups[delta < 0 ? -delta : delta];
        g.prob += std::norm(amp);
        g.terms.emplace(occ, amp);
    }

    std::vector<MeasurementBranch> branches;
    branches.reserve(groups.size());
    for (auto& [abs_delta, group] : groups) {
        const double scale = 1.0 / std::sqrt(group.prob);
        std::map<Occupation, Complex> terms;
        for (auto& [occ, amp] : group.terms) terms.emplace(occ, amp * scale);
        branches.push_back(MeasurementBranch{
            qnd_label(abs_delta), group.prob,
            StateVector(state.modes(), std::move(terms), state.photon_cutoff())});
    }
    return branches;
}

inline const MeasurementBranch& postselect(const std::vector<MeasurementBranch>& branches,
                                           const std::string& outcome) {
    for (const auto& b : branches)
        if (b.outcome == outcome) return b;
    throw branch_not_found("no branch with outcome '" + outcome + "'");
}

}  // namespace ecpsim
