#pragma once

#include <array>

#include "fock.hpp"

namespace ecpsim {

// Which input's reflected component carries the minus sign. Unitarity of a
// real two-port forces the two reflection signs to be opposite, so one choice
// fixes the whole matrix.
enum class BsConvention { in1_minus, in2_minus };

struct BeamSplitterSpec {
    ModeId in1;
    ModeId in2;
    ModeId out1;
    ModeId out2;
    double transmittance = 0.5;  // intensity fraction of in1 routed to out1
    BsConvention convention = BsConvention::in1_minus;
};

// Lossless splitter realized as a two-port with a vacuum auxiliary input, so
// in_mode's photon exits as sqrt(1-t)|reflect> + sqrt(t)|transmit> with both
// coefficients positive.
struct VbsSpec {
    ModeId in_mode;
    ModeId reflect_mode;
    ModeId transmit_mode;
    double transmittance = 0.5;  // intensity fraction routed to transmit_mode
};

namespace detail {

inline constexpr std::array<double, 13> kFactorial = {
    1.0, 1.0, 2.0, 6.0, 24.0, 120.0, 720.0, 5040.0,
    40320.0, 362880.0, 3628800.0, 39916800.0, 479001600.0};

inline double pow_int(double base, int exp) {
    double out = 1.0;
    for (int i = 0; i < exp; ++i) out *= base;
    return out;
}

inline double binomial(int n, int k) {
    return kFactorial[n] / (kFactorial[k] * kFactorial[n - k]);
}

}  // namespace detail

// Creation-operator images, rows (out1, out2) by columns (in1, in2):
//   in1+ -> sqrt(t) out1+ + s1 sqrt(1-t) out2+
//   in2+ -> sqrt(1-t) out1+ + s2 sqrt(t) out2+     with s1 s2 = -1.
inline std::array<std::array<double, 2>, 2> transfer_matrix(const BeamSplitterSpec& spec) {
    if (!(spec.transmittance >= 0.0 && spec.transmittance <= 1.0))
        throw std::invalid_argument("transmittance must lie in [0,1]");
    const double ct = std::sqrt(spec.transmittance);
    const double cr = std::sqrt(1.0 - spec.transmittance);
    const double s1 = spec.convention == BsConvention::in1_minus ? -1.0 : 1.0;
    return {{{ct, cr}, {s1 * cr, -s1 * ct}}};
}

// Expands each term's creation-operator monomial on (in1, in2) through the
// transfer matrix with exact factorial normalization. in1's registry slot
// becomes out1 and in2's becomes out2, so multimode traces keep their shape.
inline StateVector apply_beam_splitter(const StateVector& state, const BeamSplitterSpec& spec) {
    const std::size_t i1 = state.mode_index(spec.in1);
    const std::size_t i2 = state.mode_index(spec.in2);
    if (i1 == i2) throw mode_registry_error("beam splitter inputs must be distinct modes");

    std::vector<ModeId> modes = state.modes();
    modes[i1] = spec.out1;
    modes[i2] = spec.out2;

    const auto u = transfer_matrix(spec);
    std::map<Occupation, Complex> terms;
    for (const auto& [occ, amp] : state.terms()) {
        const int m = occ[i1];
        const int n = occ[i2];
        // (in1+)^m (in2+)^n / sqrt(m! n!) expanded binomially; j photons of
        // in1 and k of in2 land on out1.
        for (int j = 0; j <= m; ++j) {
            for (int k = 0; k <= n; ++k) {
                const int p = j + k;
                const int q = (m - j) + (n - k);
                const double coeff =
                    detail::binomial(m, j) * detail::binomial(n, k) *
                    detail::pow_int(u[0][0], j) * detail::pow_int(u[1][0], m - j) *
                    detail::pow_int(u[0][1], k) * detail::pow_int(u[1][1], n - k) *
                    std::sqrt(detail::kFactorial[p] * detail::kFactorial[q] /
                              (detail::kFactorial[m] * detail::kFactorial[n]));
                Occupation out = occ;
                out[i1] = p;
                out[i2] = q;
                terms[std::move(out)] += amp * coeff;
            }
        }
    }
    // Registry uniqueness (fresh output labels) is re-checked on construction.
    return StateVector(std::move(modes), std::move(terms), state.photon_cutoff());
}

inline StateVector apply_vbs(const StateVector& state, const VbsSpec& spec) {
    const std::size_t pos = state.mode_index(spec.in_mode);
    const ModeId aux{"__vbs_aux"};
    const StateVector widened = insert_vacuum_mode(state, pos, aux);
    // With the vacuum on in1, in2's image is sqrt(1-t) out1+ + s2 sqrt(t) out2+;
    // in1_minus puts the sign on the (empty) auxiliary arm, leaving both
    // surviving coefficients positive.
    const BeamSplitterSpec bs{aux,
                              spec.in_mode,
                              spec.reflect_mode,
                              spec.transmit_mode,
                              spec.transmittance,
                              BsConvention::in1_minus};
    return apply_beam_splitter(widened, bs);
}

// Applies the creation operator on `mode`: each term picks up sqrt(n+1) and
// one more photon. The result is unnormalized by design.
inline StateVector inject_photon(const StateVector& state, const ModeId& mode) {
    const std::size_t idx = state.mode_index(mode);
    std::map<Occupation, Complex> terms;
    for (const auto& [occ, amp] : state.terms()) {
        Occupation raised = occ;
        raised[idx] += 1;
        terms.emplace(std::move(raised), amp * std::sqrt(static_cast<double>(occ[idx] + 1)));
    }
    return StateVector(state.modes(), std::move(terms), state.photon_cutoff());
}

}  // namespace ecpsim
