#pragma once

#include <array>
#include <numbers>
#include <optional>

#include "measurement.hpp"
#include "optics.hpp"

namespace ecpsim {

// Canonical mode names used by the protocol traces.
namespace modes {
inline const ModeId a1{"a1"};  // Alice's arm of the shared pair
inline const ModeId b1{"b1"};  // Bob's arm of the shared pair
inline const ModeId b2{"b2"};  // Bob's auxiliary single photon
inline const ModeId c1{"c1"};  // splitter output, reflected
inline const ModeId c2{"c2"};  // splitter output, transmitted
inline const ModeId d1{"d1"};  // success-arm detector
inline const ModeId d2{"d2"};  // success-arm detector
inline const ModeId e1{"e1"};  // recycle-arm detector
inline const ModeId e2{"e2"};  // recycle-arm detector
}  // namespace modes

struct ProtocolParams {
    double alpha_sq = 0.5;  // |alpha|^2 of the shared pair alpha|10> + beta|01>
    std::optional<double> transmittance_override;  // constant-t schedule when set
    int rounds = 1;
    double theta = 0.0;  // probe phase per photon, reporting only
};

struct RoundOutcome {
    int round_index = 0;
    double t_used = 0.0;
    double success_prob_unconditional = 0.0;
    double recycle_prob_unconditional = 0.0;
    double failure_prob_unconditional = 0.0;
    double output_fidelity = 0.0;  // min over success branches vs the balanced pair
    std::array<double, 2> recycle_coefficients{0.0, 0.0};
    std::vector<std::string> corrected_branches;  // outcomes that needed the pi flip
};

struct Ecp1FailureBreakdown {
    double no_click = 0.0;
    double two_photon = 0.0;
};

struct ConcentrationReport {
    std::string protocol;  // "ecp1" or "ecp2"
    ProtocolParams params;
    std::vector<RoundOutcome> rounds;
    double p_total = 0.0;
    std::vector<double> analytic_p;  // empty when the schedule is overridden
    double discrepancy_max = 0.0;
    std::optional<Ecp1FailureBreakdown> failure_breakdown;  // linear-optics run only
};

inline StateVector maximally_entangled(const ModeId& m1, const ModeId& m2) {
    const double r = std::numbers::sqrt2 / 2.0;
    return StateVector({m1, m2}, {{{1, 0}, r}, {{0, 1}, r}});
}

// alpha|1,0> + beta|0,1> on (a1, b1) with alpha = sqrt(alpha_sq) real.
inline StateVector initial_state(const ProtocolParams& params) {
    if (!(params.alpha_sq > 0.0 && params.alpha_sq < 1.0))
        throw degenerate_input("alpha_sq must lie strictly inside (0,1); "
                               "the endpoint states carry no entanglement");
    const double a = std::sqrt(params.alpha_sq);
    const double b = std::sqrt(1.0 - params.alpha_sq);
    return StateVector({modes::a1, modes::b1}, {{{1, 0}, a}, {{0, 1}, b}});
}

// Round-n transmittance alpha^(2^n) / (alpha^(2^n) + beta^(2^n)), evaluated as
// a sigmoid of the scaled log ratio so deep rounds never underflow to 0/0.
// Saturates to exactly 0 or 1 once the true value leaves double range.
inline double optimal_transmittance(double alpha_sq, int round_n) {
    if (!(alpha_sq > 0.0 && alpha_sq < 1.0))
        throw degenerate_input("alpha_sq must lie strictly inside (0,1)");
    if (round_n < 1) throw std::domain_error("round index must be >= 1");
    if (round_n == 1) return alpha_sq;
    const double x = std::ldexp(std::log(alpha_sq) - std::log1p(-alpha_sq), round_n - 1);
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

namespace detail {

// log(alpha^(2^k) + beta^(2^k)) from log alpha, log beta.
inline double log_sum_pow(double log_a, double log_b, int k) {
    const double xa = std::ldexp(log_a, k);
    const double xb = std::ldexp(log_b, k);
    const double hi = std::max(xa, xb);
    return hi + std::log1p(std::exp(std::min(xa, xb) - hi));
}

inline double log_round_probability(double alpha_sq, int round_n) {
    if (!(alpha_sq > 0.0 && alpha_sq < 1.0))
        throw degenerate_input("alpha_sq must lie strictly inside (0,1)");
    if (round_n < 1) throw std::domain_error("round index must be >= 1");
    const double log_a = 0.5 * std::log(alpha_sq);
    const double log_b = 0.5 * std::log1p(-alpha_sq);
    double lp = std::numbers::ln2 + std::ldexp(log_a + log_b, round_n);
    for (int k = 2; k <= round_n; ++k) lp -= log_sum_pow(log_a, log_b, k);
    return lp;
}

}  // namespace detail

// Unconditional round-n success probability on the optimal schedule:
//   P_n = 2 (alpha beta)^(2^n) / prod_{k=2..n} (alpha^(2^k) + beta^(2^k)).
// Computed in log space; direct evaluation is 0/0 for n around 10.
inline double analytic_round_probability(double alpha_sq, int round_n) {
    return std::exp(detail::log_round_probability(alpha_sq, round_n));
}

// Same product but with the final denominator factor squared. This variant is
// inconsistent with the n = 2..4 closed forms and with the balanced limit
// (it gives P_2 = 1/2 at alpha_sq = 0.5 where the true value is 1/4); the
// brute-force certifier quantifies that, see oracle.hpp.
inline double analytic_round_probability_final_factor_squared(double alpha_sq, int round_n) {
    double lp = detail::log_round_probability(alpha_sq, round_n);
    if (round_n >= 2) {
        const double log_a = 0.5 * std::log(alpha_sq);
        const double log_b = 0.5 * std::log1p(-alpha_sq);
        lp -= detail::log_sum_pow(log_a, log_b, round_n);
    }
    return std::exp(lp);
}

namespace detail {

inline const MeasurementBranch* find_branch(const std::vector<MeasurementBranch>& branches,
                                            const std::string& outcome) {
    for (const auto& b : branches)
        if (b.outcome == outcome) return &b;
    return nullptr;
}

inline void require_valid_override(const std::optional<double>& t) {
    if (t && !(*t > 0.0 && *t < 1.0))
        throw degenerate_input("transmittance override must lie strictly inside (0,1)");
}

}  // namespace detail

// Linear-optics variant: split Bob's auxiliary photon on a variable splitter,
// interfere the reflected arm with b1 on a balanced splitter, keep exactly one
// click across (d1, d2). The d2 branch gets a pi flip on c2 so both successes
// collapse onto the same balanced pair on (a1, c2).
inline ConcentrationReport run_ecp1(const ProtocolParams& params) {
    const StateVector pair = initial_state(params);
    detail::require_valid_override(params.transmittance_override);
    const double t = params.transmittance_override
                         ? *params.transmittance_override
                         : optimal_transmittance(params.alpha_sq, 1);

    const StateVector split = apply_vbs(
        StateVector::basis({modes::b2}, {1}),
        VbsSpec{modes::b2, modes::c1, modes::c2, t});
    const StateVector joint = tensor(pair, split);
    const StateVector mixed = apply_beam_splitter(
        joint, BeamSplitterSpec{modes::b1, modes::c1, modes::d1, modes::d2, 0.5,
                                BsConvention::in1_minus});
    const auto branches = measure_photon_numbers(mixed, {modes::d1, modes::d2});

    const std::vector<ModeId> dets{modes::d1, modes::d2};
    const StateVector target = maximally_entangled(modes::a1, modes::c2);

    RoundOutcome round;
    round.round_index = 1;
    round.t_used = t;
    double fid = 1.0;
    bool any_success = false;
    if (const auto* b = detail::find_branch(branches, detection_label(dets, {1, 0}))) {
        round.success_prob_unconditional += b->probability;
        fid = std::min(fid, fidelity(b->post_state, target));
        any_success = true;
    }
    if (const auto* b = detail::find_branch(branches, detection_label(dets, {0, 1}))) {
        round.success_prob_unconditional += b->probability;
        const StateVector corrected =
            apply_mode_phase(b->post_state, modes::c2, std::numbers::pi);
        fid = std::min(fid, fidelity(corrected, target));
        round.corrected_branches.push_back(b->outcome);
        any_success = true;
    }
    Ecp1FailureBreakdown failure;
    if (const auto* b = detail::find_branch(branches, detection_label(dets, {0, 0})))
        failure.no_click = b->probability;
    if (const auto* b = detail::find_branch(branches, detection_label(dets, {2, 0})))
        failure.two_photon += b->probability;
    if (const auto* b = detail::find_branch(branches, detection_label(dets, {0, 2})))
        failure.two_photon += b->probability;
    round.failure_prob_unconditional = failure.no_click + failure.two_photon;
    round.output_fidelity = any_success ? fid : 0.0;

    ConcentrationReport report;
    report.protocol = "ecp1";
    report.params = params;
    report.params.rounds = 1;
    report.rounds.push_back(round);
    report.p_total = round.success_prob_unconditional;
    report.analytic_p = {params.alpha_sq * (1.0 - t) + (1.0 - params.alpha_sq) * t};
    report.discrepancy_max = std::abs(round.success_prob_unconditional - report.analytic_p[0]);
    report.failure_breakdown = failure;
    return report;
}

// One nondestructive round with full branch detail. Probabilities are
// conditional on entering the round (the caller rescales by surviving mass).
struct Ecp2Round {
    RoundOutcome outcome;
    std::vector<MeasurementBranch> success_branches;  // on (a1, c2), pi flips applied
    std::vector<MeasurementBranch> recycle_branches;  // on (a1, b1), pi flips applied
};

// Round body: split the auxiliary photon at transmittance t, compare photon
// numbers on (b1, c1) with the probe, then either interfere (b1, c1) on the
// balanced splitter and detect (success class, |delta| = 1) or interfere
// (c1, c2) and detect (recycle class, |delta| = 0). t may sit at an endpoint:
// the deep-round schedule saturates there in double precision, which only
// removes zero-probability branches.
inline Ecp2Round run_ecp2_round(std::array<double, 2> coeffs, double t, double theta = 0.0) {
    if (!(t >= 0.0 && t <= 1.0))
        throw degenerate_input("round transmittance must lie in [0,1]");
    if (!(coeffs[0] >= 0.0) || !(coeffs[1] >= 0.0) ||
        std::abs(coeffs[0] * coeffs[0] + coeffs[1] * coeffs[1] - 1.0) > 1e-9)
        throw std::invalid_argument("round coefficients must be normalized and non-negative");

    const StateVector pair = StateVector(
        {modes::a1, modes::b1}, {{{1, 0}, coeffs[0]}, {{0, 1}, coeffs[1]}});
    const StateVector split = apply_vbs(
        StateVector::basis({modes::b2}, {1}),
        VbsSpec{modes::b2, modes::c1, modes::c2, t});
    const StateVector joint = tensor(pair, split);
    const auto classes = qnd_measure(joint, QndSpec{modes::b1, modes::c1, theta});

    Ecp2Round round;
    round.outcome.t_used = t;
    round.outcome.recycle_coefficients = coeffs;  // pass-through when no recycle mass

    const std::vector<ModeId> dets_d{modes::d1, modes::d2};
    const std::vector<ModeId> dets_e{modes::e1, modes::e2};
    const StateVector target = maximally_entangled(modes::a1, modes::c2);

    if (const auto* cls = detail::find_branch(classes, qnd_label(1))) {
        round.outcome.success_prob_unconditional = cls->probability;
        // Balanced splitter with the minus on c1: b1+ -> (d1+ + d2+)/sqrt(2),
        // c1+ -> (d1+ - d2+)/sqrt(2).
        const StateVector interfered = apply_beam_splitter(
            cls->post_state, BeamSplitterSpec{modes::b1, modes::c1, modes::d1, modes::d2,
                                              0.5, BsConvention::in2_minus});
        double fid = 1.0;
        bool any = false;
        for (const auto& b : measure_photon_numbers(interfered, {modes::d1, modes::d2})) {
            MeasurementBranch kept = b;
            if (b.outcome == detection_label(dets_d, {0, 1})) {
                kept.post_state = apply_mode_phase(b.post_state, modes::c2, std::numbers::pi);
                round.outcome.corrected_branches.push_back(b.outcome);
            }
            fid = std::min(fid, fidelity(kept.post_state, target));
            any = true;
            round.success_branches.push_back(std::move(kept));
        }
        round.outcome.output_fidelity = any ? fid : 0.0;
    }

    if (const auto* cls = detail::find_branch(classes, qnd_label(0))) {
        round.outcome.recycle_prob_unconditional = cls->probability;
        // Balanced splitter with the minus on c1 again, now against c2:
        // c1+ -> (e1+ - e2+)/sqrt(2), c2+ -> (e1+ + e2+)/sqrt(2).
        const StateVector interfered = apply_beam_splitter(
            cls->post_state, BeamSplitterSpec{modes::c1, modes::c2, modes::e1, modes::e2,
                                              0.5, BsConvention::in1_minus});
        for (const auto& b : measure_photon_numbers(interfered, {modes::e1, modes::e2})) {
            MeasurementBranch kept = b;
            if (b.outcome == detection_label(dets_e, {0, 1})) {
                kept.post_state = apply_mode_phase(b.post_state, modes::b1, std::numbers::pi);
                round.outcome.corrected_branches.push_back(b.outcome);
            }
            round.recycle_branches.push_back(std::move(kept));
        }
        if (!round.recycle_branches.empty()) {
            // Both corrected branches carry the same pair; read the first.
            const StateVector& s = round.recycle_branches.front().post_state;
            const double ca = s.amplitude({1, 0}).real();
            const double cb = s.amplitude({0, 1}).real();
            const double norm = std::hypot(ca, cb);
            round.outcome.recycle_coefficients = {ca / norm, cb / norm};
        }
    }
    return round;
}

// Full recycled protocol: run rounds on the per-round optimal schedule (or a
// constant override), feeding each round's renormalized recycle pair into the
// next and tracking the unconditional surviving mass separately so nothing
// underflows.
inline ConcentrationReport run_ecp2(const ProtocolParams& params) {
    if (!(params.alpha_sq > 0.0 && params.alpha_sq < 1.0))
        throw degenerate_input("alpha_sq must lie strictly inside (0,1)");
    if (params.rounds < 1) throw std::domain_error("rounds must be >= 1");
    detail::require_valid_override(params.transmittance_override);

    ConcentrationReport report;
    report.protocol = "ecp2";
    report.params = params;

    std::array<double, 2> coeffs{std::sqrt(params.alpha_sq),
                                 std::sqrt(1.0 - params.alpha_sq)};
    double mass = 1.0;
    for (int k = 1; k <= params.rounds; ++k) {
        const double t = params.transmittance_override
                             ? *params.transmittance_override
                             : optimal_transmittance(params.alpha_sq, k);
        Ecp2Round round = run_ecp2_round(coeffs, t, params.theta);
        RoundOutcome outcome = std::move(round.outcome);
        outcome.round_index = k;
        outcome.success_prob_unconditional *= mass;
        outcome.recycle_prob_unconditional *= mass;
        report.p_total += outcome.success_prob_unconditional;
        coeffs = outcome.recycle_coefficients;
        mass = outcome.recycle_prob_unconditional;
        report.rounds.push_back(std::move(outcome));
    }
    if (!params.transmittance_override) {
        for (int k = 1; k <= params.rounds; ++k) {
            report.analytic_p.push_back(analytic_round_probability(params.alpha_sq, k));
            report.discrepancy_max =
                std::max(report.discrepancy_max,
                         std::abs(report.rounds[k - 1].success_prob_unconditional -
                                  report.analytic_p[k - 1]));
        }
    }
    return report;
}

// Total success probability after `rounds` recycling rounds for each grid
// point, on the optimal schedule.
inline std::vector<std::pair<double, double>> p_total_curve(
    const std::vector<double>& alpha_sq_grid, int rounds) {
    std::vector<std::pair<double, double>> curve;
    curve.reserve(alpha_sq_grid.size());
    for (double alpha_sq : alpha_sq_grid) {
        ProtocolParams params;
        params.alpha_sq = alpha_sq;
        params.rounds = rounds;
        curve.emplace_back(alpha_sq, run_ecp2(params).p_total);
    }
    return curve;
}

}  // namespace ecpsim
