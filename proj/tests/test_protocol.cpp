#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ecpsim/protocol.hpp"
#include "test_util.hpp"

namespace ecpsim {
namespace {

// Closed-form unconditional round probabilities on the optimal schedule,
// written out directly so the implementation is checked against independent
// arithmetic:
//   P_1 = 2 a b            with a = alpha^2, b = 1 - alpha^2
//   P_2 = 2 (ab)^2 / (a^2 + b^2)
//   P_3 = 2 (ab)^4 / ((a^2 + b^2)(a^4 + b^4))
//   P_4 = 2 (ab)^8 / ((a^2 + b^2)(a^4 + b^4)(a^8 + b^8))
double direct_round_probability(double a, int n) {
    const double b = 1.0 - a;
    switch (n) {
        case 1: return 2.0 * a * b;
        case 2: return 2.0 * std::pow(a * b, 2) / (a * a + b * b);
        case 3:
            return 2.0 * std::pow(a * b, 4) /
                   ((a * a + b * b) * (std::pow(a, 4) + std::pow(b, 4)));
        case 4:
            return 2.0 * std::pow(a * b, 8) /
                   ((a * a + b * b) * (std::pow(a, 4) + std::pow(b, 4)) *
                    (std::pow(a, 8) + std::pow(b, 8)));
        default: throw std::domain_error("no direct form tabulated");
    }
}

TEST(InitialState, EncodesAlphaAndRejectsDegenerateInputs) {
    ProtocolParams params;
    params.alpha_sq = 0.8;
    const auto s = initial_state(params);
    EXPECT_NEAR(s.amplitude({1, 0}).real(), std::sqrt(0.8), 1e-15);
    EXPECT_NEAR(s.amplitude({0, 1}).real(), std::sqrt(0.2), 1e-15);
    EXPECT_NEAR(norm_check(s), 1.0, 1e-15);

    for (double bad : {0.0, 1.0, -0.1, 1.1}) {
        params.alpha_sq = bad;
        EXPECT_THROW(initial_state(params), degenerate_input) << "alpha_sq=" << bad;
    }
}

TEST(OptimalTransmittance, FirstRoundMatchesPairWeight) {
    EXPECT_DOUBLE_EQ(optimal_transmittance(0.8, 1), 0.8);
    EXPECT_DOUBLE_EQ(optimal_transmittance(0.05, 1), 0.05);
}

TEST(OptimalTransmittance, SecondRoundFrozenValue) {
    // alpha^4 / (alpha^4 + beta^4) at alpha^2 = 0.8 is 16/17.
    EXPECT_NEAR(optimal_transmittance(0.8, 2), 16.0 / 17.0, 1e-15);
    EXPECT_NEAR(optimal_transmittance(0.8, 2), 0.9411764705882353, 1e-15);
    EXPECT_NEAR(optimal_transmittance(0.8, 2), 0.64 / 0.68, 1e-15);
    EXPECT_NEAR(optimal_transmittance(0.3, 3), std::pow(0.3, 4) /
                                                   (std::pow(0.3, 4) + std::pow(0.7, 4)),
                1e-15);
}

TEST(OptimalTransmittance, BalancedPairStaysBalanced) {
    for (int n : {1, 2, 5, 20, 60}) EXPECT_DOUBLE_EQ(optimal_transmittance(0.5, n), 0.5);
}

TEST(OptimalTransmittance, DeepRoundsSaturateWithoutNan) {
    for (int n : {10, 30, 60}) {
        const double lo = optimal_transmittance(0.05, n);
        const double hi = optimal_transmittance(0.95, n);
        EXPECT_TRUE(std::isfinite(lo));
        EXPECT_TRUE(std::isfinite(hi));
        EXPECT_GE(lo, 0.0);
        EXPECT_LE(hi, 1.0);
    }
    EXPECT_EQ(optimal_transmittance(0.05, 60), 0.0);
    EXPECT_EQ(optimal_transmittance(0.95, 60), 1.0);
}

TEST(OptimalTransmittance, RejectsBadArguments) {
    EXPECT_THROW(optimal_transmittance(0.0, 1), degenerate_input);
    EXPECT_THROW(optimal_transmittance(1.0, 1), degenerate_input);
    EXPECT_THROW(optimal_transmittance(0.5, 0), std::domain_error);
}

TEST(AnalyticRoundProbability, MatchesDirectFormsAtLowOrders) {
    for (double a : {0.3, 0.5, 0.8}) {
        for (int n = 1; n <= 4; ++n) {
            EXPECT_NEAR(analytic_round_probability(a, n), direct_round_probability(a, n),
                        1e-14)
                << "alpha_sq=" << a << " n=" << n;
        }
    }
    EXPECT_NEAR(analytic_round_probability(0.8, 3), 0.0046875715266651305, 1e-15);
}

TEST(AnalyticRoundProbability, BalancedInputIsGeometric) {
    for (int n = 1; n <= 20; ++n)
        EXPECT_NEAR(analytic_round_probability(0.5, n), std::ldexp(1.0, -n), 1e-14);
}

TEST(AnalyticRoundProbability, DeepRoundsStayFinite) {
    // Direct evaluation of the product form is 0/0 here; the log-space path
    // must return a finite (possibly denormal or zero) probability.
    for (int n : {8, 10, 15}) {
        const double p = analytic_round_probability(0.05, n);
        EXPECT_TRUE(std::isfinite(p));
        EXPECT_GE(p, 0.0);
        EXPECT_LT(p, 1e-10);
    }
    EXPECT_THROW(analytic_round_probability(0.5, 0), std::domain_error);
    EXPECT_THROW(analytic_round_probability(1.0, 2), degenerate_input);
}

TEST(AnalyticRoundProbability, SquaredFinalFactorVariantDisagrees) {
    // Doubling the last denominator factor breaks even the balanced case:
    // it yields 1/2 at alpha_sq = 0.5, n = 2, where the true value is 1/4.
    EXPECT_NEAR(analytic_round_probability_final_factor_squared(0.5, 2), 0.5, 1e-14);
    EXPECT_NEAR(analytic_round_probability(0.5, 2), 0.25, 1e-14);
    // For n = 1 there is no denominator, so the variants coincide.
    EXPECT_NEAR(analytic_round_probability_final_factor_squared(0.8, 1),
                analytic_round_probability(0.8, 1), 1e-15);
}

TEST(Ecp1, OptimalRunMatchesClosedForm) {
    ProtocolParams params;
    params.alpha_sq = 0.8;
    const auto report = run_ecp1(params);
    EXPECT_EQ(report.protocol, "ecp1");
    ASSERT_EQ(report.rounds.size(), 1u);
    const auto& round = report.rounds[0];
    EXPECT_DOUBLE_EQ(round.t_used, 0.8);
    EXPECT_NEAR(report.p_total, 0.32, 1e-12);  // 2 alpha^2 beta^2
    EXPECT_GE(round.output_fidelity, 1.0 - 1e-9);
    ASSERT_TRUE(report.failure_breakdown.has_value());
    EXPECT_NEAR(report.failure_breakdown->no_click, 0.64, 1e-12);    // alpha^2 t
    EXPECT_NEAR(report.failure_breakdown->two_photon, 0.04, 1e-12);  // beta^2 (1-t)
    EXPECT_NEAR(report.p_total + round.failure_prob_unconditional, 1.0, 1e-12);
    ASSERT_EQ(report.analytic_p.size(), 1u);
    EXPECT_NEAR(report.analytic_p[0], 0.32, 1e-12);
    EXPECT_LT(report.discrepancy_max, 1e-12);
    const std::vector<std::string> corrected{"d1=0,d2=1"};
    EXPECT_EQ(round.corrected_branches, corrected);
}

TEST(Ecp1, BalancedInputSucceedsHalfTheTime) {
    ProtocolParams params;
    params.alpha_sq = 0.5;
    const auto report = run_ecp1(params);
    EXPECT_NEAR(report.p_total, 0.5, 1e-12);
    EXPECT_GE(report.rounds[0].output_fidelity, 1.0 - 1e-9);
}

TEST(Ecp1, SuboptimalSplitterLowersFidelityNotLedger) {
    ProtocolParams params;
    params.alpha_sq = 0.8;
    params.transmittance_override = 0.5;
    const auto report = run_ecp1(params);
    const auto& round = report.rounds[0];
    EXPECT_DOUBLE_EQ(round.t_used, 0.5);
    EXPECT_NEAR(report.p_total, 0.5, 1e-12);  // alpha^2(1-t) + beta^2 t
    // Unbalanced output (alpha|10> + beta|01>): overlap (alpha+beta)^2/2.
    EXPECT_NEAR(round.output_fidelity, 0.9, 1e-12);
    EXPECT_NEAR(report.p_total + round.failure_prob_unconditional, 1.0, 1e-12);
}

TEST(Ecp1, SuccessMatchesFormulaAcrossGrid) {
    for (int i = 1; i <= 9; ++i) {
        ProtocolParams params;
        params.alpha_sq = i / 10.0;
        const auto report = run_ecp1(params);
        const double expected = 2.0 * params.alpha_sq * (1.0 - params.alpha_sq);
        EXPECT_NEAR(report.p_total, expected, 1e-12) << "alpha_sq=" << params.alpha_sq;
        EXPECT_GE(report.rounds[0].output_fidelity, 1.0 - 1e-9);
    }
}

TEST(Ecp1, RejectsEndpointOverride) {
    ProtocolParams params;
    params.alpha_sq = 0.8;
    params.transmittance_override = 0.0;
    EXPECT_THROW(run_ecp1(params), degenerate_input);
    params.transmittance_override = 1.0;
    EXPECT_THROW(run_ecp1(params), degenerate_input);
}

TEST(Ecp2Round, OptimalFirstRoundMatchesClosedForm) {
    const double a = std::sqrt(0.8), b = std::sqrt(0.2);
    const auto round = run_ecp2_round({a, b}, 0.8);
    EXPECT_NEAR(round.outcome.success_prob_unconditional, 0.32, 1e-12);
    EXPECT_NEAR(round.outcome.recycle_prob_unconditional, 0.68, 1e-12);
    EXPECT_GE(round.outcome.output_fidelity, 1.0 - 1e-9);

    // The kept pair renormalizes to (alpha^2, beta^2)/sqrt(alpha^4 + beta^4)
    // = (0.8, 0.2)/sqrt(0.68).
    const double norm = std::sqrt(0.68);
    EXPECT_NEAR(round.outcome.recycle_coefficients[0], 0.8 / norm, 1e-12);
    EXPECT_NEAR(round.outcome.recycle_coefficients[1], 0.2 / norm, 1e-12);

    const std::vector<std::string> corrected{"d1=0,d2=1", "e1=0,e2=1"};
    EXPECT_EQ(round.outcome.corrected_branches, corrected);
}

TEST(Ecp2Round, DetectorBranchesSplitEvenly) {
    const double a = std::sqrt(0.7), b = std::sqrt(0.3);
    const auto round = run_ecp2_round({a, b}, 0.7);
    ASSERT_EQ(round.success_branches.size(), 2u);
    ASSERT_EQ(round.recycle_branches.size(), 2u);
    for (const auto& b2 : round.success_branches) EXPECT_NEAR(b2.probability, 0.5, 1e-12);
    for (const auto& b2 : round.recycle_branches) EXPECT_NEAR(b2.probability, 0.5, 1e-12);
    // After the feed-forward flip both success branches hold the same pair.
    EXPECT_GT(fidelity(round.success_branches[0].post_state,
                       round.success_branches[1].post_state),
              1.0 - 1e-12);
    EXPECT_GT(fidelity(round.recycle_branches[0].post_state,
                       round.recycle_branches[1].post_state),
              1.0 - 1e-12);
}

TEST(Ecp2Round, BalancedPairIsAFixedPoint) {
    const double r = std::sqrt(0.5);
    const auto round = run_ecp2_round({r, r}, 0.5);
    EXPECT_NEAR(round.outcome.success_prob_unconditional, 0.5, 1e-12);
    EXPECT_NEAR(round.outcome.recycle_prob_unconditional, 0.5, 1e-12);
    EXPECT_NEAR(round.outcome.recycle_coefficients[0], r, 1e-12);
    EXPECT_NEAR(round.outcome.recycle_coefficients[1], r, 1e-12);
}

TEST(Ecp2Round, SecondRoundConditionalProbability) {
    // Feeding the squared cascade pair through its optimal splitter gives
    // the conditional success 2 a^2 b^2 / (a^2 + b^2)^2 with a = alpha^2.
    const double a = 0.8, b = 0.2;
    const double norm = std::sqrt(a * a + b * b);
    const double t2 = (a * a) / (a * a + b * b);
    const auto round = run_ecp2_round({a / norm, b / norm}, t2);
    const double expected = 2.0 * a * a * b * b / std::pow(a * a + b * b, 2);
    EXPECT_NEAR(round.outcome.success_prob_unconditional, expected, 1e-12);
    EXPECT_GE(round.outcome.output_fidelity, 1.0 - 1e-9);
}

TEST(Ecp2Round, ValidatesArguments) {
    const double r = std::sqrt(0.5);
    EXPECT_THROW(run_ecp2_round({r, r}, -0.1), degenerate_input);
    EXPECT_THROW(run_ecp2_round({r, r}, 1.1), degenerate_input);
    EXPECT_THROW(run_ecp2_round({1.0, 1.0}, 0.5), std::invalid_argument);
    EXPECT_THROW(run_ecp2_round({-r, r}, 0.5), std::invalid_argument);
    // Endpoint transmittances are legal: the deep-round schedule saturates.
    EXPECT_NO_THROW(run_ecp2_round({r, r}, 0.0));
    EXPECT_NO_THROW(run_ecp2_round({r, r}, 1.0));
}

TEST(Ecp2, RoundTableMatchesAnalyticSchedule) {
    for (double a : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        ProtocolParams params;
        params.alpha_sq = a;
        params.rounds = 6;
        const auto report = run_ecp2(params);
        ASSERT_EQ(report.rounds.size(), 6u);
        ASSERT_EQ(report.analytic_p.size(), 6u);
        EXPECT_LT(report.discrepancy_max, 1e-12) << "alpha_sq=" << a;
        double total = 0.0;
        for (int k = 0; k < 6; ++k) {
            EXPECT_NEAR(report.rounds[k].success_prob_unconditional, report.analytic_p[k],
                        1e-12)
                << "alpha_sq=" << a << " round=" << k + 1;
            total += report.rounds[k].success_prob_unconditional;
        }
        EXPECT_NEAR(report.p_total, total, 1e-15);
    }
}

TEST(Ecp2, FrozenThreeRoundValues) {
    ProtocolParams params;
    params.alpha_sq = 0.8;
    params.rounds = 3;
    const auto report = run_ecp2(params);
    EXPECT_NEAR(report.rounds[0].success_prob_unconditional, 0.32, 1e-12);
    EXPECT_NEAR(report.rounds[1].success_prob_unconditional, 0.07529411764705882, 1e-12);
    EXPECT_NEAR(report.rounds[2].success_prob_unconditional, 0.0046875715266651305,
                1e-12);
    EXPECT_NEAR(report.rounds[1].t_used, 16.0 / 17.0, 1e-15);
}

TEST(Ecp2, BalancedTenRoundsLeaveOnePartIn1024) {
    ProtocolParams params;
    params.alpha_sq = 0.5;
    params.rounds = 10;
    const auto report = run_ecp2(params);
    EXPECT_NEAR(report.p_total, 0.9990234375, 1e-12);  // 1 - 2^-10
    for (int k = 0; k < 10; ++k)
        EXPECT_NEAR(report.rounds[k].success_prob_unconditional, std::ldexp(1.0, -(k + 1)),
                    1e-12);
}

TEST(Ecp2, SingleRoundAgreesWithLinearOpticsSuccess) {
    for (double a : {0.2, 0.5, 0.8}) {
        ProtocolParams params;
        params.alpha_sq = a;
        params.rounds = 1;
        EXPECT_NEAR(run_ecp2(params).p_total, run_ecp1(params).p_total, 1e-12);
    }
}

TEST(Ecp2, RecycleCoefficientsFollowSquaringCascade) {
    // After round k the kept pair is (alpha^(2^k), beta^(2^k)) renormalized.
    // Computed in log space; entries below the sparse truncation scale are
    // legitimately rounded away, so those rounds get the looser bound.
    for (double a : {0.2, 0.35, 0.5, 0.65, 0.8}) {
        ProtocolParams params;
        params.alpha_sq = a;
        params.rounds = 6;
        const auto report = run_ecp2(params);
        for (int k = 1; k <= 6; ++k) {
            const double la = std::ldexp(0.5 * std::log(a), k);
            const double lb = std::ldexp(0.5 * std::log1p(-a), k);
            const double hi = std::max(la, lb);
            const double lnorm =
                hi + 0.5 * std::log1p(std::exp(2.0 * (std::min(la, lb) - hi)));
            const double c0 = std::exp(la - lnorm);
            const double c1 = std::exp(lb - lnorm);
            const double tol = std::min(c0, c1) >= 1e-9 ? 1e-12 : 1e-9;
            EXPECT_NEAR(report.rounds[k - 1].recycle_coefficients[0], c0, tol)
                << "alpha_sq=" << a << " round=" << k;
            EXPECT_NEAR(report.rounds[k - 1].recycle_coefficients[1], c1, tol)
                << "alpha_sq=" << a << " round=" << k;
        }
    }
}

TEST(Ecp2, SurvivingMassIsConservedRoundByRound) {
    for (double a : {0.15, 0.5, 0.85}) {
        ProtocolParams params;
        params.alpha_sq = a;
        params.rounds = 6;
        const auto report = run_ecp2(params);
        double mass = 1.0;
        for (const auto& round : report.rounds) {
            EXPECT_NEAR(round.success_prob_unconditional + round.recycle_prob_unconditional,
                        mass, 1e-12)
                << "alpha_sq=" << a << " round=" << round.round_index;
            mass = round.recycle_prob_unconditional;
        }
    }
}

TEST(Ecp2, FidelityIsUnityWheneverSuccessMassIsMeaningful) {
    for (double a : {0.05, 0.3, 0.5, 0.7, 0.95}) {
        ProtocolParams params;
        params.alpha_sq = a;
        params.rounds = 8;
        const auto report = run_ecp2(params);
        for (const auto& round : report.rounds) {
            if (round.success_prob_unconditional > 1e-12) {
                EXPECT_GE(round.output_fidelity, 1.0 - 1e-9)
                    << "alpha_sq=" << a << " round=" << round.round_index;
            }
        }
    }
}

TEST(Ecp2, ConstantOverrideSkipsAnalyticComparison) {
    ProtocolParams params;
    params.alpha_sq = 0.8;
    params.rounds = 4;
    params.transmittance_override = 0.5;
    const auto report = run_ecp2(params);
    EXPECT_TRUE(report.analytic_p.empty());
    EXPECT_EQ(report.discrepancy_max, 0.0);
    for (const auto& round : report.rounds) EXPECT_DOUBLE_EQ(round.t_used, 0.5);
}

TEST(Ecp2, RejectsBadParameters) {
    ProtocolParams params;
    params.alpha_sq = 0.8;
    params.rounds = 0;
    EXPECT_THROW(run_ecp2(params), std::domain_error);
    params.rounds = 2;
    params.alpha_sq = 1.0;
    EXPECT_THROW(run_ecp2(params), degenerate_input);
    params.alpha_sq = 0.8;
    params.transmittance_override = 1.0;
    EXPECT_THROW(run_ecp2(params), degenerate_input);
}

TEST(PTotalCurve, SymmetricAndPeakedAtBalance) {
    const std::vector<double> grid{0.2, 0.35, 0.5, 0.65, 0.8};
    const auto curve = p_total_curve(grid, 10);
    ASSERT_EQ(curve.size(), grid.size());
    EXPECT_NEAR(curve[0].second, curve[4].second, 1e-12);  // 0.2 vs 0.8
    EXPECT_NEAR(curve[1].second, curve[3].second, 1e-12);  // 0.35 vs 0.65
    EXPECT_GT(curve[2].second, curve[1].second);
    EXPECT_GT(curve[1].second, curve[0].second);
    EXPECT_NEAR(curve[2].second, 0.9990234375, 1e-12);
}

}  // namespace
}  // namespace ecpsim
