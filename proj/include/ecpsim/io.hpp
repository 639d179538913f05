#pragma once

#include <array>
#include <charconv>
#include <string>

#include <json.hpp>

#include "oracle.hpp"
#include "protocol.hpp"

namespace ecpsim::io {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kCsvBanner = "# ecpsim csv v1";

// 17 significant digits: enough to reproduce any double exactly, and a fixed
// width-independent format so equal inputs always yield identical bytes.
inline std::string format_double(double value) {
    std::array<char, 40> buf;
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value,
                                   std::chars_format::general, 17);
    return std::string(buf.data(), res.ptr);
}

inline nlohmann::json to_json(const ProtocolParams& params) {
    nlohmann::json j;
    j["alpha_sq"] = params.alpha_sq;
    if (params.transmittance_override)
        j["transmittance_override"] = *params.transmittance_override;
    else
        j["transmittance_override"] = nullptr;
    j["rounds"] = params.rounds;
    j["theta"] = params.theta;
    return j;
}

inline nlohmann::json to_json(const RoundOutcome& round) {
    return nlohmann::json{
        {"round_index", round.round_index},
        {"t_used", round.t_used},
        {"success_prob_unconditional", round.success_prob_unconditional},
        {"recycle_prob_unconditional", round.recycle_prob_unconditional},
        {"failure_prob_unconditional", round.failure_prob_unconditional},
        {"output_fidelity", round.output_fidelity},
        {"recycle_coefficients",
         {round.recycle_coefficients[0], round.recycle_coefficients[1]}},
        {"corrected_branches", round.corrected_branches}};
}

inline nlohmann::json to_json(const ConcentrationReport& report) {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["protocol"] = report.protocol;
    j["params"] = to_json(report.params);
    j["rounds"] = nlohmann::json::array();
    for (const auto& round : report.rounds) j["rounds"].push_back(to_json(round));
    j["p_total"] = report.p_total;
    j["analytic_p"] = report.analytic_p;
    j["discrepancy_max"] = report.discrepancy_max;
    if (report.failure_breakdown)
        j["failure_breakdown"] = {{"no_click", report.failure_breakdown->no_click},
                                  {"two_photon", report.failure_breakdown->two_photon}};
    return j;
}

inline nlohmann::json to_json(const oracle::CertificationRecord& record) {
    return nlohmann::json{
        {"alpha_sq", record.alpha_sq},
        {"rounds", record.rounds},
        {"pass", record.pass},
        {"max_deviation", record.max_deviation},
        {"first_divergent", record.first_divergent},
        {"comparisons", record.comparisons},
        {"formula_unsquared_max_dev", record.formula_unsquared_max_dev},
        {"formula_squared_max_dev", record.formula_squared_max_dev}};
}

// Single-round summary row for the linear-optics run.
inline std::string report_csv_ecp1(const ConcentrationReport& report) {
    const RoundOutcome& round = report.rounds.front();
    std::string out = std::string(kCsvBanner) + "\n";
    out += "alpha_sq,alpha,t,success_probability,output_fidelity,"
           "failure_no_click,failure_two_photon\n";
    out += format_double(report.params.alpha_sq) + ',' +
           format_double(std::sqrt(report.params.alpha_sq)) + ',' +
           format_double(round.t_used) + ',' +
           format_double(round.success_prob_unconditional) + ',' +
           format_double(round.output_fidelity) + ',' +
           format_double(report.failure_breakdown->no_click) + ',' +
           format_double(report.failure_breakdown->two_photon) + '\n';
    return out;
}

// Per-round table; the analytic column is empty under a schedule override.
inline std::string report_csv_ecp2(const ConcentrationReport& report) {
    std::string out = std::string(kCsvBanner) + "\n";
    out += "round,t_used,p_success_simulated,p_success_analytic,p_cumulative\n";
    double cumulative = 0.0;
    for (std::size_t i = 0; i < report.rounds.size(); ++i) {
        const RoundOutcome& round = report.rounds[i];
        cumulative += round.success_prob_unconditional;
        out += std::to_string(round.round_index) + ',' + format_double(round.t_used) +
               ',' + format_double(round.success_prob_unconditional) + ',';
        if (i < report.analytic_p.size()) out += format_double(report.analytic_p[i]);
        out += ',' + format_double(cumulative) + '\n';
    }
    return out;
}

inline std::string report_csv(const ConcentrationReport& report) {
    return report.protocol == "ecp1" ? report_csv_ecp1(report) : report_csv_ecp2(report);
}

inline std::string sweep_csv(const std::vector<ConcentrationReport>& reports, int rounds) {
    std::string out = std::string(kCsvBanner) + "\n";
    out += "alpha_sq,alpha,rounds,p_total";
    for (int k = 1; k <= rounds; ++k) out += ",p_" + std::to_string(k);
    out += '\n';
    for (const auto& report : reports) {
        out += format_double(report.params.alpha_sq) + ',' +
               format_double(std::sqrt(report.params.alpha_sq)) + ',' +
               std::to_string(rounds) + ',' + format_double(report.p_total);
        for (const auto& round : report.rounds)
            out += ',' + format_double(round.success_prob_unconditional);
        out += '\n';
    }
    return out;
}

inline nlohmann::json sweep_json(const std::vector<ConcentrationReport>& reports, int rounds) {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["command"] = "sweep";
    j["rounds"] = rounds;
    j["points"] = nlohmann::json::array();
    for (const auto& report : reports) {
        nlohmann::json point;
        point["alpha_sq"] = report.params.alpha_sq;
        point["alpha"] = std::sqrt(report.params.alpha_sq);
        point["p_total"] = report.p_total;
        nlohmann::json per_round = nlohmann::json::array();
        for (const auto& round : report.rounds)
            per_round.push_back(round.success_prob_unconditional);
        point["p_rounds"] = std::move(per_round);
        j["points"].push_back(std::move(point));
    }
    return j;
}

}  // namespace ecpsim::io
