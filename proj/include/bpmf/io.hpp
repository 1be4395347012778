#ifndef BPMF_IO_HPP
#define BPMF_IO_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "bpmf/ergodicity.hpp"
#include "bpmf/fluctuations.hpp"
#include "bpmf/meanfield.hpp"
#include "bpmf/model.hpp"

namespace bpmf {

using Json = nlohmann::ordered_json;

Json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const Json& j);
Json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const Json& j);

Json to_json(const ModelParams& p);
Json to_json(const SymmetricParams& s);
Json to_json(const EquilibriumReport& r);
EquilibriumReport equilibrium_from_json(const Json& j);
Json to_json(const OUParams& ou);
OUParams ou_params_from_json(const Json& j);
Json to_json(const CltReport& r);
CltReport clt_report_from_json(const Json& j);
Json to_json(const LlnReport& r);
Json to_json(const LyapunovCertificate& c);
LyapunovCertificate certificate_from_json(const Json& j);
Json to_json(const Refutation& r);
Json to_json(const TvDecayReport& r);
Json to_json(const DriftZero& z);
Json to_json(const ValidationIssue& issue);

Stability stability_from_string(const std::string& s);
Provenance provenance_from_string(const std::string& s);

// Plain-text columnar tables for external plotting: one header row of
// column names, then whitespace-separated rows.

/// z1 z2 F1 F2 over a points x points grid on [lo, hi]^2 (N = 2 only).
void write_phase_plane(std::ostream& out, const ModelParams& params, double lo, double hi, int points);
/// k tv
void write_tv_table(std::ostream& out, const TvDecayReport& report);
/// L sup_error
void write_lln_table(std::ostream& out, const LlnReport& report);
/// t z_1 ... z_N
void write_ode_table(std::ostream& out, const OdePath& path);

}  // namespace bpmf

#endif  // BPMF_IO_HPP
