#include "bpmf/io.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "bpmf/error.hpp"

namespace bpmf {

namespace {

// JSON has no infinities; they round-trip through null.
Json real(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }
double real_from(const Json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

}  // namespace

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw Error(ErrorCode::InvalidArgument, "ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

Json vector_to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const Json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j.at(i).get<double>();
  return v;
}

Json to_json(const ModelParams& p) {
  return {{"kind", "general"},
          {"n_boxes", p.n_boxes},
          {"scale", p.scale},
          {"birth", vector_to_json(p.birth)},
          {"death", vector_to_json(p.death)},
          {"migration", matrix_to_json(p.migration)},
          {"competition", matrix_to_json(p.competition)}};
}

Json to_json(const SymmetricParams& s) {
  return {{"kind", "symmetric"}, {"beta", s.beta},       {"mu", s.mu},      {"inner", s.inner},
          {"outer", s.outer},    {"mig", s.mig},         {"n_boxes", s.n_boxes}, {"scale", s.scale}};
}

Stability stability_from_string(const std::string& s) {
  for (auto v : {Stability::Stable, Stability::Unstable, Stability::Saddle, Stability::Marginal}) {
    if (to_string(v) == s) return v;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown classification '" + s + "'");
}

Provenance provenance_from_string(const std::string& s) {
  for (auto v : {Provenance::ClosedFormTrivial, Provenance::ClosedFormSymmetric, Provenance::ClosedFormN2Third,
                 Provenance::ClosedFormN2Fourth, Provenance::Numerical}) {
    if (to_string(v) == s) return v;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown provenance '" + s + "'");
}

Json to_json(const EquilibriumReport& r) {
  Json eig = Json::array();
  for (const auto& lambda : r.eigenvalues) eig.push_back({lambda.real(), lambda.imag()});
  return {{"point", vector_to_json(r.point)},
          {"residual", r.residual},
          {"eigenvalues", eig},
          {"classification", to_string(r.classification)},
          {"provenance", to_string(r.provenance)}};
}

EquilibriumReport equilibrium_from_json(const Json& j) {
  EquilibriumReport r;
  r.point = vector_from_json(j.at("point"));
  r.residual = j.at("residual").get<double>();
  const auto& eig = j.at("eigenvalues");
  r.eigenvalues.resize(static_cast<Eigen::Index>(eig.size()));
  for (std::size_t k = 0; k < eig.size(); ++k) {
    r.eigenvalues[static_cast<Eigen::Index>(k)] = {eig[k].at(0).get<double>(), eig[k].at(1).get<double>()};
  }
  r.classification = stability_from_string(j.at("classification").get<std::string>());
  r.provenance = provenance_from_string(j.at("provenance").get<std::string>());
  return r;
}

Json to_json(const OUParams& ou) {
  return {{"drift", matrix_to_json(ou.drift)},
          {"diffusion", matrix_to_json(ou.diffusion)},
          {"stationary_cov", matrix_to_json(ou.stationary_cov)}};
}

OUParams ou_params_from_json(const Json& j) {
  return {matrix_from_json(j.at("drift")), matrix_from_json(j.at("diffusion")),
          matrix_from_json(j.at("stationary_cov"))};
}

Json to_json(const CltReport& r) {
  return {{"theory", to_json(r.theory)},
          {"burn_in", r.burn_in},
          {"lag", r.lag},
          {"samples", r.samples},
          {"effective_sample_size", r.effective_sample_size},
          {"mean", vector_to_json(r.mean)},
          {"mean_stderr", vector_to_json(r.mean_stderr)},
          {"mean_centered", r.mean_centered},
          {"empirical_cov", matrix_to_json(r.empirical_cov)},
          {"relative_error", r.relative_error},
          {"empirical_lag_cov", matrix_to_json(r.empirical_lag_cov)},
          {"predicted_lag_cov", matrix_to_json(r.predicted_lag_cov)},
          {"lag_relative_error", r.lag_relative_error},
          {"tolerance", r.tolerance},
          {"passed", r.passed}};
}

CltReport clt_report_from_json(const Json& j) {
  CltReport r;
  r.theory = ou_params_from_json(j.at("theory"));
  r.burn_in = j.at("burn_in").get<double>();
  r.lag = j.at("lag").get<double>();
  r.samples = j.at("samples").get<std::size_t>();
  r.effective_sample_size = j.at("effective_sample_size").get<double>();
  r.mean = vector_from_json(j.at("mean"));
  r.mean_stderr = vector_from_json(j.at("mean_stderr"));
  r.mean_centered = j.at("mean_centered").get<bool>();
  r.empirical_cov = matrix_from_json(j.at("empirical_cov"));
  r.relative_error = j.at("relative_error").get<double>();
  r.empirical_lag_cov = matrix_from_json(j.at("empirical_lag_cov"));
  r.predicted_lag_cov = matrix_from_json(j.at("predicted_lag_cov"));
  r.lag_relative_error = j.at("lag_relative_error").get<double>();
  r.tolerance = j.at("tolerance").get<double>();
  r.passed = j.at("passed").get<bool>();
  return r;
}

Json to_json(const LlnReport& r) {
  Json levels = Json::array();
  for (const auto& level : r.levels) levels.push_back({{"L", level.scale}, {"sup_error", level.sup_error}});
  return {{"levels", levels}, {"fitted_slope", r.fitted_slope}};
}

Json to_json(const LyapunovCertificate& c) {
  return {{"alpha", c.alpha},
          {"lambda", c.lambda},
          {"M", c.radius},
          {"b", real(c.b)},
          {"log_b", c.log_b},
          {"C1", c.rate_constants.c1},
          {"C2", c.rate_constants.c2},
          {"C3", c.rate_constants.c3},
          {"ball_states", c.ball_states},
          {"shell_states", c.shell_states},
          {"max_shell_ratio", c.max_shell_ratio}};
}

LyapunovCertificate certificate_from_json(const Json& j) {
  LyapunovCertificate c;
  c.alpha = j.at("alpha").get<double>();
  c.lambda = j.at("lambda").get<double>();
  c.radius = j.at("M").get<double>();
  c.b = real_from(j.at("b"));
  c.log_b = j.at("log_b").get<double>();
  c.rate_constants = {j.at("C1").get<double>(), j.at("C2").get<double>(), j.at("C3").get<double>()};
  c.ball_states = j.at("ball_states").get<std::uint64_t>();
  c.shell_states = j.at("shell_states").get<std::uint64_t>();
  c.max_shell_ratio = j.at("max_shell_ratio").get<double>();
  return c;
}

Json to_json(const Refutation& r) {
  Json states = Json::array();
  for (const auto& v : r.violations) states.push_back({{"state", v.state}, {"ratio", real(v.ratio)}});
  return {{"alpha", r.alpha}, {"lambda", r.lambda}, {"M", r.radius}, {"reason", r.reason}, {"violations", states}};
}

Json to_json(const TvDecayReport& r) {
  return {{"tv", r.tv},
          {"leakage", r.leakage},
          {"fit_first", r.fit_first},
          {"fit_last", r.fit_last},
          {"rate", r.rate},
          {"log_prefactor", r.log_prefactor},
          {"r_squared", r.r_squared}};
}

Json to_json(const DriftZero& z) {
  return {{"exact", z.exact},
          {"floor", z.floor_count},
          {"ceil", z.ceil_count},
          {"floor_residual", z.floor_residual},
          {"ceil_residual", z.ceil_residual}};
}

Json to_json(const ValidationIssue& issue) {
  Json j = {{"kind", to_string(issue.kind)}, {"field", issue.field}};
  if (issue.index >= 0) j["index"] = issue.index;
  return j;
}

void write_phase_plane(std::ostream& out, const ModelParams& params, double lo, double hi, int points) {
  if (params.n_boxes != 2) throw Error(ErrorCode::InvalidArgument, "phase plane needs n_boxes = 2");
  if (points < 2) throw Error(ErrorCode::InvalidArgument, "phase plane needs at least 2 points per axis");
  out << "z1 z2 F1 F2\n" << std::setprecision(17);
  const double h = (hi - lo) / (points - 1);
  for (int a = 0; a < points; ++a) {
    for (int b = 0; b < points; ++b) {
      Eigen::VectorXd z(2);
      z << lo + a * h, lo + b * h;
      const Eigen::VectorXd f = rhs(params, z);
      out << z[0] << ' ' << z[1] << ' ' << f[0] << ' ' << f[1] << '\n';
    }
  }
}

void write_tv_table(std::ostream& out, const TvDecayReport& report) {
  out << "k tv\n" << std::setprecision(17);
  for (std::size_t k = 0; k < report.tv.size(); ++k) out << k + 1 << ' ' << report.tv[k] << '\n';
}

void write_lln_table(std::ostream& out, const LlnReport& report) {
  out << "L sup_error\n" << std::setprecision(17);
  for (const auto& level : report.levels) out << level.scale << ' ' << level.sup_error << '\n';
}

void write_ode_table(std::ostream& out, const OdePath& path) {
  out << "t";
  const auto n = path.states.empty() ? 0 : path.states.front().size();
  for (Eigen::Index i = 1; i <= n; ++i) out << " z_" << i;
  out << '\n' << std::setprecision(17);
  for (std::size_t k = 0; k < path.times.size(); ++k) {
    out << path.times[k];
    for (Eigen::Index i = 0; i < n; ++i) out << ' ' << path.states[k][i];
    out << '\n';
  }
}

}  // namespace bpmf
