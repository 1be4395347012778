#include "bpmf/cli.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "bpmf/ctmc.hpp"
#include "bpmf/ergodicity.hpp"
#include "bpmf/fluctuations.hpp"
#include "bpmf/meanfield.hpp"
#include "bpmf/oracle.hpp"

namespace bpmf::cli {

namespace fs = std::filesystem;

namespace {

std::string join(const std::vector<ConfigIssue>& issues) {
  std::string out = "invalid configuration:";
  for (const auto& i : issues) out += " " + i.path + ": " + i.message + ";";
  return out;
}

const std::map<std::string, std::set<std::string>>& allowed_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"", {"schema_version", "description", "model", "simulate", "ode", "equilibria", "clt", "lln", "ergodicity",
            "oracle", "plotdata"}},
      {"model.symmetric", {"kind", "beta", "mu", "inner", "outer", "mig", "n_boxes", "scale"}},
      {"model.general", {"kind", "n_boxes", "scale", "birth", "death", "migration", "competition"}},
      {"simulate", {"initial", "horizon", "sample_every", "replicas", "seed", "event_cap", "record_events", "workers"}},
      {"ode", {"z0", "horizon", "tolerance", "output_every"}},
      {"equilibria", {"mode", "grid_density", "tolerance"}},
      {"clt", {"L", "burn_in", "horizon", "tolerance", "seed", "sample_every", "lag", "drift"}},
      {"lln", {"L_list", "horizon", "replicas", "seed", "z0", "sample_every", "workers"}},
      {"ergodicity",
       {"alpha_grid", "lambda_grid", "cap", "steps", "state_budget", "leakage_tolerance", "x0", "budget"}},
      {"oracle", {"cap", "budget"}},
      {"plotdata", {"lo", "hi", "points"}},
  };
  return keys;
}

void check_keys(const Json& object, const std::string& schema, const std::string& path,
                std::vector<ConfigIssue>& issues) {
  if (!object.is_object()) {
    issues.push_back({path.empty() ? "<root>" : path, "TypeMismatch", "expected an object"});
    return;
  }
  const auto& allowed = allowed_keys().at(schema);
  for (const auto& [key, value] : object.items()) {
    if (!allowed.count(key)) {
      issues.push_back({path.empty() ? key : path + "." + key, "UnknownField", "field is not part of schema v1"});
    }
  }
}

// Typed access to one config block, accumulating issues instead of throwing.
class Reader {
 public:
  Reader(const Json* block, std::string path, std::vector<ConfigIssue>& issues)
      : block_(block), path_(std::move(path)), issues_(issues) {}

  std::string where(const std::string& key) const { return path_ + "." + key; }

  const Json* find(const std::string& key) const {
    if (!block_ || !block_->contains(key)) return nullptr;
    const Json& v = block_->at(key);
    return v.is_null() ? nullptr : &v;
  }

  std::optional<double> number(const std::string& key, bool required = false) {
    const Json* v = find(key);
    if (!v) return missing<double>(key, required);
    if (!v->is_number()) return mismatch<double>(key, "a number");
    return v->get<double>();
  }

  std::optional<std::int64_t> integer(const std::string& key, bool required = false) {
    const Json* v = find(key);
    if (!v) return missing<std::int64_t>(key, required);
    if (!v->is_number_integer()) return mismatch<std::int64_t>(key, "an integer");
    return v->get<std::int64_t>();
  }

  std::optional<std::uint64_t> seed(const std::string& key) {
    const Json* v = find(key);
    if (!v) return missing<std::uint64_t>(key, true);
    if (!v->is_number_unsigned()) return mismatch<std::uint64_t>(key, "a non-negative integer seed");
    return v->get<std::uint64_t>();
  }

  std::optional<bool> boolean(const std::string& key) {
    const Json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) return mismatch<bool>(key, "a boolean");
    return v->get<bool>();
  }

  std::optional<std::string> text(const std::string& key, bool required = false) {
    const Json* v = find(key);
    if (!v) return missing<std::string>(key, required);
    if (!v->is_string()) return mismatch<std::string>(key, "a string");
    return v->get<std::string>();
  }

  std::optional<std::vector<double>> numbers(const std::string& key, bool required = false) {
    const Json* v = find(key);
    if (!v) return missing<std::vector<double>>(key, required);
    if (!v->is_array()) return mismatch<std::vector<double>>(key, "an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!v->at(i).is_number()) {
        issues_.push_back({where(key) + "[" + std::to_string(i) + "]", "TypeMismatch", "expected a number"});
        return std::nullopt;
      }
      out.push_back(v->at(i).get<double>());
    }
    return out;
  }

  std::optional<std::vector<std::int64_t>> integers(const std::string& key, bool required = false) {
    const Json* v = find(key);
    if (!v) return missing<std::vector<std::int64_t>>(key, required);
    if (!v->is_array()) return mismatch<std::vector<std::int64_t>>(key, "an array of integers");
    std::vector<std::int64_t> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!v->at(i).is_number_integer()) {
        issues_.push_back({where(key) + "[" + std::to_string(i) + "]", "TypeMismatch", "expected an integer"});
        return std::nullopt;
      }
      out.push_back(v->at(i).get<std::int64_t>());
    }
    return out;
  }

  std::optional<Eigen::MatrixXd> matrix(const std::string& key) {
    const Json* v = find(key);
    if (!v) return missing<Eigen::MatrixXd>(key, true);
    if (!v->is_array()) return mismatch<Eigen::MatrixXd>(key, "an array of rows");
    const std::size_t rows = v->size();
    const std::size_t cols = rows ? v->at(0).size() : 0;
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
      const Json& row = v->at(r);
      if (!row.is_array() || row.size() != cols) return mismatch<Eigen::MatrixXd>(key, "a rectangular matrix");
      for (std::size_t c = 0; c < cols; ++c) {
        if (!row.at(c).is_number()) return mismatch<Eigen::MatrixXd>(key, "numeric matrix entries");
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row.at(c).get<double>();
      }
    }
    return m;
  }

  void require(bool ok, const std::string& key, const std::string& message) {
    if (!ok) issues_.push_back({where(key), "InvalidValue", message});
  }

 private:
  template <typename T>
  std::optional<T> missing(const std::string& key, bool required) {
    if (required) issues_.push_back({where(key), "MissingField", "required field is missing"});
    return std::nullopt;
  }
  template <typename T>
  std::optional<T> mismatch(const std::string& key, const std::string& expected) {
    issues_.push_back({where(key), "TypeMismatch", "expected " + expected});
    return std::nullopt;
  }

  const Json* block_;
  std::string path_;
  std::vector<ConfigIssue>& issues_;
};

void throw_if(std::vector<ConfigIssue>& issues) {
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

const Json* block_of(const Json& document, const std::string& name) {
  return document.contains(name) && !document.at(name).is_null() ? &document.at(name) : nullptr;
}

// Maps a model ValidationIssue onto the config path that produced it.
ConfigIssue to_config_issue(const ValidationIssue& issue, const ModelSpec& spec) {
  std::string path = "model." + issue.field;
  if (issue.index >= 0 && std::holds_alternative<ModelParams>(spec)) {
    const auto& p = std::get<ModelParams>(spec);
    if (issue.field == "migration" || issue.field == "competition") {
      if (issue.kind == IssueKind::NonzeroMigrationDiagonal) {
        path += "[" + std::to_string(issue.index) + "][" + std::to_string(issue.index) + "]";
      } else {
        path += "[" + std::to_string(issue.index / p.n_boxes) + "][" + std::to_string(issue.index % p.n_boxes) + "]";
      }
    } else {
      path += "[" + std::to_string(issue.index) + "]";
    }
  }
  return {path, std::string(to_string(issue.kind)), issue.describe()};
}

}  // namespace

ConfigError::ConfigError(std::vector<ConfigIssue> issues) : std::runtime_error(join(issues)), issues_(std::move(issues)) {}

void apply_override(Json& document, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError({{std::string(assignment), "InvalidOverride", "expected KEY=VALUE"}});
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  Json value = Json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  Json* node = &document;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError({{key, "InvalidOverride", "empty path segment"}});
    if (!node->is_object()) throw ConfigError({{key, "InvalidOverride", "path crosses a non-object value"}});
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = Json::object();
    start = dot + 1;
  }
}

Json load_document(const fs::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError({{path.string(), "Unreadable", "cannot open configuration file"}});
  Json document = Json::parse(in, nullptr, false);
  if (document.is_discarded()) throw ConfigError({{path.string(), "ParseError", "not valid JSON"}});
  for (const auto& o : overrides) apply_override(document, o);
  return document;
}

ModelSpec parse_model(const Json& document) {
  std::vector<ConfigIssue> issues;
  check_keys(document, "", "", issues);
  if (!document.is_object()) throw_if(issues);

  Reader root(&document, "", issues);
  const auto version = root.integer("schema_version", true);
  if (version && *version != kSchemaVersion) {
    issues.push_back({"schema_version", "UnsupportedVersion", "only schema_version 1 is supported"});
  }
  for (const auto& block : kCommands) {
    if (const Json* b = block_of(document, block)) check_keys(*b, block, block, issues);
  }

  const Json* model = block_of(document, "model");
  if (!model || !model->is_object()) {
    issues.push_back({"model", "MissingField", "model block is required"});
    throw_if(issues);
  }
  Reader r(model, "model", issues);
  const auto kind = r.text("kind", true);
  ModelSpec spec;
  if (kind == "symmetric") {
    check_keys(*model, "model.symmetric", "model", issues);
    SymmetricParams s;
    s.beta = r.number("beta", true).value_or(0.0);
    s.mu = r.number("mu", true).value_or(0.0);
    s.inner = r.number("inner", true).value_or(0.0);
    s.outer = r.number("outer").value_or(0.0);
    s.mig = r.number("mig").value_or(0.0);
    s.n_boxes = static_cast<int>(r.integer("n_boxes", true).value_or(1));
    s.scale = static_cast<int>(r.integer("scale", true).value_or(1));
    spec = s;
  } else if (kind == "general") {
    check_keys(*model, "model.general", "model", issues);
    ModelParams p;
    p.n_boxes = static_cast<int>(r.integer("n_boxes", true).value_or(1));
    p.scale = static_cast<int>(r.integer("scale", true).value_or(1));
    if (auto v = r.numbers("birth", true)) p.birth = Eigen::Map<const Eigen::VectorXd>(v->data(), static_cast<Eigen::Index>(v->size()));
    if (auto v = r.numbers("death", true)) p.death = Eigen::Map<const Eigen::VectorXd>(v->data(), static_cast<Eigen::Index>(v->size()));
    if (auto m = r.matrix("migration")) p.migration = *m;
    if (auto m = r.matrix("competition")) p.competition = *m;
    spec = p;
  } else if (kind) {
    issues.push_back({"model.kind", "InvalidValue", "kind must be 'symmetric' or 'general'"});
  }
  throw_if(issues);
  return spec;
}

ValidatedModel validate_spec(const ModelSpec& spec) {
  std::vector<ValidationIssue> issues;
  ModelParams params;
  if (const auto* sym = std::get_if<SymmetricParams>(&spec)) {
    issues = check(*sym);
    if (issues.empty()) params = expand(*sym);
  } else {
    params = std::get<ModelParams>(spec);
  }
  if (issues.empty()) {
    auto result = validate(params);
    if (auto* model = std::get_if<ValidatedModel>(&result)) return *model;
    issues = std::get<std::vector<ValidationIssue>>(result);
  }
  std::vector<ConfigIssue> out;
  for (const auto& issue : issues) out.push_back(to_config_issue(issue, spec));
  throw ConfigError(std::move(out));
}

namespace {

void write_json(const fs::path& file, const Json& j) {
  std::ofstream out(file);
  out << j.dump(2) << '\n';
}

void write_text(const fs::path& file, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(file);
  body(out);
}

Counts to_counts(const std::vector<std::int64_t>& v) { return Counts(v.begin(), v.end()); }

const SymmetricParams* symmetric_of(const ModelSpec& spec) { return std::get_if<SymmetricParams>(&spec); }

// First stable equilibrium from the closed forms (symmetric) or the
// numeric search (general).
std::optional<EquilibriumReport> stable_equilibrium(const ModelSpec& spec, const ValidatedModel& model) {
  std::vector<EquilibriumReport> reports;
  if (const auto* sym = symmetric_of(spec)) {
    reports = equilibria_symmetric(*sym);
  } else {
    reports = equilibria_numeric(model);
  }
  for (auto& r : reports) {
    if (r.classification == Stability::Stable) return r;
  }
  return std::nullopt;
}

int cmd_simulate(const Json& doc, const ValidatedModel& model, const fs::path& out) {
  std::vector<ConfigIssue> issues;
  Reader r(block_of(doc, "simulate"), "simulate", issues);
  SimulationOptions opts;
  const auto initial = r.integers("initial", true);
  opts.horizon = r.number("horizon", true).value_or(1.0);
  opts.sample_every = r.number("sample_every").value_or(opts.horizon / 100.0);
  opts.seed = r.seed("seed").value_or(0);
  opts.event_cap = static_cast<std::uint64_t>(r.integer("event_cap").value_or(1'000'000'000));
  opts.record_events = r.boolean("record_events").value_or(true);
  const int replicas = static_cast<int>(r.integer("replicas").value_or(1));
  const int workers = static_cast<int>(r.integer("workers").value_or(0));
  r.require(opts.horizon > 0.0, "horizon", "InvalidHorizon: horizon must be positive");
  r.require(opts.sample_every > 0.0, "sample_every", "must be positive");
  r.require(replicas >= 1, "replicas", "must be >= 1");
  if (initial) {
    r.require(static_cast<int>(initial->size()) == model.n_boxes(), "initial", "needs one count per box");
    for (auto c : *initial) r.require(c >= 0, "initial", "counts must be non-negative");
  }
  throw_if(issues);

  const PopulationState start{to_counts(*initial), 0.0};
  std::vector<Trajectory> runs;
  if (replicas == 1) {
    runs.push_back(simulate(model, start, opts));
  } else {
    runs = ensemble(model, start, opts, replicas, workers);
  }

  Json summary = Json::array();
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const std::string suffix = runs.size() == 1 ? "" : "_" + std::to_string(k + 1);
    write_text(out / ("trajectory" + suffix + ".csv"), [&](std::ostream& o) { write_samples_csv(o, runs[k]); });
    if (opts.record_events) {
      write_text(out / ("events" + suffix + ".csv"), [&](std::ostream& o) { write_events_csv(o, runs[k]); });
    }
    summary.push_back({{"replica", k + 1},
                       {"seed", replicas == 1 ? opts.seed : derive_seed(opts.seed, k)},
                       {"events", runs[k].event_count},
                       {"terminated_by", to_string(runs[k].terminated_by)},
                       {"final_time", runs[k].final_state.time},
                       {"final_counts", runs[k].final_state.counts}});
  }
  write_json(out / "simulate.json", {{"command", "simulate"}, {"runs", summary}});
  return kOk;
}

int cmd_ode(const Json& doc, const ValidatedModel& model, const fs::path& out) {
  std::vector<ConfigIssue> issues;
  Reader r(block_of(doc, "ode"), "ode", issues);
  const auto z0 = r.numbers("z0", true);
  const double horizon = r.number("horizon", true).value_or(1.0);
  const double tolerance = r.number("tolerance").value_or(1e-8);
  const double output_every = r.number("output_every").value_or(horizon / 100.0);
  r.require(horizon > 0.0, "horizon", "InvalidHorizon: horizon must be positive");
  r.require(tolerance > 0.0, "tolerance", "must be positive");
  r.require(output_every > 0.0, "output_every", "must be positive");
  if (z0) {
    r.require(static_cast<int>(z0->size()) == model.n_boxes(), "z0", "needs one density per box");
    for (double v : *z0) r.require(v >= 0.0, "z0", "densities must be non-negative");
  }
  throw_if(issues);

  const Eigen::VectorXd start = Eigen::Map<const Eigen::VectorXd>(z0->data(), static_cast<Eigen::Index>(z0->size()));
  const OdePath path = integrate(model.params(), start, horizon, tolerance, output_every);
  write_text(out / "ode.dat", [&](std::ostream& o) { write_ode_table(o, path); });
  write_json(out / "ode.json", {{"command", "ode"},
                                {"horizon", horizon},
                                {"tolerance", tolerance},
                                {"points", path.times.size()},
                                {"final", vector_to_json(path.states.back())},
                                {"final_residual", rhs(model.params(), path.states.back()).lpNorm<Eigen::Infinity>()}});
  return kOk;
}

int cmd_equilibria(const Json& doc, const ModelSpec& spec, const ValidatedModel& model, const fs::path& out) {
  std::vector<ConfigIssue> issues;
  Reader r(block_of(doc, "equilibria"), "equilibria", issues);
  const std::string mode = r.text("mode").value_or("both");
  NumericEquilibriumOptions opts;
  opts.grid_density = static_cast<int>(r.integer("grid_density").value_or(8));
  opts.tolerance = r.number("tolerance").value_or(1e-10);
  r.require(mode == "closed" || mode == "numeric" || mode == "both", "mode", "must be closed, numeric or both");
  r.require(opts.grid_density >= 1, "grid_density", "must be >= 1");
  r.require(opts.tolerance > 0.0, "tolerance", "must be positive");
  if (mode != "numeric" && !symmetric_of(spec)) {
    issues.push_back({"equilibria.mode", "InvalidValue", "closed forms need a symmetric model"});
  }
  throw_if(issues);

  Json report = {{"command", "equilibria"}, {"mode", mode}};
  std::vector<EquilibriumReport> closed, numeric;
  if (mode != "numeric") closed = equilibria_symmetric(*symmetric_of(spec));
  if (mode != "closed") numeric = equilibria_numeric(model, opts);

  Json points = Json::array();
  for (const auto& e : (mode == "numeric" ? numeric : closed)) points.push_back(to_json(e));
  report["equilibria"] = points;
  if (mode == "both") {
    Json numeric_points = Json::array();
    for (const auto& e : numeric) numeric_points.push_back(to_json(e));
    report["numeric"] = numeric_points;
    // Largest distance from a closed-form point to its nearest numeric root.
    double agreement = 0.0;
    bool matched = closed.size() == numeric.size();
    for (const auto& c : closed) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& n : numeric) best = std::min(best, (c.point - n.point).lpNorm<Eigen::Infinity>());
      agreement = std::max(agreement, best);
    }
    report["agreement"] = agreement;
    report["counts_match"] = matched;
  }
  write_json(out / "equilibria.json", report);
  return kOk;
}

int cmd_lln(const Json& doc, const ModelSpec& spec, const ValidatedModel& model, const fs::path& out) {
  std::vector<ConfigIssue> issues;
  Reader r(block_of(doc, "lln"), "lln", issues);
  LlnOptions opts;
  const auto scales = r.integers("L_list", true);
  opts.horizon = r.number("horizon", true).value_or(1.0);
  opts.replicas = static_cast<int>(r.integer("replicas").value_or(100));
  opts.seed = r.seed("seed").value_or(0);
  opts.sample_every = r.number("sample_every").value_or(0.1);
  opts.workers = static_cast<int>(r.integer("workers").value_or(0));
  const auto z0 = r.numbers("z0");
  r.require(opts.horizon > 0.0, "horizon", "InvalidHorizon: horizon must be positive");
  r.require(opts.replicas >= 1, "replicas", "must be >= 1");
  if (scales) {
    for (std::size_t k = 0; k < scales->size(); ++k) {
      r.require((*scales)[k] >= 1, "L_list", "entries must be >= 1");
      if (k > 0) r.require((*scales)[k] > (*scales)[k - 1], "L_list", "must be increasing");
    }
    r.require(!scales->empty(), "L_list", "must not be empty");
  }
  if (z0) r.require(static_cast<int>(z0->size()) == model.n_boxes(), "z0", "needs one density per box");
  throw_if(issues);

  for (auto s : *scales) opts.scales.push_back(static_cast<int>(s));
  if (z0) {
    opts.z0 = Eigen::Map<const Eigen::VectorXd>(z0->data(), static_cast<Eigen::Index>(z0->size()));
  } else {
    const auto eq = stable_equilibrium(spec, model);
    if (!eq) throw Error(ErrorCode::NotStable, "no stable equilibrium to start from; give lln.z0");
    opts.z0 = eq->point;
  }
  const LlnReport report = lln_check(model, opts);
  Json j = to_json(report);
  j["command"] = "lln";
  j["z0"] = vector_to_json(opts.z0);
  write_json(out / "lln.json", j);
  write_text(out / "lln.dat", [&](std::ostream& o) { write_lln_table(o, report); });
  return kOk;
}

int cmd_clt(const Json& doc, const ModelSpec& spec, const ValidatedModel& model, const fs::path& out) {
  std::vector<ConfigIssue> issues;
  Reader r(block_of(doc, "clt"), "clt", issues);
  CltOptions opts;
  opts.scale = static_cast<int>(r.integer("L", true).value_or(1));
  opts.burn_in = r.number("burn_in").value_or(-1.0);
  opts.horizon = r.number("horizon", true).value_or(1.0);
  opts.tolerance = r.number("tolerance").value_or(0.10);
  opts.seed = r.seed("seed").value_or(0);
  opts.sample_every = r.number("sample_every").value_or(0.05);
  opts.lag = r.number("lag").value_or(-1.0);
  const std::string drift = r.text("drift").value_or("full");
  r.require(opts.scale >= 1, "L", "must be >= 1");
  r.require(opts.horizon > 0.0, "horizon", "InvalidHorizon: horizon must be positive");
  r.require(opts.sample_every > 0.0, "sample_every", "must be positive");
  r.require(opts.tolerance > 0.0, "tolerance", "must be positive");
  r.require(drift == "full" || drift == "diagonal", "drift", "must be full or diagonal");
  throw_if(issues);
  opts.variant = drift == "full" ? DriftVariant::FullJacobian : DriftVariant::DiagonalOnly;

  const auto eq = stable_equilibrium(spec, model);
  if (!eq) throw Error(ErrorCode::NotStable, "model has no stable equilibrium");
  Json j = {{"command", "clt"}, {"equilibrium", to_json(*eq)}};
  try {
    const CltReport report = clt_check(model, *eq, opts);
    j["report"] = to_json(report);
    // The other drift reading, scored against the same empirical covariance.
    const auto other = opts.variant == DriftVariant::FullJacobian ? DriftVariant::DiagonalOnly : DriftVariant::FullJacobian;
    try {
      const OUParams alt = ou_params(model.params(), *eq, other);
      j["alternative_drift"] = {{"variant", other == DriftVariant::FullJacobian ? "full" : "diagonal"},
                                {"stationary_cov", matrix_to_json(alt.stationary_cov)},
                                {"relative_error", relative_frobenius(report.empirical_cov, alt.stationary_cov)}};
    } catch (const Error&) {
      j["alternative_drift"] = nullptr;
    }
    write_json(out / "clt.json", j);
    return report.passed ? kOk : kRefuted;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Extinction) throw;
    j["error"] = {{"kind", "Extinction"}, {"message", e.what()}};
    write_json(out / "clt.json", j);
    return kRefuted;
  }
}

int cmd_ergodicity(const Json& doc, const ModelSpec& spec, const ValidatedModel& model, const fs::path& out) {
  std::vector<ConfigIssue> issues;
  Reader r(block_of(doc, "ergodicity"), "ergodicity", issues);
  const auto alphas = r.numbers("alpha_grid").value_or(kDefaultAlphaGrid);
  const auto lambdas = r.numbers("lambda_grid").value_or(kDefaultLambdaGrid);
  const int cap = static_cast<int>(r.integer("cap").value_or(12));
  const int steps = static_cast<int>(r.integer("steps").value_or(200));
  CertifyOptions copts;
  copts.state_budget = static_cast<std::uint64_t>(r.integer("state_budget").value_or(20'000'000));
  TvDecayOptions topts;
  topts.leakage_tolerance = r.number("leakage_tolerance").value_or(1e-8);
  const auto budget = static_cast<std::size_t>(r.integer("budget").value_or(kDefaultOracleBudget));
  const auto x0 = r.integers("x0");
  r.require(cap >= 1, "cap", "must be >= 1");
  r.require(steps >= 1, "steps", "must be >= 1");
  if (x0) r.require(static_cast<int>(x0->size()) == model.n_boxes(), "x0", "needs one count per box");
  if (model.params().has_cross_competition()) {
    issues.push_back({"model.competition", "CrossCompetitionUnsupported",
                      "ergodicity analysis needs zero competition between distinct boxes"});
  }
  throw_if(issues);

  const CertificateSearch search = certify_search(model, alphas, lambdas, copts);
  Json attempts = Json::array();
  for (const auto& a : search.attempts) {
    if (const auto* c = std::get_if<LyapunovCertificate>(&a)) {
      attempts.push_back({{"certificate", to_json(*c)}});
    } else {
      attempts.push_back({{"refutation", to_json(std::get<Refutation>(a))}});
    }
  }
  Json skipped = Json::array();
  for (const auto& [a, l] : search.skipped) skipped.push_back({{"alpha", a}, {"lambda", l}});

  Json j = {{"command", "ergodicity"}, {"attempts", attempts}, {"skipped", skipped}};
  j["certificate"] = search.best >= 0 ? to_json(std::get<LyapunovCertificate>(search.attempts[static_cast<std::size_t>(search.best)]))
                                      : Json(nullptr);
  if (const auto* sym = symmetric_of(spec)) j["drift_zero"] = to_json(drift_zero(*sym));

  bool refuted = search.best < 0;
  const TruncatedChain chain = build_truncated(model, cap, budget);
  const Counts start = x0 ? to_counts(*x0) : Counts(static_cast<std::size_t>(model.n_boxes()), 0);
  try {
    const TvDecayReport tv = tv_decay(chain, start, steps, topts);
    j["tv_decay"] = to_json(tv);
    write_text(out / "tv_decay.dat", [&](std::ostream& o) { write_tv_table(o, tv); });
    if (!(tv.rate < 1.0)) refuted = true;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::TruncationTooTight) throw;
    j["tv_decay"] = {{"error", {{"kind", "TruncationTooTight"}, {"message", e.what()}}}};
    refuted = true;
  }
  write_json(out / "ergodicity.json", j);
  return refuted ? kRefuted : kOk;
}

int cmd_oracle(const Json& doc, const ValidatedModel& model, const fs::path& out) {
  std::vector<ConfigIssue> issues;
  Reader r(block_of(doc, "oracle"), "oracle", issues);
  const int cap = static_cast<int>(r.integer("cap").value_or(12));
  const auto budget = static_cast<std::size_t>(r.integer("budget").value_or(kDefaultOracleBudget));
  r.require(cap >= 1, "cap", "must be >= 1");
  throw_if(issues);

  const TruncatedChain chain = build_truncated(model, cap, budget);
  const Eigen::VectorXd ctmc = stationary(chain, ChainKind::Ctmc);
  const Eigen::VectorXd embedded = stationary(chain, ChainKind::Embedded);
  Eigen::VectorXd weighted = ctmc.cwiseProduct(chain.exit_rate);
  weighted /= weighted.sum();

  Json states = Json::array();
  for (std::size_t s = 0; s < chain.size; ++s) {
    const auto k = static_cast<Eigen::Index>(s);
    states.push_back({{"state", chain.state(s)}, {"ctmc", ctmc[k]}, {"embedded", embedded[k]}});
  }
  write_json(out / "oracle.json", {{"command", "oracle"},
                                   {"cap", cap},
                                   {"states", chain.size},
                                   {"jump_identity_error", (weighted - embedded).lpNorm<Eigen::Infinity>()},
                                   {"leakage", leaked_mass(chain, embedded)},
                                   {"distribution", states}});
  return kOk;
}

int cmd_plotdata(const Json& doc, const ValidatedModel& model, const fs::path& out) {
  std::vector<ConfigIssue> issues;
  Reader r(block_of(doc, "plotdata"), "plotdata", issues);
  const double lo = r.number("lo").value_or(0.0);
  const double hi = r.number("hi").value_or(8.0);
  const int points = static_cast<int>(r.integer("points").value_or(41));
  r.require(hi > lo, "hi", "must exceed lo");
  r.require(points >= 2, "points", "must be >= 2");
  if (model.n_boxes() != 2) issues.push_back({"model.n_boxes", "InvalidValue", "phase plane needs n_boxes = 2"});
  throw_if(issues);
  write_text(out / "phase_plane.dat", [&](std::ostream& o) { write_phase_plane(o, model.params(), lo, hi, points); });
  return kOk;
}

void report_issues(std::ostream& diag, const std::vector<ConfigIssue>& issues) {
  Json errors = Json::array();
  for (const auto& i : issues) errors.push_back({{"path", i.path}, {"kind", i.kind}, {"message", i.message}});
  diag << Json{{"errors", errors}}.dump() << '\n';
}

bool is_refutation(ErrorCode code) {
  return code == ErrorCode::Extinction || code == ErrorCode::TruncationTooTight || code == ErrorCode::NotStable;
}

}  // namespace

int run(std::string_view command, const fs::path& config_path, const fs::path& out_dir,
        const std::vector<std::string>& overrides, std::ostream& diag) {
  try {
    const Json doc = load_document(config_path, overrides);
    const ModelSpec spec = parse_model(doc);
    const ValidatedModel model = validate_spec(spec);
    fs::create_directories(out_dir);

    if (command == "simulate") return cmd_simulate(doc, model, out_dir);
    if (command == "ode") return cmd_ode(doc, model, out_dir);
    if (command == "equilibria") return cmd_equilibria(doc, spec, model, out_dir);
    if (command == "lln") return cmd_lln(doc, spec, model, out_dir);
    if (command == "clt") return cmd_clt(doc, spec, model, out_dir);
    if (command == "ergodicity") return cmd_ergodicity(doc, spec, model, out_dir);
    if (command == "oracle") return cmd_oracle(doc, model, out_dir);
    if (command == "plotdata") return cmd_plotdata(doc, model, out_dir);
    report_issues(diag, {{"command", "UnknownCommand", "unknown command '" + std::string(command) + "'"}});
    return kInvalidConfig;
  } catch (const ConfigError& e) {
    report_issues(diag, e.issues());
    return kInvalidConfig;
  } catch (const ValidationError& e) {
    std::vector<ConfigIssue> issues;
    for (const auto& i : e.issues()) issues.push_back({"model." + i.field, std::string(to_string(i.kind)), i.describe()});
    report_issues(diag, issues);
    return kInvalidConfig;
  } catch (const Error& e) {
    diag << Json{{"error", {{"kind", to_string(e.code())}, {"message", e.what()}}}}.dump() << '\n';
    return is_refutation(e.code()) ? kRefuted : kFailure;
  } catch (const std::exception& e) {
    diag << Json{{"error", {{"kind", "Failure"}, {"message", e.what()}}}}.dump() << '\n';
    return kFailure;
  }
}

int main(int argc, char** argv) {
  CLI::App app{"Mean-field N-box birth/death/migration/competition model: simulation and analysis"};
  app.require_subcommand(1);
  std::string config;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
  for (const auto& name : kCommands) {
    auto* sub = app.add_subcommand(name, "run the " + name + " analysis");
    sub->add_option("--config", config, "experiment configuration (JSON)")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--command-override", overrides, "dot-path override KEY=VALUE (repeatable)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalidConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  return run(command, config, out_dir, overrides, std::cerr);
}

}  // namespace bpmf::cli
