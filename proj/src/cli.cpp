#include "pcma/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "pcma/csv_io.hpp"
#include "pcma/report.hpp"
#include "pcma/sequential.hpp"
#include "pcma/simgen.hpp"

namespace pcma {

namespace {

struct Options {
  // fit
  std::string exposures, mediators, outcome;
  std::optional<std::string> covariates;
  int components = -1;  // -1: min(3, p, q)
  int bootstrap = 1000;
  std::string ci = "bc";
  double level = 0.95;
  std::string standardize = "zscore";
  std::string covariate_mode = "in-model";
  bool strict = false;
  int max_sweeps = 1000;
  // shared
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out_path;
  std::string fit_format = "json";
  std::string sim_format = "csv";
  std::string report_format = "text";
  // simulate
  std::string scenario = "small";
  int replicates = 200;
  std::optional<int> n;
  // report
  std::string report_path;
  int top_k = 10;
};

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIoError, "cannot write " + path);
  f << text;
}

CiType parse_ci(const std::string& s) {
  return s == "percentile" ? CiType::kPercentile : CiType::kBiasCorrected;
}

int cmd_fit(const Options& o, std::ostream& out, std::ostream& err) {
  LoadedData ld = load_dataset(o.exposures, o.mediators, o.covariates, o.outcome);
  FeatureNames names{ld.x_names, ld.m_names, ld.w_names, ld.y_name};
  DataSet data = std::move(ld.data);
  if (o.covariate_mode == "pre-adjust") {
    data = residualize_on_covariates(data);
    names.w = {"(intercept)"};
  }
  const bool center = o.standardize != "none";
  const bool scale = o.standardize == "zscore";
  Standardized st = standardize(data, center, scale);

  const int cap = static_cast<int>(std::min(data.p(), data.q()));
  const int k = o.components < 0 ? std::min(3, cap) : o.components;

  FitConfig fit;
  fit.max_sweeps = o.max_sweeps;
  InferenceConfig infer;
  infer.n_boot = o.bootstrap;
  infer.level = o.level;
  infer.ci_type = parse_ci(o.ci);
  infer.seed = o.seed;
  infer.threads = o.threads;
  SequenceOptions seq;
  seq.test_significance = o.bootstrap > 0;

  const SequenceResult res = fit_sequence(st.data, k, fit, infer, seq);

  ReportSettings settings;
  settings.components = k;
  settings.n_boot = o.bootstrap;
  settings.level = o.level;
  settings.ci_type = infer.ci_type;
  settings.seed = o.seed;
  settings.standardize = o.standardize;
  settings.covariate_mode = o.covariate_mode;
  const nlohmann::json report = build_report(res, st.record, names, settings);
  emit(o.fit_format == "csv" ? coefficients_csv(report) : report.dump(2) + "\n", o.out_path, out);

  if (o.strict) {
    for (const auto& t : res.tests)
      if (!t.component.converged) {
        err << "error: component did not converge within " << o.max_sweeps << " sweeps\n";
        return kExitNotConverged;
      }
  }
  return kExitOk;
}

SimScenario resolve_scenario(const Options& o) {
  ScenarioSpec spec;
  if (o.scenario == "small" || o.scenario == "adni-dim")
    spec = builtin_scenario(o.scenario);
  else
    spec = load_scenario_spec(o.scenario);
  if (o.n) spec.n = *o.n;
  return make_scenario(spec, o.seed);
}

std::string study_json(const StudySummary& s) {
  nlohmann::json rows = nlohmann::json::array();
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  for (const auto& r : s.rows) {
    nlohmann::json j;
    j["method"] = method_name(r.method);
    j["component"] = r.component;
    j["identified_pct"] = r.identified_pct();
    j["sim_phi_mean"] = r.identified ? nlohmann::json(r.sim_phi_mean) : nlohmann::json(nullptr);
    j["sim_phi_sd"] = opt(r.sim_phi_sd);
    j["sim_psi_mean"] = r.identified ? nlohmann::json(r.sim_psi_mean) : nlohmann::json(nullptr);
    j["sim_psi_sd"] = opt(r.sim_psi_sd);
    const std::pair<const char*, const std::optional<ParameterStats>*> stats[] = {
        {"alpha", &r.alpha}, {"beta", &r.beta}, {"de", &r.gamma}, {"ie", &r.ie}};
    for (const auto& [name, ps] : stats) {
      if (*ps)
        j[name] = {{"bias", (*ps)->bias}, {"se", opt((*ps)->se)}, {"mse", (*ps)->mse}};
      else
        j[name] = nullptr;
    }
    rows.push_back(std::move(j));
  }
  nlohmann::json doc = {{"p", s.p}, {"q", s.q}, {"n", s.n}, {"replicates", s.replicates},
                        {"rows", rows}};
  return doc.dump(2) + "\n";
}

int cmd_simulate(const Options& o, std::ostream& out) {
  const SimScenario sc = resolve_scenario(o);
  StudyConfig cfg;
  cfg.replicates = o.replicates;
  cfg.threads = o.threads;
  cfg.fit.max_sweeps = o.max_sweeps;
  cfg.infer.n_boot = o.bootstrap;
  cfg.infer.level = o.level;
  cfg.infer.ci_type = parse_ci(o.ci);
  cfg.sequence.test_significance = o.bootstrap > 0;
  const StudySummary s = run_study(sc, cfg);
  emit(o.sim_format == "json" ? study_json(s) : study_csv(s), o.out_path, out);
  return kExitOk;
}

int cmd_report(const Options& o, std::ostream& out) {
  std::ifstream in(o.report_path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open report " + o.report_path);
  nlohmann::json r;
  try {
    r = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, o.report_path + ": " + e.what());
  }
  check_report(r);
  emit(o.report_format == "csv" ? coefficients_csv(r) : render_report(r, o.top_k), o.out_path, out);
  return kExitOk;
}

void add_inference_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--bootstrap", o.bootstrap, "bootstrap samples per component (0 disables)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--ci", o.ci, "interval type")->check(CLI::IsMember({"percentile", "bc"}));
  cmd->add_option("--level", o.level, "confidence level")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--max-sweeps", o.max_sweeps, "coordinate-descent sweep cap")
      ->check(CLI::PositiveNumber);
}

void add_common_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--seed", o.seed, "master random seed");
  cmd->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out_path, "output file (default: stdout)");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Principal component mediation analysis", "pcma"};
  app.require_subcommand(1);

  auto* fit = app.add_subcommand("fit", "fit mediation components to CSV data");
  fit->add_option("--exposures", o.exposures, "exposure CSV (n x p)")->required();
  fit->add_option("--mediators", o.mediators, "mediator CSV (n x q)")->required();
  fit->add_option("--covariates", o.covariates, "covariate CSV (n x s)");
  fit->add_option("--outcome", o.outcome, "outcome CSV (n x 1)")->required();
  fit->add_option("--components", o.components, "maximum number of components")
      ->check(CLI::NonNegativeNumber);
  fit->add_option("--standardize", o.standardize, "column standardization")
      ->check(CLI::IsMember({"none", "center", "zscore"}));
  fit->add_option("--covariate-mode", o.covariate_mode, "covariate handling")
      ->check(CLI::IsMember({"in-model", "pre-adjust"}));
  fit->add_flag("--strict", o.strict, "exit 3 if any component fails to converge");
  fit->add_option("--format", o.fit_format, "report format")->check(CLI::IsMember({"json", "csv"}));
  add_inference_flags(fit, o);
  add_common_flags(fit, o);

  auto* sim = app.add_subcommand("simulate", "run the benchmark simulation study");
  sim->add_option("--scenario", o.scenario, "small, adni-dim or a JSON scenario file");
  sim->add_option("--replicates", o.replicates, "number of simulated datasets")
      ->check(CLI::PositiveNumber);
  sim->add_option("--n", o.n, "override the scenario sample size")->check(CLI::Range(2, 1 << 30));
  sim->add_option("--format", o.sim_format, "summary format")->check(CLI::IsMember({"json", "csv"}));
  add_inference_flags(sim, o);
  add_common_flags(sim, o);

  auto* rep = app.add_subcommand("report", "render a saved fit report");
  rep->add_option("report", o.report_path, "report JSON written by `pcma fit`")->required();
  rep->add_option("--top-k", o.top_k, "loadings listed per projection")
      ->check(CLI::NonNegativeNumber);
  rep->add_option("--format", o.report_format, "text tables or coefficient CSV")
      ->check(CLI::IsMember({"text", "csv"}));
  rep->add_option("--out", o.out_path, "output file (default: stdout)");

  std::vector<std::string> argv_store{"pcma"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (fit->parsed()) return cmd_fit(o, out, err);
    if (sim->parsed()) return cmd_simulate(o, out);
    return cmd_report(o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }
}

}  // namespace pcma
