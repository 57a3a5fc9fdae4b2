#include "pcma/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>

namespace pcma {

using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

json vec(const Eigen::Ref<const Eigen::VectorXd>& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json row(const Eigen::Ref<const RowVector>& v) { return vec(v.transpose()); }

const char* ci_name(CiType t) { return t == CiType::kPercentile ? "percentile" : "bc"; }

json coefficient(double estimate, const std::optional<BootstrapResult>& boot, int q,
                 std::optional<double> asym_se) {
  json c;
  c["estimate"] = estimate;
  if (boot) {
    c["se"] = boot->se[q];
    c["ci"] = {boot->ci[q].lower, boot->ci[q].upper};
  } else {
    c["se"] = nullptr;
    c["ci"] = nullptr;
  }
  c["asymptotic_se"] = asym_se ? json(*asym_se) : json(nullptr);
  return c;
}

}  // namespace

json build_report(const SequenceResult& result, const StandardizationRecord& rec,
                  const FeatureNames& names, const ReportSettings& settings) {
  json r;
  r["format"] = "pcma-report";
  r["version"] = 1;
  json s;
  s["components"] = settings.components;
  s["bootstrap"] = settings.n_boot;
  s["level"] = settings.level;
  s["ci"] = ci_name(settings.ci_type);
  s["seed"] = settings.seed;
  s["standardize"] = settings.standardize;
  s["covariate_mode"] = settings.covariate_mode;
  r["settings"] = s;
  r["names"] = {{"exposures", names.x}, {"mediators", names.m},
                {"covariates", names.w}, {"outcome", names.y}};
  r["standardization"] = {{"x_mean", row(rec.x_mean)}, {"x_scale", row(rec.x_scale)},
                          {"m_mean", row(rec.m_mean)}, {"m_scale", row(rec.m_scale)},
                          {"w_mean", row(rec.w_mean)}, {"y_mean", rec.y_mean},
                          {"y_scale", rec.y_scale}};

  json comps = json::array();
  for (std::size_t k = 0; k < result.tests.size(); ++k) {
    const ComponentTest& t = result.tests[k];
    const ParameterSet& th = t.component.params;
    std::optional<double> se_a, se_b, se_g, se_ie;
    std::string asym_note;
    try {
      const AsymptoticCovariances cov =
          asymptotic_covariances(result.step_data.at(k), t.component);
      se_a = std::sqrt(cov.Xi(0, 0));
      se_b = std::sqrt(cov.Xi(1, 1));
      se_g = std::sqrt(cov.Xi(2, 2));
      se_ie = std::sqrt(cov.sigma2_ab);
    } catch (const Error& e) {
      asym_note = e.what();
    }
    json c;
    c["index"] = k + 1;
    c["retained"] = k < result.sequence.components.size();
    c["significant"] = t.significant;
    c["phi"] = vec(th.phi);
    c["psi"] = vec(th.psi);
    c["coefficients"] = {
        {"alpha", coefficient(th.alpha, t.bootstrap, kAlpha, se_a)},
        {"beta", coefficient(th.beta, t.bootstrap, kBeta, se_b)},
        {"ie", coefficient(t.component.ie, t.bootstrap, kIE, se_ie)},
        {"de", coefficient(t.component.de, t.bootstrap, kDE, se_g)},
    };
    c["te"] = t.component.te;
    c["theta1"] = vec(th.theta1);
    c["theta2"] = vec(th.theta2);
    c["sigma2"] = th.sigma2;
    c["tau2"] = th.tau2;
    c["diagnostics"] = {{"objective", t.component.objective},
                        {"iterations", t.component.iterations},
                        {"converged", t.component.converged},
                        {"kkt_residual", t.trace.kkt_residual},
                        {"lambda1", t.trace.lambda1},
                        {"lambda2", t.trace.lambda2},
                        {"degenerate_updates", t.trace.degenerate_updates},
                        {"perfect_fit", t.trace.perfect_fit},
                        {"objective_trace", t.trace.objective_per_sweep},
                        {"bootstrap_redraws", t.bootstrap ? t.bootstrap->redraws : 0}};
    if (!asym_note.empty()) c["diagnostics"]["asymptotic_note"] = asym_note;
    comps.push_back(std::move(c));
  }
  r["components"] = std::move(comps);
  return r;
}

void check_report(const json& r) {
  try {
    if (!r.is_object() || r.value("format", "") != "pcma-report")
      throw Error(ErrorCode::kParseError, "not a pcma report");
    for (const char* key : {"settings", "names", "components"})
      if (!r.contains(key)) throw Error(ErrorCode::kParseError, std::string("report lacks '") + key + "'");
    for (const auto& c : r.at("components")) {
      c.at("index").get<int>();
      c.at("phi").get<std::vector<double>>();
      c.at("psi").get<std::vector<double>>();
      for (const char* q : {"alpha", "beta", "ie", "de"})
        c.at("coefficients").at(q).at("estimate").get<double>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("corrupt report: ") + e.what());
  }
}

namespace {

std::string opt_num(const json& v) { return v.is_null() ? "-" : format_double(v.get<double>()); }

std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s + " " : s + std::string(w - s.size(), ' ');
}

void loadings(std::ostringstream& os, const char* title, const json& values,
              const json& names, int top_k) {
  const auto v = values.get<std::vector<double>>();
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(v[a]) > std::abs(v[b]);
  });
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(top_k), v.size());
  os << "  Top " << k << " " << title << " loadings\n";
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = idx[i];
    const std::string name = j < names.size() ? names[j].get<std::string>()
                                              : "#" + std::to_string(j + 1);
    os << "    " << (v[j] < 0.0 ? "- " : "+ ") << pad(name, 24) << format_double(v[j]) << '\n';
  }
}

}  // namespace

std::string render_report(const json& r, int top_k) {
  check_report(r);
  std::ostringstream os;
  const auto& s = r.at("settings");
  os << "PCMA report: " << r.at("components").size() << " component(s) tested";
  if (s.value("bootstrap", 0) > 0)
    os << ", " << s.at("bootstrap").get<int>() << " bootstrap samples ("
       << s.at("ci").get<std::string>() << ", level " << format_double(s.at("level").get<double>())
       << ")";
  os << "\n";
  for (const auto& c : r.at("components")) {
    os << "\nC" << c.at("index").get<int>()
       << (c.value("retained", false) ? "" : " (not retained)")
       << (c.value("significant", false) ? "" : " [IE not significant]") << "\n";
    os << "  " << pad("", 6) << pad("Estimate", 24) << pad("SE", 24) << pad("CI", 50)
       << "Asymptotic SE\n";
    const std::pair<const char*, const char*> rows[] = {
        {"alpha", "alpha"}, {"beta", "beta"}, {"ie", "IE"}, {"de", "DE"}};
    for (const auto& [key, label] : rows) {
      const auto& q = c.at("coefficients").at(key);
      std::string ci = "-";
      if (!q.at("ci").is_null())
        ci = "(" + format_double(q.at("ci")[0].get<double>()) + ", " +
             format_double(q.at("ci")[1].get<double>()) + ")";
      os << "  " << pad(label, 6) << pad(format_double(q.at("estimate").get<double>()), 24)
         << pad(opt_num(q.at("se")), 24) << pad(ci, 50) << opt_num(q.at("asymptotic_se"))
         << '\n';
    }
    if (c.contains("diagnostics")) {
      const auto& d = c.at("diagnostics");
      os << "  converged: " << (d.value("converged", false) ? "yes" : "no")
         << ", sweeps: " << d.value("iterations", 0)
         << ", KKT residual: " << format_double(d.value("kkt_residual", 0.0)) << '\n';
    }
    if (top_k > 0) {
      const json& names = r.at("names");
      loadings(os, "exposure", c.at("phi"), names.value("exposures", json::array()), top_k);
      loadings(os, "mediator", c.at("psi"), names.value("mediators", json::array()), top_k);
    }
  }
  return os.str();
}

std::string coefficients_csv(const json& r) {
  check_report(r);
  std::ostringstream os;
  os << "component,quantity,estimate,se,ci_lower,ci_upper,asymptotic_se\n";
  for (const auto& c : r.at("components")) {
    for (const char* key : {"alpha", "beta", "ie", "de"}) {
      const auto& q = c.at("coefficients").at(key);
      os << 'C' << c.at("index").get<int>() << ',' << key << ','
         << format_double(q.at("estimate").get<double>()) << ',' << opt_num(q.at("se"));
      if (q.at("ci").is_null())
        os << ",-,-";
      else
        os << ',' << format_double(q.at("ci")[0].get<double>()) << ','
           << format_double(q.at("ci")[1].get<double>());
      os << ',' << opt_num(q.at("asymptotic_se")) << '\n';
    }
  }
  return os.str();
}

}  // namespace pcma
