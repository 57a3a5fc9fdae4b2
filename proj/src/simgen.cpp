#include "pcma/simgen.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <fstream>
#include <iterator>
#include "json.hpp"
#include <sstream>

#include "pcma/parallel.hpp"
#include "pcma/rng.hpp"

namespace pcma {

namespace {

bool orthonormal(const Matrix& Q, double tol) {
  if (Q.rows() != Q.cols()) return false;
  const Matrix I = Matrix::Identity(Q.cols(), Q.cols());
  return (Q.transpose() * Q - I).cwiseAbs().maxCoeff() <= tol;
}

bool positive_non_increasing(const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!(v(i) > 0.0) || !std::isfinite(v(i))) return false;
    if (i > 0 && v(i) > v(i - 1)) return false;
  }
  return true;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw Error(ErrorCode::kInvalidArgument, "scenario: " + msg);
}

}  // namespace

void SimScenario::validate() const {
  require(p >= 1 && q >= 1, "p and q must be positive");
  require(n >= 2, "n must be at least 2");
  require(r >= 0 && r <= std::min(p, q), "path count must lie in [0, min(p, q)]");
  require(static_cast<int>(paths.size()) == r, "one coefficient triple per path");
  require(phi_true.rows() == p && orthonormal(phi_true, 1e-12),
          "Phi_true must be p x p orthonormal");
  require(psi_true.rows() == q && orthonormal(psi_true, 1e-12),
          "Psi_true must be q x q orthonormal");
  require(eigen_x.size() == p && positive_non_increasing(eigen_x),
          "eigen_x must hold p positive non-increasing values");
  require(eigen_m.size() == q && positive_non_increasing(eigen_m),
          "eigen_m must hold q positive non-increasing values");
}

Vector exponential_decay(int count, double first, double ratio) {
  Vector v(std::max(count, 0));
  double x = first;
  for (Eigen::Index i = 0; i < v.size(); ++i, x *= ratio) v(i) = x;
  return v;
}

Matrix random_orthonormal(int dim, std::uint64_t seed) {
  Engine eng(seed);
  std::normal_distribution<double> z;
  Matrix G(dim, dim);
  for (Eigen::Index j = 0; j < dim; ++j)
    for (Eigen::Index i = 0; i < dim; ++i) G(i, j) = z(eng);
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ() * Matrix::Identity(dim, dim);
  const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < dim; ++j)
    if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
  return Q;
}

SimScenario make_scenario(const ScenarioSpec& spec, std::uint64_t seed) {
  require(spec.p >= 1 && spec.q >= 1, "p and q must be positive");
  require(spec.lambda_first > 0.0 && spec.lambda_ratio > 0.0 && spec.lambda_ratio <= 1.0,
          "eigenvalue decay needs first > 0 and ratio in (0, 1]");
  require(spec.mediator_variance > 0.0, "mediator_variance must be positive");
  SimScenario sc;
  sc.name = spec.name;
  sc.p = spec.p;
  sc.q = spec.q;
  sc.n = spec.n;
  sc.r = static_cast<int>(spec.paths.size());
  sc.paths = spec.paths;
  sc.phi_true = random_orthonormal(spec.p, derive_seed(spec.projection_seed, {1}));
  sc.psi_true = random_orthonormal(spec.q, derive_seed(spec.projection_seed, {2}));
  sc.eigen_x = exponential_decay(spec.p, spec.lambda_first, spec.lambda_ratio);
  sc.eigen_m = Vector::Constant(spec.q, spec.mediator_variance);
  for (int j = 0; j < sc.r && j < spec.q && j < spec.p; ++j)
    sc.eigen_m(j) = sc.paths[j].alpha * sc.paths[j].alpha * sc.eigen_x(j) + 1.0;
  sc.seed = seed;
  sc.validate();
  return sc;
}

ScenarioSpec builtin_scenario(const std::string& name) {
  ScenarioSpec s;
  s.name = name;
  if (name == "small") return s;
  if (name == "adni-dim") {
    s.p = 35;
    s.q = 37;
    s.n = 135;
    s.lambda_ratio = 0.865;
    return s;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown built-in scenario '" + name + "'");
}

ScenarioSpec parse_scenario_spec(const std::string& json_text) {
  using nlohmann::json;
  ScenarioSpec s;
  try {
    const json j = json::parse(json_text);
    if (!j.is_object()) throw Error(ErrorCode::kParseError, "scenario must be a JSON object");
    s.name = j.value("name", s.name);
    s.p = j.value("p", s.p);
    s.q = j.value("q", s.q);
    s.n = j.value("n", s.n);
    s.lambda_first = j.value("lambda_first", s.lambda_first);
    s.lambda_ratio = j.value("lambda_ratio", s.lambda_ratio);
    s.mediator_variance = j.value("mediator_variance", s.mediator_variance);
    s.projection_seed = j.value("projection_seed", s.projection_seed);
    if (j.contains("paths")) {
      s.paths.clear();
      for (const auto& e : j.at("paths"))
        s.paths.push_back({e.at("alpha").get<double>(), e.at("beta").get<double>(),
                           e.at("gamma").get<double>()});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("scenario: ") + e.what());
  }
  return s;
}

ScenarioSpec load_scenario_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open scenario file " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_scenario_spec(text);
}

SimScenario with_seed(SimScenario scenario, std::uint64_t seed) {
  scenario.seed = seed;
  return scenario;
}

DataSet generate(const SimScenario& sc) {
  sc.validate();
  Engine eng = make_engine(sc.seed, {0xDA7A});
  std::normal_distribution<double> z;
  const Eigen::Index n = sc.n;
  Matrix xt(n, sc.p), mt(n, sc.q);
  for (Eigen::Index j = 0; j < sc.p; ++j) {
    const double sd = std::sqrt(sc.eigen_x(j));
    for (Eigen::Index i = 0; i < n; ++i) xt(i, j) = sd * z(eng);
  }
  for (Eigen::Index j = 0; j < sc.q; ++j) {
    if (j < sc.r) {
      const double a = sc.paths[j].alpha;
      for (Eigen::Index i = 0; i < n; ++i) mt(i, j) = a * xt(i, j) + z(eng);
    } else {
      const double sd = std::sqrt(sc.eigen_m(j));
      for (Eigen::Index i = 0; i < n; ++i) mt(i, j) = sd * z(eng);
    }
  }
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = z(eng);
  for (int j = 0; j < sc.r; ++j)
    y += sc.paths[j].gamma * xt.col(j) + sc.paths[j].beta * mt.col(j);

  DataSet d;
  d.X = xt * sc.phi_true.transpose();
  d.M = mt * sc.psi_true.transpose();
  d.W = Matrix::Ones(n, 1);
  d.Y = std::move(y);
  return d;
}

namespace {

struct OlsFit {
  Vector coef;
  Vector se;
  double sigma2 = 0.0;
  double df = 0.0;
};

OlsFit ols(const Matrix& Z, const Vector& y) {
  const Eigen::Index n = Z.rows();
  const Eigen::Index k = Z.cols();
  if (n <= k)
    throw Error(ErrorCode::kRankDeficientDesign, "PCA-HP regression has no residual df");
  Eigen::ColPivHouseholderQR<Matrix> qr(Z);
  qr.setThreshold(1e-10);
  if (qr.rank() < k)
    throw Error(ErrorCode::kRankDeficientDesign, "PCA-HP regression design is rank deficient");
  OlsFit f;
  f.coef = qr.solve(y);
  f.df = static_cast<double>(n - k);
  f.sigma2 = (y - Z * f.coef).squaredNorm() / f.df;
  const Matrix inv = (Z.transpose() * Z).ldlt().solve(Matrix::Identity(k, k));
  f.se = (f.sigma2 * inv.diagonal()).cwiseSqrt();
  return f;
}

double two_sided_p(double t, double df) {
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

}  // namespace

std::vector<PcaHpEntry> pca_hp(const DataSet& data, double variance_threshold,
                               double test_level) {
  validate(data);
  if (!(variance_threshold > 0.0 && variance_threshold <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "variance_threshold must lie in (0, 1]");
  const Eigen::Index n = data.n();
  const Eigen::Index q = data.q();
  const Eigen::Index s = data.s();

  // (i) exposure PCA
  const Matrix Xc = data.X.rowwise() - data.X.colwise().mean();
  Eigen::SelfAdjointEigenSolver<Matrix> ex(Xc.transpose() * Xc / static_cast<double>(n - 1));
  const Vector evals = ex.eigenvalues().reverse();
  const Matrix evecs = ex.eigenvectors().rowwise().reverse();
  const double total = evals.sum();
  Eigen::Index k = 0;
  double cum = 0.0;
  std::vector<double> explained;
  while (k < evals.size()) {
    cum += std::max(evals(k), 0.0);
    explained.push_back(cum / total);
    ++k;
    if (cum / total >= variance_threshold - 1e-12) break;
  }
  const Matrix T = Xc * evecs.leftCols(k);

  // (ii) one scalar-exposure analysis per retained PC: mediators are
  // decorrelated by the eigenvectors of their residual covariance given that
  // PC (and W), then each transformed mediator gets its own pair of
  // regressions, s_l ~ t_j + W and y ~ t_j + s_l + W.
  std::vector<PcaHpEntry> entries;
  for (Eigen::Index j = 0; j < k; ++j) {
    PcaHpEntry e;
    e.exposure_index = static_cast<int>(j);
    e.explained = explained[static_cast<std::size_t>(j)];
    e.phi = evecs.col(j);

    Matrix Zj(n, 1 + s);
    Zj << T.col(j), data.W;
    const Matrix resid = data.M - Zj * Eigen::ColPivHouseholderQR<Matrix>(Zj).solve(data.M);
    Eigen::SelfAdjointEigenSolver<Matrix> me(resid.transpose() * resid /
                                             static_cast<double>(n - 1 - s));
    const Matrix E = me.eigenvectors().rowwise().reverse();
    const Matrix S = data.M * E;

    Matrix Zy(n, 2 + s);
    Zy.col(0) = T.col(j);
    Zy.rightCols(s) = data.W;
    // Ranked by the joint statistic min(|t_a|, |t_b|): the same order as the
    // larger p-value, without ties from p-values underflowing to zero.
    double best_stat = -1.0;
    for (Eigen::Index l = 0; l < q; ++l) {
      const OlsFit med = ols(Zj, S.col(l));
      Zy.col(1) = S.col(l);
      const OlsFit out = ols(Zy, data.Y);
      const double ta = med.coef(0) / med.se(0);
      const double tb = out.coef(1) / out.se(1);
      const double stat = std::min(std::abs(ta), std::abs(tb));
      if (stat > best_stat) {
        best_stat = stat;
        e.psi = E.col(l);
        e.alpha = med.coef(0);
        e.beta = out.coef(1);
        e.gamma = out.coef(0);
        e.p_alpha = two_sided_p(ta, med.df);
        e.p_beta = two_sided_p(tb, out.df);
        e.sigma2 = med.sigma2;
        e.tau2 = out.sigma2;
      }
    }
    e.significant = std::max(e.p_alpha, e.p_beta) < test_level;
    entries.push_back(std::move(e));
  }
  return entries;
}

bool is_identified(double sim_phi, double sim_psi) { return 0.5 * (sim_phi + sim_psi) > 0.5; }

ReplicateMetrics evaluate(const SimScenario& truth,
                          const std::vector<std::optional<ParameterSet>>& fitted) {
  ReplicateMetrics rm;
  rm.components.resize(static_cast<std::size_t>(truth.r));
  for (int j = 0; j < truth.r; ++j) {
    auto& cm = rm.components[static_cast<std::size_t>(j)];
    if (static_cast<std::size_t>(j) >= fitted.size() || !fitted[j]) continue;
    const ParameterSet& th = *fitted[j];
    if (th.phi.size() != truth.p || th.psi.size() != truth.q) continue;
    const double dphi = th.phi.dot(truth.phi_true.col(j));
    const double dpsi = th.psi.dot(truth.psi_true.col(j));
    cm.present = true;
    cm.sim_phi = std::min(std::abs(dphi), 1.0);
    cm.sim_psi = std::min(std::abs(dpsi), 1.0);
    cm.identified = is_identified(cm.sim_phi, cm.sim_psi);
    double a = th.alpha, b = th.beta, g = th.gamma;
    if (dphi < 0.0) {
      a = -a;
      g = -g;
    }
    if (dpsi < 0.0) {
      a = -a;
      b = -b;
    }
    cm.alpha = a;
    cm.beta = b;
    cm.gamma = g;
    cm.ie = a * b;
  }
  return rm;
}

ReplicateMetrics evaluate(const SimScenario& truth, const ComponentSequence& fitted) {
  std::vector<std::optional<ParameterSet>> v;
  for (const auto& c : fitted.components) v.emplace_back(c.params);
  return evaluate(truth, v);
}

const char* method_name(Method m) { return m == Method::kPcma ? "PCMA" : "PCA-HP"; }

namespace {

std::vector<std::optional<ParameterSet>> pca_hp_components(const DataSet& data,
                                                           double threshold) {
  std::vector<std::optional<ParameterSet>> out;
  for (const auto& e : pca_hp(data, threshold)) {
    if (!e.significant) {
      out.emplace_back(std::nullopt);
      continue;
    }
    ParameterSet th;
    th.phi = e.phi;
    th.psi = e.psi;
    th.alpha = e.alpha;
    th.beta = e.beta;
    th.gamma = e.gamma;
    th.sigma2 = e.sigma2;
    th.tau2 = e.tau2;
    canonicalize_signs(th);
    out.emplace_back(std::move(th));
  }
  return out;
}

std::optional<double> sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return std::nullopt;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double mean_of(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  return v.empty() ? 0.0 : m / static_cast<double>(v.size());
}

ParameterStats stats(const std::vector<double>& est, double truth) {
  ParameterStats ps;
  double mse = 0.0;
  for (double x : est) mse += (x - truth) * (x - truth);
  ps.bias = mean_of(est) - truth;
  ps.se = sample_sd(est);
  ps.mse = mse / static_cast<double>(est.size());
  return ps;
}

}  // namespace

StudySummary run_study(const SimScenario& scenario, const StudyConfig& config) {
  scenario.validate();
  if (config.replicates < 1)
    throw Error(ErrorCode::kInvalidArgument, "replicates must be >= 1");
  const int cap = std::min(scenario.p, scenario.q);
  const int max_k = config.max_components > 0 ? std::min(config.max_components, cap)
                                              : std::min(scenario.r + 1, cap);
  const std::size_t reps = static_cast<std::size_t>(config.replicates);

  StudySummary sum;
  sum.p = scenario.p;
  sum.q = scenario.q;
  sum.n = scenario.n;
  sum.replicates = config.replicates;
  sum.raw.assign(config.methods.size(), std::vector<ReplicateMetrics>(reps));

  parallel_for(reps, config.threads, [&](std::size_t i) {
    const SimScenario sc = with_seed(scenario, derive_seed(scenario.seed, {i}));
    // centering only: the true coefficients live on the generator's scale
    const DataSet data = standardize(generate(sc), true, false).data;
    for (std::size_t m = 0; m < config.methods.size(); ++m) {
      if (config.methods[m] == Method::kPcma) {
        InferenceConfig infer = config.infer;
        infer.seed = derive_seed(scenario.seed, {i, 0xB007});
        infer.threads = 1;
        const SequenceResult res =
            fit_sequence(data, max_k, config.fit, infer, config.sequence);
        sum.raw[m][i] = evaluate(sc, res.sequence);
      } else {
        sum.raw[m][i] = evaluate(sc, pca_hp_components(data, config.pca_hp_threshold));
      }
    }
  });

  for (std::size_t m = 0; m < config.methods.size(); ++m) {
    for (int j = 0; j < scenario.r; ++j) {
      StudyRow row;
      row.method = config.methods[m];
      row.component = j + 1;
      row.replicates = config.replicates;
      std::vector<double> sp, ss, a, b, g, ie;
      for (const auto& rm : sum.raw[m]) {
        const auto& c = rm.components[static_cast<std::size_t>(j)];
        if (!c.identified) continue;
        ++row.identified;
        sp.push_back(c.sim_phi);
        ss.push_back(c.sim_psi);
        a.push_back(c.alpha);
        b.push_back(c.beta);
        g.push_back(c.gamma);
        ie.push_back(c.ie);
      }
      if (row.identified > 0) {
        const auto& t = scenario.paths[static_cast<std::size_t>(j)];
        row.sim_phi_mean = mean_of(sp);
        row.sim_psi_mean = mean_of(ss);
        row.sim_phi_sd = sample_sd(sp);
        row.sim_psi_sd = sample_sd(ss);
        row.alpha = stats(a, t.alpha);
        row.beta = stats(b, t.beta);
        row.gamma = stats(g, t.gamma);
        row.ie = stats(ie, t.alpha * t.beta);
      }
      sum.rows.push_back(row);
    }
  }
  return sum;
}

namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string opt(const std::optional<double>& v) { return v ? num(*v) : "-"; }

}  // namespace

std::string study_csv(const StudySummary& s) {
  std::ostringstream os;
  os << "p,q,n,method,component,identified_pct,sim_phi_mean,sim_phi_sd,sim_psi_mean,"
        "sim_psi_sd";
  for (const char* name : {"alpha", "beta", "de", "ie"})
    os << ',' << name << "_bias," << name << "_se," << name << "_mse";
  os << '\n';
  for (const auto& r : s.rows) {
    os << s.p << ',' << s.q << ',' << s.n << ',' << method_name(r.method) << ",C"
       << r.component << ',' << num(r.identified_pct());
    if (r.identified > 0) {
      os << ',' << num(r.sim_phi_mean) << ',' << opt(r.sim_phi_sd) << ','
         << num(r.sim_psi_mean) << ',' << opt(r.sim_psi_sd);
    } else {
      os << ",-,-,-,-";
    }
    for (const auto* ps : {&r.alpha, &r.beta, &r.gamma, &r.ie}) {
      if (*ps)
        os << ',' << num((*ps)->bias) << ',' << opt((*ps)->se) << ',' << num((*ps)->mse);
      else
        os << ",-,-,-";
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace pcma
