#include "pcma/inference.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <sstream>
#include <vector>

#include "pcma/parallel.hpp"
#include "pcma/rng.hpp"

namespace pcma {

void InferenceConfig::validate() const {
  if (n_boot < 100)
    throw Error(ErrorCode::kInvalidArgument, "n_boot must be >= 100");
  if (!(level > 0.0 && level < 1.0))
    throw Error(ErrorCode::kInvalidArgument, "level must lie in (0, 1)");
}

const char* quantity_name(int quantity) {
  static constexpr const char* kNames[kQuantityCount] = {"alpha", "beta", "gamma",
                                                         "de", "ie"};
  return kNames[quantity];
}

double normal_cdf(double z) { return boost::math::cdf(boost::math::normal(), z); }

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal(), p);
}

double empirical_quantile(std::span<const double> sorted, double prob) {
  if (sorted.empty())
    throw Error(ErrorCode::kInvalidArgument, "quantile of an empty sample");
  prob = std::clamp(prob, 0.0, 1.0);
  const double h = static_cast<double>(sorted.size() - 1) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

namespace {

std::vector<double> sorted_copy(std::span<const double> draws) {
  if (draws.empty())
    throw Error(ErrorCode::kInvalidArgument, "interval of an empty sample");
  std::vector<double> v(draws.begin(), draws.end());
  std::sort(v.begin(), v.end());
  return v;
}

Interval quantile_pair(const std::vector<double>& sorted, double p_lo, double p_hi) {
  return {empirical_quantile(sorted, p_lo), empirical_quantile(sorted, p_hi)};
}

}  // namespace

Interval percentile_interval(std::span<const double> draws, double level) {
  const auto v = sorted_copy(draws);
  if (v.front() == v.back()) return {v.front(), v.front()};
  return quantile_pair(v, 0.5 * (1.0 - level), 0.5 * (1.0 + level));
}

Interval bc_interval(std::span<const double> draws, double point, double level) {
  const auto v = sorted_copy(draws);
  if (v.front() == v.back()) return {v.front(), v.front()};
  const double b = static_cast<double>(v.size());
  const auto below = std::lower_bound(v.begin(), v.end(), point) - v.begin();
  double frac = static_cast<double>(below) / b;
  if (frac == 0.5) return quantile_pair(v, 0.5 * (1.0 - level), 0.5 * (1.0 + level));
  frac = std::clamp(frac, 0.5 / b, 1.0 - 0.5 / b);
  const double z0 = normal_quantile(frac);
  const double z = normal_quantile(0.5 * (1.0 + level));
  return quantile_pair(v, normal_cdf(2.0 * z0 - z), normal_cdf(2.0 * z0 + z));
}

namespace {

std::array<double, kQuantityCount> quantities(double alpha, double beta, double gamma) {
  return {alpha, beta, gamma, gamma, alpha * beta};
}

}  // namespace

BootstrapResult bootstrap_component(const DataSet& data,
                                    const MediationComponent& component,
                                    const InferenceConfig& config,
                                    int component_index, const FitConfig& refit) {
  validate(data);
  config.validate();
  const Eigen::Index n = data.n();
  const int n_boot = config.n_boot;
  const Vector t = data.X * component.params.phi;
  const Vector s = data.M * component.params.psi;
  const int cap = 10 * n_boot;

  BootstrapResult res;
  res.draws.resize(n_boot, kQuantityCount);
  std::vector<int> redraws(n_boot, 0);

  parallel_for(static_cast<std::size_t>(n_boot), config.threads, [&](std::size_t b) {
    Engine eng = make_engine(config.seed, {static_cast<std::uint64_t>(component_index),
                                           static_cast<std::uint64_t>(b)});
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    std::vector<Eigen::Index> rows(n);
    for (int attempt = 0;; ++attempt) {
      if (attempt > cap)
        throw Error(ErrorCode::kResampleDegenerate,
                    "bootstrap draw kept producing rank-deficient designs");
      for (auto& r : rows) r = pick(eng);
      try {
        std::array<double, kQuantityCount> q{};
        if (!config.refit_projections) {
          Vector tb(n), sb(n), yb(n);
          Matrix wb(n, data.s());
          for (Eigen::Index i = 0; i < n; ++i) {
            tb(i) = t(rows[i]);
            sb(i) = s(rows[i]);
            yb(i) = data.Y(rows[i]);
            wb.row(i) = data.W.row(rows[i]);
          }
          const Coefficients c = fit_score_coefficients(tb, sb, wb, yb);
          q = quantities(c.alpha, c.beta, c.gamma);
        } else {
          DataSet boot;
          boot.X.resize(n, data.p());
          boot.M.resize(n, data.q());
          boot.W.resize(n, data.s());
          boot.Y.resize(n);
          for (Eigen::Index i = 0; i < n; ++i) {
            boot.X.row(i) = data.X.row(rows[i]);
            boot.M.row(i) = data.M.row(rows[i]);
            boot.W.row(i) = data.W.row(rows[i]);
            boot.Y(i) = data.Y(rows[i]);
          }
          FitConfig cfg = refit;
          cfg.init = InitSupplied{component.params.phi, component.params.psi};
          ParameterSet th = fit_component(boot, cfg).component.params;
          if (th.phi.dot(component.params.phi) < 0.0) {
            th.alpha = -th.alpha;
            th.gamma = -th.gamma;
          }
          if (th.psi.dot(component.params.psi) < 0.0) {
            th.alpha = -th.alpha;
            th.beta = -th.beta;
          }
          q = quantities(th.alpha, th.beta, th.gamma);
        }
        for (int k = 0; k < kQuantityCount; ++k) res.draws(static_cast<Eigen::Index>(b), k) = q[k];
        redraws[b] = attempt;
        return;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kRankDeficientDesign) throw;
      }
    }
  });

  for (int r : redraws) res.redraws += r;
  if (res.redraws > cap)
    throw Error(ErrorCode::kResampleDegenerate,
                "more than 10*B redraws were needed for rank-deficient resamples");

  res.point = quantities(component.params.alpha, component.params.beta,
                         component.params.gamma);
  for (int k = 0; k < kQuantityCount; ++k) {
    const Vector col = res.draws.col(k);
    std::span<const double> draws(col.data(), static_cast<std::size_t>(col.size()));
    res.ci[k] = config.ci_type == CiType::kPercentile
                    ? percentile_interval(draws, config.level)
                    : bc_interval(draws, res.point[k], config.level);
    const double mean = col.mean();
    res.se[k] = std::sqrt((col.array() - mean).square().sum() /
                          static_cast<double>(n_boot - 1));
  }
  return res;
}

namespace {

Matrix checked_inverse(const Matrix& info, const char* block) {
  Eigen::JacobiSVD<Matrix> svd(info);
  const auto& sv = svd.singularValues();
  const double cond = sv(0) / sv(sv.size() - 1);
  if (!std::isfinite(cond) || cond > 1e14) {
    std::ostringstream msg;
    msg << block << " information matrix is singular (condition number " << cond << ")";
    throw Error(ErrorCode::kSingularInformation, msg.str());
  }
  Matrix inv = info.fullPivLu().inverse();
  return 0.5 * (inv + inv.transpose());
}

}  // namespace

Matrix xi_matrix(double kx, double km, double kxm, double s2, double t2) {
  Matrix info = Matrix::Zero(3, 3);
  info(0, 0) = kx / s2;
  info(1, 1) = km / t2;
  info(1, 2) = info(2, 1) = kxm / t2;
  info(2, 2) = kx / t2;
  return checked_inverse(info, "Xi");
}

Matrix pi_matrix(const Matrix& P, const Matrix& Q, const Matrix& R,
                 const ParameterSet& th) {
  const double c = th.alpha * th.alpha / th.sigma2 + th.gamma * th.gamma / th.tau2;
  const double d = th.alpha / th.sigma2 - th.beta * th.gamma / th.tau2;
  const double e = 1.0 / th.sigma2 + th.beta * th.beta / th.tau2;
  const Eigen::Index p = P.rows();
  const Eigen::Index q = Q.rows();
  Matrix info(p + q, p + q);
  info.topLeftCorner(p, p) = c * P;
  info.topRightCorner(p, q) = -d * R;
  info.bottomLeftCorner(q, p) = -d * R.transpose();
  info.bottomRightCorner(q, q) = e * Q;
  return checked_inverse(info, "Pi");
}

AsymptoticCovariances asymptotic_covariances(const DataSet& data,
                                             const MediationComponent& component) {
  validate(data);
  const auto& th = component.params;
  const Eigen::Index n = data.n();
  if (n <= data.p() + data.q() + data.s())
    throw Error(ErrorCode::kInvalidArgument, "asymptotic covariances need n > p + q + s");
  const double nd = static_cast<double>(n);
  const Matrix P = data.X.transpose() * data.X / nd;
  const Matrix Q = data.M.transpose() * data.M / nd;
  const Matrix R = data.X.transpose() * data.M / nd;
  const Matrix S = data.W.transpose() * data.W / nd;
  const Vector t = data.X * th.phi;
  const Vector s = data.M * th.psi;

  AsymptoticCovariances cov;
  cov.n = n;
  cov.kappa_x = t.squaredNorm() / nd;
  cov.kappa_m = s.squaredNorm() / nd;
  cov.kappa_xm = t.dot(s) / nd;
  cov.sigma2 = th.sigma2;
  cov.tau2 = th.tau2;
  cov.Pi = pi_matrix(P, Q, R, th) / nd;
  cov.Xi = xi_matrix(cov.kappa_x, cov.kappa_m, cov.kappa_xm, th.sigma2, th.tau2) / nd;
  const Matrix s_inv = checked_inverse(S, "S");
  const Eigen::Index sw = data.s();
  cov.theta_cov = Matrix::Zero(2 * sw, 2 * sw);
  cov.theta_cov.topLeftCorner(sw, sw) = th.sigma2 * s_inv / nd;
  cov.theta_cov.bottomRightCorner(sw, sw) = th.tau2 * s_inv / nd;
  cov.sigma2_ab = ie_variance(cov, th) / nd;
  return cov;
}

double ie_variance(const AsymptoticCovariances& cov, const ParameterSet& th) {
  const double det = cov.kappa_x * cov.kappa_m - cov.kappa_xm * cov.kappa_xm;
  if (!(det > 0.0) || !(cov.kappa_x > 0.0)) {
    std::ostringstream msg;
    msg << "kappa_x*kappa_m - kappa_xm^2 = " << det;
    throw Error(ErrorCode::kDegenerateScoreCollinearity, msg.str());
  }
  return th.beta * th.beta * cov.sigma2 / cov.kappa_x +
         th.alpha * th.alpha * cov.tau2 * cov.kappa_x / det;
}

}  // namespace pcma
