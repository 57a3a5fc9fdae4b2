#include "pcma/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pcma/rng.hpp"

namespace pcma {

namespace {

struct Residuals {
  Vector mediator;  // Mψ − Xφα − Wθ₁
  Vector outcome;   // Y − Xφγ − Mψβ − Wθ₂
};

Residuals residuals(const DataSet& d, const ParameterSet& th) {
  const Vector t = d.X * th.phi;
  const Vector s = d.M * th.psi;
  Residuals r;
  r.mediator = s - th.alpha * t - d.W * th.theta1;
  r.outcome = d.Y - th.gamma * t - th.beta * s - d.W * th.theta2;
  return r;
}

void check_variances(const ParameterSet& th) {
  if (!(th.sigma2 > 0.0) || !(th.tau2 > 0.0)) {
    std::ostringstream msg;
    msg << "sigma2=" << th.sigma2 << ", tau2=" << th.tau2;
    throw Error(ErrorCode::kNonPositiveVariance, msg.str());
  }
}

bool is_unit(const Vector& v) { return std::abs(v.norm() - 1.0) <= 1e-10; }

}  // namespace

void FitConfig::validate(Eigen::Index p, Eigen::Index q) const {
  if (max_sweeps < 1)
    throw Error(ErrorCode::kInvalidArgument, "max_sweeps must be >= 1");
  if (!(rel_tol > 0.0) || !(lambda_tol > 0.0) || !(kkt_tol > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "tolerances must be positive");
  if (fixed_phi && (fixed_phi->size() != p || !is_unit(*fixed_phi)))
    throw Error(ErrorCode::kInvalidArgument, "fixed_phi must be a unit vector of length p");
  if (fixed_psi && (fixed_psi->size() != q || !is_unit(*fixed_psi)))
    throw Error(ErrorCode::kInvalidArgument, "fixed_psi must be a unit vector of length q");
  if (exclude_phi.size() > 0 && (exclude_phi.rows() != p || exclude_phi.cols() >= p))
    throw Error(ErrorCode::kInvalidArgument, "exclude_phi must be p×k with k < p");
  if (exclude_psi.size() > 0 && (exclude_psi.rows() != q || exclude_psi.cols() >= q))
    throw Error(ErrorCode::kInvalidArgument, "exclude_psi must be q×k with k < q");
  if (const auto* s = std::get_if<InitSupplied>(&init)) {
    if (s->phi.size() != p || s->psi.size() != q)
      throw Error(ErrorCode::kInvalidArgument, "supplied initial projections have wrong length");
  }
}

double negative_log_likelihood(const DataSet& data, const ParameterSet& params) {
  check_variances(params);
  const Residuals r = residuals(data, params);
  const double n = static_cast<double>(data.n());
  return r.mediator.squaredNorm() / params.sigma2 +
         r.outcome.squaredNorm() / params.tau2 + n * std::log(params.sigma2) +
         n * std::log(params.tau2);
}

Gradient objective_gradient(const DataSet& data, const ParameterSet& th) {
  check_variances(th);
  const Residuals r = residuals(data, th);
  const Vector t = data.X * th.phi;
  const Vector s = data.M * th.psi;
  const double n = static_cast<double>(data.n());
  const double a = 2.0 / th.sigma2;
  const double b = 2.0 / th.tau2;
  Gradient g;
  g.phi = -a * th.alpha * (data.X.transpose() * r.mediator) -
          b * th.gamma * (data.X.transpose() * r.outcome);
  g.psi = a * (data.M.transpose() * r.mediator) -
          b * th.beta * (data.M.transpose() * r.outcome);
  g.alpha = -a * t.dot(r.mediator);
  g.beta = -b * s.dot(r.outcome);
  g.gamma = -b * t.dot(r.outcome);
  g.theta1 = -a * (data.W.transpose() * r.mediator);
  g.theta2 = -b * (data.W.transpose() * r.outcome);
  g.sigma2 = n / th.sigma2 - r.mediator.squaredNorm() / (th.sigma2 * th.sigma2);
  g.tau2 = n / th.tau2 - r.outcome.squaredNorm() / (th.tau2 * th.tau2);
  return g;
}

namespace {

double kkt_norm(const DataSet& data, const ParameterSet& th, bool free_phi,
                bool free_psi) {
  const Gradient g = objective_gradient(data, th);
  double sq = 0.0;
  if (free_phi) sq += (g.phi - th.phi.dot(g.phi) * th.phi).squaredNorm();
  if (free_psi) sq += (g.psi - th.psi.dot(g.psi) * th.psi).squaredNorm();
  sq += g.alpha * g.alpha + g.beta * g.beta + g.gamma * g.gamma;
  sq += g.theta1.squaredNorm() + g.theta2.squaredNorm();
  sq += g.sigma2 * g.sigma2 + g.tau2 * g.tau2;
  return std::sqrt(sq) / static_cast<double>(data.n());
}

}  // namespace

double kkt_residual(const DataSet& data, const ParameterSet& params) {
  return kkt_norm(data, params, true, true);
}

double secular_norm2(const Vector& d, const Vector& u, double lambda) {
  return (u.array() / (d.array() + lambda)).square().sum();
}

UnitSphereQuadratic::UnitSphereQuadratic(const Matrix& gram) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  evals_ = es.eigenvalues();
  evecs_ = es.eigenvectors();
}

std::optional<UnitSphereQuadratic::Solution> UnitSphereQuadratic::solve(
    double scale, const Vector& b, double tol) const {
  const Vector u = evecs_.transpose() * b;
  const double unorm = u.norm();
  if (!(unorm > 0.0)) return std::nullopt;

  // Shifted spectrum e_i = d_i − d_min ≥ 0; solve for μ = λ + d_min > 0.
  const Eigen::Index k = u.size();
  const double d_min = scale * evals_(0);
  const Vector e = (scale * (evals_.array() - evals_(0))).matrix();
  const double eig_tol = 1e-12 * std::max(1.0, std::abs(scale * evals_(k - 1)));

  double u_min2 = 0.0;
  double g_rest = 0.0;
  Eigen::Index first_min = 0;
  for (Eigen::Index i = 0; i < k; ++i) {
    if (e(i) <= eig_tol) {
      u_min2 += u(i) * u(i);
    } else {
      g_rest += u(i) * u(i) / (e(i) * e(i));
    }
  }

  Solution sol;
  Vector coords(k);
  if (u_min2 <= 1e-26 * unorm * unorm && g_rest <= 1.0) {
    // Hard case: b has no weight on the minimal eigenspace and the rest of
    // the spectrum cannot reach the sphere; fill up with the minimal
    // eigenvector.
    for (Eigen::Index i = 0; i < k; ++i) coords(i) = e(i) <= eig_tol ? 0.0 : u(i) / e(i);
    coords(first_min) = std::sqrt(std::max(0.0, 1.0 - g_rest));
    sol.x = evecs_ * coords;
    sol.lambda = -d_min;
    sol.hard_case = true;
    sol.residual = std::abs(coords.squaredNorm() - 1.0);
    return sol;
  }

  auto g_of = [&](double mu) { return secular_norm2(e, u, mu); };

  double lo = 0.0;
  double hi = std::max(unorm, unorm + d_min) + d_min;  // μ for λ = max(‖U‖, ‖U‖ − d_min)
  if (!(hi > 0.0)) hi = unorm;
  while (g_of(hi) >= 1.0) hi *= 2.0;

  double mu = hi;
  double g = g_of(mu);
  for (int it = 0; it < 500; ++it) {
    if (std::abs(g - 1.0) <= tol) break;
    if (g > 1.0)
      lo = mu;
    else
      hi = mu;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
    // Newton on h(μ) = g^{-1/2} − 1, which is nearly linear in μ.
    const double h = 1.0 / std::sqrt(g) - 1.0;
    const double dg3 = (u.array().square() / (e.array() + mu).cube()).sum();
    const double dh = dg3 / (g * std::sqrt(g));
    double next = mu - h / dh;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    mu = next;
    g = g_of(mu);
  }

  coords = (u.array() / (e.array() + mu)).matrix();
  sol.residual = std::abs(g - 1.0);
  sol.lambda = mu - d_min;
  sol.x = evecs_ * coords;
  sol.x.normalize();
  return sol;
}

Vector phi_rhs(const DataSet& d, const ParameterSet& th) {
  const double a = th.alpha / th.sigma2 - th.beta * th.gamma / th.tau2;
  const Vector inner = a * (d.M * th.psi) + (th.gamma / th.tau2) * d.Y -
                       (th.alpha / th.sigma2) * (d.W * th.theta1) -
                       (th.gamma / th.tau2) * (d.W * th.theta2);
  return d.X.transpose() * inner;
}

Vector psi_rhs(const DataSet& d, const ParameterSet& th) {
  const double a = th.alpha / th.sigma2 - th.beta * th.gamma / th.tau2;
  const Vector inner = a * (d.X * th.phi) + (th.beta / th.tau2) * d.Y +
                       (1.0 / th.sigma2) * (d.W * th.theta1) -
                       (th.beta / th.tau2) * (d.W * th.theta2);
  return d.M.transpose() * inner;
}

namespace {

ProjectionUpdate projection_step(const UnitSphereQuadratic& sq, const Matrix& gram,
                                 double scale, const Vector& rhs,
                                 const Vector& previous, double tol) {
  ProjectionUpdate up;
  if (auto sol = sq.solve(scale, rhs, tol)) {
    up.direction = std::move(sol->x);
    up.lambda = sol->lambda;
    up.hard_case = sol->hard_case;
  } else {
    up.direction = previous;
    up.lambda = previous.dot(rhs) - scale * previous.dot(gram * previous);
    up.degenerate = true;
  }
  return up;
}

double phi_scale(const ParameterSet& th) {
  return th.alpha * th.alpha / th.sigma2 + th.gamma * th.gamma / th.tau2;
}

double psi_scale(const ParameterSet& th) {
  return 1.0 / th.sigma2 + th.beta * th.beta / th.tau2;
}

}  // namespace

ProjectionUpdate update_phi(const DataSet& data, const ParameterSet& params,
                            double lambda_tol) {
  check_variances(params);
  const Matrix gram = data.X.transpose() * data.X;
  const UnitSphereQuadratic sq(gram);
  return projection_step(sq, gram, phi_scale(params), phi_rhs(data, params),
                         params.phi, lambda_tol);
}

ProjectionUpdate update_psi(const DataSet& data, const ParameterSet& params,
                            double lambda_tol) {
  check_variances(params);
  const Matrix gram = data.M.transpose() * data.M;
  const UnitSphereQuadratic sq(gram);
  return projection_step(sq, gram, psi_scale(params), psi_rhs(data, params),
                         params.psi, lambda_tol);
}

namespace {

Vector least_squares(const Matrix& design, const Vector& response, const char* what) {
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < design.cols()) {
    std::ostringstream msg;
    msg << what << " design has rank " << qr.rank() << " < " << design.cols();
    throw Error(ErrorCode::kRankDeficientDesign, msg.str());
  }
  return qr.solve(response);
}

}  // namespace

Coefficients fit_score_coefficients(const Vector& t, const Vector& s,
                                    const Matrix& W, const Vector& Y) {
  const Eigen::Index n = t.size();
  const Eigen::Index sw = W.cols();
  Matrix d1(n, 1 + sw);
  d1 << t, W;
  Matrix d2(n, 2 + sw);
  d2 << s, t, W;
  const Vector c1 = least_squares(d1, s, "[Xphi, W]");
  const Vector c2 = least_squares(d2, Y, "[Mpsi, Xphi, W]");
  Coefficients c;
  c.alpha = c1(0);
  c.theta1 = c1.tail(sw);
  c.beta = c2(0);
  c.gamma = c2(1);
  c.theta2 = c2.tail(sw);
  return c;
}

Coefficients update_coefficients(const DataSet& data, const ParameterSet& params) {
  return fit_score_coefficients(data.X * params.phi, data.M * params.psi, data.W,
                                data.Y);
}

Variances update_variances(const DataSet& data, const ParameterSet& params) {
  const Residuals r = residuals(data, params);
  const double n = static_cast<double>(data.n());
  Variances v;
  v.sigma2 = r.mediator.squaredNorm() / n;
  v.tau2 = r.outcome.squaredNorm() / n;
  if (v.sigma2 < kVarianceFloor) {
    v.sigma2 = kVarianceFloor;
    v.perfect_fit = true;
  }
  if (v.tau2 < kVarianceFloor) {
    v.tau2 = kVarianceFloor;
    v.perfect_fit = true;
  }
  return v;
}

Matrix complement_basis(const Matrix& basis, Eigen::Index dim) {
  if (basis.cols() == 0) return Matrix::Identity(dim, dim);
  Eigen::HouseholderQR<Matrix> qr(basis);
  const Matrix q = qr.householderQ() * Matrix::Identity(dim, dim);
  return q.rightCols(dim - basis.cols());
}

namespace {

void apply(ParameterSet& th, const Coefficients& c) {
  th.alpha = c.alpha;
  th.beta = c.beta;
  th.gamma = c.gamma;
  th.theta1 = c.theta1;
  th.theta2 = c.theta2;
}

Vector leading_direction(const Matrix& cross, bool left) {
  Eigen::JacobiSVD<Matrix> svd(cross, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::Index dim = left ? cross.rows() : cross.cols();
  if (svd.singularValues().size() == 0 || !(svd.singularValues()(0) > 0.0))
    return Vector::Unit(dim, 0);
  return left ? Vector(svd.matrixU().col(0)) : Vector(svd.matrixV().col(0));
}

Vector random_unit(Engine& eng, Eigen::Index dim) {
  std::normal_distribution<double> normal;
  Vector v(dim);
  do {
    for (Eigen::Index i = 0; i < dim; ++i) v(i) = normal(eng);
  } while (!(v.norm() > 0.0));
  return v.normalized();
}

Vector reduce_direction(const Matrix& basis, const Vector& v) {
  Vector z = basis.transpose() * v;
  if (!(z.norm() > 0.0))
    throw Error(ErrorCode::kInvalidArgument,
                "initial projection lies in the excluded subspace");
  return z.normalized();
}

}  // namespace

FitResult fit_component(const DataSet& data, const FitConfig& config) {
  validate(data);
  config.validate(data.p(), data.q());

  const bool free_phi = !config.fixed_phi.has_value();
  const bool free_psi = !config.fixed_psi.has_value();
  const bool reduce_x = free_phi && config.exclude_phi.cols() > 0;
  const bool reduce_m = free_psi && config.exclude_psi.cols() > 0;
  const Matrix basis_x = reduce_x ? complement_basis(config.exclude_phi, data.p())
                                  : Matrix::Identity(data.p(), data.p());
  const Matrix basis_m = reduce_m ? complement_basis(config.exclude_psi, data.q())
                                  : Matrix::Identity(data.q(), data.q());

  DataSet work;
  work.X = reduce_x ? Matrix(data.X * basis_x) : data.X;
  work.M = reduce_m ? Matrix(data.M * basis_m) : data.M;
  work.W = data.W;
  work.Y = data.Y;

  ParameterSet th;
  if (const auto* s = std::get_if<InitSupplied>(&config.init)) {
    th.phi = reduce_direction(basis_x, s->phi);
    th.psi = reduce_direction(basis_m, s->psi);
  } else if (const auto* r = std::get_if<InitRandom>(&config.init)) {
    Engine eng = make_engine(r->seed, {0});
    th.phi = random_unit(eng, work.p());
    th.psi = random_unit(eng, work.q());
  } else {
    const Matrix cross = work.X.transpose() * work.M;
    th.phi = leading_direction(cross, true);
    th.psi = leading_direction(cross, false);
  }
  if (!free_phi) th.phi = *config.fixed_phi;
  if (!free_psi) th.psi = *config.fixed_psi;

  FitTrace trace;
  apply(th, update_coefficients(work, th));
  {
    const Variances v = update_variances(work, th);
    th.sigma2 = v.sigma2;
    th.tau2 = v.tau2;
    trace.perfect_fit = v.perfect_fit;
  }
  double obj = negative_log_likelihood(work, th);
  trace.objective_per_sweep.push_back(obj);

  const Matrix gram_x = work.X.transpose() * work.X;
  const Matrix gram_m = work.M.transpose() * work.M;
  const UnitSphereQuadratic sphere_x(gram_x);
  const UnitSphereQuadratic sphere_m(gram_m);

  bool converged = false;
  int sweep = 0;
  while (sweep < config.max_sweeps) {
    ++sweep;
    if (free_phi) {
      const ProjectionUpdate up = projection_step(
          sphere_x, gram_x, phi_scale(th), phi_rhs(work, th), th.phi, config.lambda_tol);
      th.phi = up.direction;
      trace.lambda1 = up.lambda;
      trace.degenerate_updates += up.degenerate;
    }
    if (free_psi) {
      const ProjectionUpdate up = projection_step(
          sphere_m, gram_m, psi_scale(th), psi_rhs(work, th), th.psi, config.lambda_tol);
      th.psi = up.direction;
      trace.lambda2 = up.lambda;
      trace.degenerate_updates += up.degenerate;
    }
    apply(th, update_coefficients(work, th));
    const Variances v = update_variances(work, th);
    th.sigma2 = v.sigma2;
    th.tau2 = v.tau2;
    trace.perfect_fit = v.perfect_fit;

    const double next = negative_log_likelihood(work, th);
    trace.objective_per_sweep.push_back(next);
    const bool small_change =
        std::abs(obj - next) <= config.rel_tol * std::max(1.0, std::abs(next));
    obj = next;
    if (small_change) {
      trace.kkt_residual = kkt_norm(work, th, free_phi, free_psi);
      if (trace.kkt_residual <= config.kkt_tol) {
        converged = true;
        break;
      }
    }
  }
  trace.kkt_residual = kkt_norm(work, th, free_phi, free_psi);

  // Multipliers at the returned point, from the tangential decomposition.
  const Gradient g = objective_gradient(work, th);
  if (free_phi) trace.lambda1 = -0.5 * th.phi.dot(g.phi);
  if (free_psi) trace.lambda2 = -0.5 * th.psi.dot(g.psi);

  if (reduce_x) th.phi = basis_x * th.phi;
  if (reduce_m) th.psi = basis_m * th.psi;
  canonicalize_signs(th);
  return {MediationComponent::from_params(std::move(th), obj, sweep, converged),
          std::move(trace)};
}

}  // namespace pcma
