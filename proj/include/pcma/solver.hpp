#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "pcma/model.hpp"

namespace pcma {

struct InitSvd {};
struct InitRandom {
  std::uint64_t seed = 0;
};
struct InitSupplied {
  Vector phi;
  Vector psi;
};
using Initialization = std::variant<InitSvd, InitRandom, InitSupplied>;

struct FitConfig {
  int max_sweeps = 1000;
  double rel_tol = 1e-8;     // relative change of the objective
  double lambda_tol = 1e-12;  // |g(λ) − 1| for the multiplier root
  double kkt_tol = 1e-9;      // Lagrangian gradient of ℓ/n
  Initialization init = InitSvd{};
  std::optional<Vector> fixed_phi;
  std::optional<Vector> fixed_psi;
  // Orthonormal columns the projections must stay orthogonal to (p×k, q×k).
  // Empty means unrestricted.
  Matrix exclude_phi;
  Matrix exclude_psi;

  void validate(Eigen::Index p, Eigen::Index q) const;
};

struct FitTrace {
  std::vector<double> objective_per_sweep;  // entry 0 is the initial point
  double kkt_residual = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  int degenerate_updates = 0;
  bool perfect_fit = false;
};

struct FitResult {
  MediationComponent component;
  FitTrace trace;
};

/// ℓ(Θ) = ‖Mψ−Xφα−Wθ₁‖²/σ² + ‖Y−Xφγ−Mψβ−Wθ₂‖²/τ² + n log σ² + n log τ².
double negative_log_likelihood(const DataSet& data, const ParameterSet& params);

/// Analytic partial derivatives of negative_log_likelihood.
struct Gradient {
  Vector phi;
  Vector psi;
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  Vector theta1;
  Vector theta2;
  double sigma2 = 0.0;
  double tau2 = 0.0;
};
Gradient objective_gradient(const DataSet& data, const ParameterSet& params);

/// Norm of the Lagrangian gradient of ℓ/n at `params`: tangential parts for
/// φ and ψ (the multipliers are the least-squares ones) plus the full
/// gradient for the remaining blocks.
double kkt_residual(const DataSet& data, const ParameterSet& params);

// Minimizer of xᵀ(c·G)x − 2bᵀx over ‖x‖ = 1, i.e. the solution of
// (c·G + λI)x = b with λ ≥ −c·d_min. G is eigendecomposed once at
// construction and reused for every (c, b).
class UnitSphereQuadratic {
 public:
  struct Solution {
    Vector x;
    double lambda = 0.0;
    double residual = 0.0;  // |g(λ) − 1|
    bool hard_case = false;
  };

  explicit UnitSphereQuadratic(const Matrix& gram);

  // nullopt when b = 0 (no informative direction).
  std::optional<Solution> solve(double scale, const Vector& b, double tol) const;

  const Vector& eigenvalues() const { return evals_; }
  const Matrix& eigenvectors() const { return evecs_; }

 private:
  Vector evals_;  // ascending
  Matrix evecs_;
};

/// g(λ) = Σᵢ uᵢ²/(dᵢ+λ)².
double secular_norm2(const Vector& d, const Vector& u, double lambda);

struct ProjectionUpdate {
  Vector direction;
  double lambda = 0.0;
  bool degenerate = false;  // U (or V) vanished; previous direction kept
  bool hard_case = false;
};

ProjectionUpdate update_phi(const DataSet& data, const ParameterSet& params,
                            double lambda_tol = 1e-12);
ProjectionUpdate update_psi(const DataSet& data, const ParameterSet& params,
                            double lambda_tol = 1e-12);

/// Right-hand sides U and V of the φ and ψ stationarity equations.
Vector phi_rhs(const DataSet& data, const ParameterSet& params);
Vector psi_rhs(const DataSet& data, const ParameterSet& params);

struct Coefficients {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  Vector theta1;
  Vector theta2;
};

/// Joint least squares: (α, θ₁) from Mψ ~ [Xφ, W]; (β, γ, θ₂) from
/// Y ~ [Mψ, Xφ, W]. Throws kRankDeficientDesign.
Coefficients update_coefficients(const DataSet& data, const ParameterSet& params);

/// Same regressions on precomputed scores t = Xφ, s = Mψ.
Coefficients fit_score_coefficients(const Vector& t, const Vector& s,
                                    const Matrix& W, const Vector& Y);

struct Variances {
  double sigma2 = 0.0;
  double tau2 = 0.0;
  bool perfect_fit = false;
};

inline constexpr double kVarianceFloor = 1e-12;

/// Mean squared residuals of both models, floored at kVarianceFloor.
Variances update_variances(const DataSet& data, const ParameterSet& params);

/// Block coordinate descent: φ, ψ, coefficients, variances per sweep until
/// the relative objective change and the KKT residual are both small.
FitResult fit_component(const DataSet& data, const FitConfig& config = {});

/// Orthonormal basis of the orthogonal complement of span(basis) in R^dim.
Matrix complement_basis(const Matrix& basis, Eigen::Index dim);

}  // namespace pcma
