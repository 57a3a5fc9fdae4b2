#pragma once

#include <Eigen/Dense>
#include <vector>

#include "pcma/error.hpp"

namespace pcma {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Observed data for one analysis: exposures X (n×p), mediators M (n×q),
/// covariates W (n×s, first column the intercept) and outcome Y (n).
struct DataSet {
  Matrix X;
  Matrix M;
  Matrix W;
  Vector Y;

  Eigen::Index n() const { return Y.size(); }
  Eigen::Index p() const { return X.cols(); }
  Eigen::Index q() const { return M.cols(); }
  Eigen::Index s() const { return W.cols(); }

  /// Builds a dataset whose only covariate is the intercept.
  static DataSet with_intercept(Matrix x, Matrix m, Vector y);
};

/// Checks every DataSet invariant; returns the input unchanged on success and
/// throws pcma::Error naming the offending block and index otherwise.
const DataSet& validate(const DataSet& data);

/// Per-column location/scale used by standardize(). Intercept column of W
/// keeps mean 0 and scale 1.
struct StandardizationRecord {
  RowVector x_mean, x_scale;
  RowVector m_mean, m_scale;
  RowVector w_mean;
  double y_mean = 0.0;
  double y_scale = 1.0;
};

struct Standardized {
  DataSet data;
  StandardizationRecord record;
};

// Centers (and optionally scales to unit sample sd) the columns of X, M and Y.
// Non-intercept W columns are only centered.
Standardized standardize(const DataSet& data, bool center, bool scale);

/// Inverse of standardize().
DataSet restore(const DataSet& standardized, const StandardizationRecord& record);

/// Residualizes X, M and Y on W by least squares and returns the result with
/// an intercept-only W (covariate adjustment as a preprocessing step).
DataSet residualize_on_covariates(const DataSet& data);

/// One component's parameter tuple (φ, ψ, α, β, γ, θ₁, θ₂, σ², τ²).
struct ParameterSet {
  Vector phi;
  Vector psi;
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  Vector theta1;
  Vector theta2;
  double sigma2 = 1.0;
  double tau2 = 1.0;
};

struct Effects {
  double de = 0.0;
  double ie = 0.0;
  double te = 0.0;
};

/// DE = γ, IE = αβ, TE = DE + IE.
Effects effects(const ParameterSet& params);

/// Flips (φ, α, γ) and/or (ψ, α, β, θ₁) so that the largest-magnitude entry of
/// each projection is positive (lowest index wins ties). The likelihood is
/// invariant under both flips.
void canonicalize_signs(ParameterSet& params);

/// Index of the largest |v_i|, lowest index on ties.
Eigen::Index max_abs_index(const Vector& v);

struct MediationComponent {
  ParameterSet params;
  double de = 0.0;
  double ie = 0.0;
  double te = 0.0;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;

  static MediationComponent from_params(ParameterSet params, double objective,
                                        int iterations, bool converged);
};

struct ComponentSequence {
  std::vector<MediationComponent> components;
  Matrix phi_matrix;  // p×k
  Matrix psi_matrix;  // q×k

  static ComponentSequence from_components(std::vector<MediationComponent> components,
                                           Eigen::Index p, Eigen::Index q);
};

}  // namespace pcma
