#include "pcma/model.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace pcma {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kNonFiniteEntry: return "non-finite-entry";
    case ErrorCode::kMissingInterceptColumn: return "missing-intercept-column";
    case ErrorCode::kZeroVarianceColumn: return "zero-variance-column";
    case ErrorCode::kNonPositiveVariance: return "non-positive-variance";
    case ErrorCode::kRankDeficientDesign: return "rank-deficient-design";
    case ErrorCode::kResampleDegenerate: return "resample-degenerate";
    case ErrorCode::kSingularInformation: return "singular-information";
    case ErrorCode::kDegenerateScoreCollinearity: return "degenerate-score-collinearity";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kParseError: return "parse-error";
    case ErrorCode::kIoError: return "io-error";
  }
  return "unknown";
}

DataSet DataSet::with_intercept(Matrix x, Matrix m, Vector y) {
  DataSet d;
  d.W = Matrix::Ones(y.size(), 1);
  d.X = std::move(x);
  d.M = std::move(m);
  d.Y = std::move(y);
  return d;
}

namespace {

void check_finite(const Matrix& block, const char* name) {
  for (Eigen::Index j = 0; j < block.cols(); ++j)
    for (Eigen::Index i = 0; i < block.rows(); ++i)
      if (!std::isfinite(block(i, j))) {
        std::ostringstream msg;
        msg << "block " << name << " has a non-finite entry at row " << i
            << ", column " << j;
        throw Error(ErrorCode::kNonFiniteEntry, msg.str());
      }
}

void check_rows(Eigen::Index rows, Eigen::Index n, const char* name) {
  if (rows != n) {
    std::ostringstream msg;
    msg << "block " << name << " has " << rows << " rows, expected " << n
        << " (rows of Y)";
    throw Error(ErrorCode::kDimensionMismatch, msg.str());
  }
}

void check_cols(Eigen::Index cols, const char* name) {
  if (cols < 1)
    throw Error(ErrorCode::kDimensionMismatch,
                std::string("block ") + name + " has no columns");
}

}  // namespace

const DataSet& validate(const DataSet& data) {
  const Eigen::Index n = data.Y.size();
  if (n < 2)
    throw Error(ErrorCode::kDimensionMismatch, "block Y needs at least 2 rows");
  check_rows(data.X.rows(), n, "X");
  check_rows(data.M.rows(), n, "M");
  check_rows(data.W.rows(), n, "W");
  check_cols(data.X.cols(), "X");
  check_cols(data.M.cols(), "M");
  check_cols(data.W.cols(), "W");
  check_finite(data.X, "X");
  check_finite(data.M, "M");
  check_finite(data.W, "W");
  check_finite(data.Y, "Y");
  for (Eigen::Index i = 0; i < n; ++i)
    if (data.W(i, 0) != 1.0) {
      std::ostringstream msg;
      msg << "block W column 0 must be all ones; row " << i << " is "
          << data.W(i, 0);
      throw Error(ErrorCode::kMissingInterceptColumn, msg.str());
    }
  return data;
}

namespace {

double sample_sd(const Vector& centered) {
  return std::sqrt(centered.squaredNorm() / static_cast<double>(centered.size() - 1));
}

void standardize_block(Matrix& block, RowVector& mean, RowVector& scale,
                       bool center, bool do_scale, const char* name) {
  mean = RowVector::Zero(block.cols());
  scale = RowVector::Ones(block.cols());
  for (Eigen::Index j = 0; j < block.cols(); ++j) {
    const double mu = block.col(j).mean();
    Vector centered = block.col(j).array() - mu;
    if (do_scale) {
      const double sd = sample_sd(centered);
      if (!(sd > 0.0)) {
        std::ostringstream msg;
        msg << "block " << name << " column " << j << " is constant";
        throw Error(ErrorCode::kZeroVarianceColumn, msg.str());
      }
      scale(j) = sd;
    }
    if (center) mean(j) = mu;
    block.col(j) = (block.col(j).array() - mean(j)) / scale(j);
  }
}

}  // namespace

Standardized standardize(const DataSet& data, bool center, bool scale) {
  validate(data);
  Standardized out{data, {}};
  auto& rec = out.record;
  standardize_block(out.data.X, rec.x_mean, rec.x_scale, center, scale, "X");
  standardize_block(out.data.M, rec.m_mean, rec.m_scale, center, scale, "M");

  Matrix y = data.Y;
  RowVector y_mean, y_scale;
  standardize_block(y, y_mean, y_scale, center, scale, "Y");
  out.data.Y = y.col(0);
  rec.y_mean = y_mean(0);
  rec.y_scale = y_scale(0);

  rec.w_mean = RowVector::Zero(data.s());
  if (center)
    for (Eigen::Index j = 1; j < data.s(); ++j) {
      rec.w_mean(j) = data.W.col(j).mean();
      out.data.W.col(j).array() -= rec.w_mean(j);
    }
  return out;
}

DataSet restore(const DataSet& standardized, const StandardizationRecord& rec) {
  DataSet d = standardized;
  d.X = (d.X.array().rowwise() * rec.x_scale.array()).rowwise() + rec.x_mean.array();
  d.M = (d.M.array().rowwise() * rec.m_scale.array()).rowwise() + rec.m_mean.array();
  d.Y = d.Y.array() * rec.y_scale + rec.y_mean;
  d.W = d.W.rowwise() + rec.w_mean;
  return d;
}

DataSet residualize_on_covariates(const DataSet& data) {
  validate(data);
  Eigen::ColPivHouseholderQR<Matrix> qr(data.W);
  qr.setThreshold(1e-10);
  if (qr.rank() < data.s())
    throw Error(ErrorCode::kRankDeficientDesign, "covariate matrix W is rank deficient");
  DataSet d;
  d.X = data.X - data.W * qr.solve(data.X);
  d.M = data.M - data.W * qr.solve(data.M);
  d.Y = data.Y - data.W * qr.solve(data.Y);
  d.W = Matrix::Ones(data.n(), 1);
  return d;
}

Effects effects(const ParameterSet& params) {
  Effects e;
  e.de = params.gamma;
  e.ie = params.alpha * params.beta;
  e.te = e.de + e.ie;
  return e;
}

Eigen::Index max_abs_index(const Vector& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (std::abs(v(i)) > std::abs(v(best))) best = i;
  return best;
}

void canonicalize_signs(ParameterSet& params) {
  if (params.phi.size() > 0 && params.phi(max_abs_index(params.phi)) < 0.0) {
    params.phi = -params.phi;
    params.alpha = -params.alpha;
    params.gamma = -params.gamma;
  }
  if (params.psi.size() > 0 && params.psi(max_abs_index(params.psi)) < 0.0) {
    params.psi = -params.psi;
    params.alpha = -params.alpha;
    params.beta = -params.beta;
    params.theta1 = -params.theta1;  // intercept of the Mψ model
  }
}

MediationComponent MediationComponent::from_params(ParameterSet params,
                                                   double objective,
                                                   int iterations,
                                                   bool converged) {
  MediationComponent c;
  const Effects e = effects(params);
  c.params = std::move(params);
  c.de = e.de;
  c.ie = e.ie;
  c.te = e.te;
  c.objective = objective;
  c.iterations = iterations;
  c.converged = converged;
  return c;
}

ComponentSequence ComponentSequence::from_components(
    std::vector<MediationComponent> components, Eigen::Index p, Eigen::Index q) {
  ComponentSequence seq;
  const auto k = static_cast<Eigen::Index>(components.size());
  seq.phi_matrix.resize(p, k);
  seq.psi_matrix.resize(q, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    seq.phi_matrix.col(j) = components[j].params.phi;
    seq.psi_matrix.col(j) = components[j].params.psi;
  }
  seq.components = std::move(components);
  return seq;
}

}  // namespace pcma
