#include "pcma/model.hpp"

#include <cmath>
#include <string>

#include "gtest/gtest.h"
#include "pcma/solver.hpp"
#include "test_util.hpp"

namespace pcma {
namespace {

using testing_util::random_data;

template <class Fn>
std::string failure(Fn&& fn, ErrorCode expected) {
  try {
    fn();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), expected) << e.what();
    return e.what();
  }
  ADD_FAILURE() << "no pcma::Error thrown";
  return {};
}

DataSet minimal(Eigen::Index n_m = 5) {
  DataSet d;
  d.X = Matrix::Random(5, 2);
  d.M = Matrix::Random(n_m, 3);
  d.W = Matrix::Ones(5, 1);
  d.Y = Vector::Random(5);
  return d;
}

TEST(Validate, AcceptsMinimalWellFormedInput) {
  const DataSet d = minimal();
  EXPECT_EQ(&validate(d), &d);
}

TEST(Validate, RejectsRowCountMismatch) {
  const DataSet d = minimal(4);
  const auto msg = failure([&] { validate(d); }, ErrorCode::kDimensionMismatch);
  EXPECT_NE(msg.find("M"), std::string::npos);
}

TEST(Validate, RejectsMissingIntercept) {
  DataSet d = minimal();
  d.W.col(0) << 1, 1, 0, 1, 1;
  const auto msg = failure([&] { validate(d); }, ErrorCode::kMissingInterceptColumn);
  EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
}

TEST(Validate, RejectsNonFiniteEntryAndNamesIt) {
  DataSet d = minimal();
  d.X(3, 1) = std::nan("");
  const auto msg = failure([&] { validate(d); }, ErrorCode::kNonFiniteEntry);
  EXPECT_NE(msg.find("block X"), std::string::npos) << msg;
  EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
}

TEST(Validate, RejectsSingleRowAndEmptyBlocks) {
  DataSet d = minimal();
  d.M.resize(5, 0);
  failure([&] { validate(d); }, ErrorCode::kDimensionMismatch);

  DataSet one;
  one.X = Matrix::Ones(1, 1);
  one.M = Matrix::Ones(1, 1);
  one.W = Matrix::Ones(1, 1);
  one.Y = Vector::Ones(1);
  failure([&] { validate(one); }, ErrorCode::kDimensionMismatch);
}

TEST(Standardize, CentersAndScalesColumn) {
  DataSet d;
  d.X = (Matrix(3, 1) << 1, 2, 3).finished();
  d.M = (Matrix(3, 1) << 2, 4, 9).finished();
  d.W = Matrix::Ones(3, 1);
  d.Y = (Vector(3) << 0, 1, 5).finished();
  const Standardized st = standardize(d, true, true);
  EXPECT_NEAR(st.data.X(0, 0), -1.0, 1e-15);
  EXPECT_NEAR(st.data.X(1, 0), 0.0, 1e-15);
  EXPECT_NEAR(st.data.X(2, 0), 1.0, 1e-15);
  EXPECT_EQ(st.data.W, d.W);
}

TEST(Standardize, IdentityWhenDisabled) {
  const DataSet d = random_data(20, 3, 2, 7, 1);
  const Standardized st = standardize(d, false, false);
  EXPECT_EQ(st.data.X, d.X);
  EXPECT_EQ(st.data.M, d.M);
  EXPECT_EQ(st.data.Y, d.Y);
  EXPECT_EQ(st.data.W, d.W);
  EXPECT_TRUE((st.record.x_mean.array() == 0.0).all());
  EXPECT_TRUE((st.record.x_scale.array() == 1.0).all());
  EXPECT_TRUE((st.record.m_scale.array() == 1.0).all());
  EXPECT_EQ(st.record.y_mean, 0.0);
  EXPECT_EQ(st.record.y_scale, 1.0);
}

TEST(Standardize, ConstantColumnIsReported) {
  DataSet d = random_data(3, 2, 2, 1);
  d.M.col(1).setConstant(5.0);
  const auto msg = failure([&] { standardize(d, true, true); }, ErrorCode::kZeroVarianceColumn);
  EXPECT_NE(msg.find("column 1"), std::string::npos) << msg;
}

TEST(Standardize, CentersCovariatesButNotIntercept) {
  const DataSet d = random_data(40, 3, 2, 3, 2);
  const Standardized st = standardize(d, true, true);
  EXPECT_TRUE((st.data.W.col(0).array() == 1.0).all());
  for (Eigen::Index j = 1; j < d.s(); ++j) {
    EXPECT_NEAR(st.data.W.col(j).mean(), 0.0, 1e-14);
    EXPECT_NEAR(st.data.W(0, j) - st.data.W(1, j), d.W(0, j) - d.W(1, j), 1e-14);
  }
  for (Eigen::Index j = 0; j < d.p(); ++j) {
    const Vector c = st.data.X.col(j);
    EXPECT_NEAR(c.mean(), 0.0, 1e-14);
    EXPECT_NEAR(c.squaredNorm() / (d.n() - 1), 1.0, 1e-12);
  }
}

// Property: back-transformation recovers the data.
TEST(Standardize, RestoreRoundTrip) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const DataSet d = random_data(30, 4, 3, seed, 1);
    for (bool center : {false, true})
      for (bool scale : {false, true}) {
        const Standardized st = standardize(d, center, scale);
        const DataSet back = restore(st.data, st.record);
        EXPECT_LE((back.X - d.X).norm(), 1e-12 * d.X.norm());
        EXPECT_LE((back.M - d.M).norm(), 1e-12 * d.M.norm());
        EXPECT_LE((back.Y - d.Y).norm(), 1e-12 * d.Y.norm());
        EXPECT_LE((back.W - d.W).norm(), 1e-12 * d.W.norm());
      }
  }
}

TEST(Residualize, RemovesCovariateSpan) {
  const DataSet d = random_data(50, 3, 2, 11, 2);
  const DataSet r = residualize_on_covariates(d);
  EXPECT_EQ(r.s(), 1);
  EXPECT_LE((d.W.transpose() * r.X).norm(), 1e-10);
  EXPECT_LE((d.W.transpose() * r.M).norm(), 1e-10);
  EXPECT_LE((d.W.transpose() * r.Y).norm(), 1e-10);
}

ParameterSet with_coefficients(double a, double b, double g) {
  ParameterSet th;
  th.alpha = a;
  th.beta = b;
  th.gamma = g;
  return th;
}

TEST(Effects, FirstSimulatedPath) {
  const Effects e = effects(with_coefficients(2, 2, 1));
  EXPECT_EQ(e.de, 1.0);
  EXPECT_EQ(e.ie, 4.0);
  EXPECT_EQ(e.te, 5.0);
}

TEST(Effects, SecondSimulatedPath) {
  const Effects e = effects(with_coefficients(2, 1, -1));
  EXPECT_EQ(e.de, -1.0);
  EXPECT_EQ(e.ie, 2.0);
  EXPECT_EQ(e.te, 1.0);
}

TEST(Effects, ZeroBetaKillsIndirectEffect) {
  const Effects e = effects(with_coefficients(3.7, 0.0, -0.4));
  EXPECT_EQ(e.ie, 0.0);
  EXPECT_EQ(e.te, -0.4);
}

// Flipping φ negates (α, γ); flipping ψ negates (α, β).
TEST(Effects, SignFlipProperties) {
  Engine eng(5);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int i = 0; i < 100; ++i) {
    const ParameterSet th = with_coefficients(u(eng), u(eng), u(eng));
    const Effects e = effects(th);
    const Effects ephi = effects(with_coefficients(-th.alpha, th.beta, -th.gamma));
    EXPECT_EQ(ephi.ie, -e.ie);
    EXPECT_EQ(ephi.de, -e.de);
    EXPECT_EQ(std::abs(ephi.ie), std::abs(e.ie));
    const Effects epsi = effects(with_coefficients(-th.alpha, -th.beta, th.gamma));
    EXPECT_EQ(epsi.ie, e.ie);
    EXPECT_EQ(epsi.de, e.de);
    EXPECT_EQ(epsi.te, e.te);
  }
}

TEST(MediationComponent, EffectsByConstruction) {
  ParameterSet th = with_coefficients(1.3, -0.7, 0.2);
  const auto c = MediationComponent::from_params(th, 1.0, 3, true);
  EXPECT_EQ(c.de, th.gamma);
  EXPECT_EQ(c.ie, th.alpha * th.beta);
  EXPECT_EQ(c.te, c.de + c.ie);
}

TEST(CanonicalSigns, MaxMagnitudeEntryBecomesPositive) {
  ParameterSet th = with_coefficients(1.0, 2.0, 3.0);
  th.phi = (Vector(3) << 0.1, -0.9, 0.3).finished().normalized();
  th.psi = (Vector(2) << -0.6, 0.6).finished().normalized();  // tie: lowest index
  canonicalize_signs(th);
  EXPECT_GT(th.phi(1), 0.0);
  EXPECT_GT(th.psi(0), 0.0);
  // both flips applied: α twice, β once, γ once
  EXPECT_EQ(th.alpha, 1.0);
  EXPECT_EQ(th.beta, -2.0);
  EXPECT_EQ(th.gamma, -3.0);
}

// Property: canonicalization never changes the likelihood.
TEST(CanonicalSigns, LikelihoodInvariant) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Engine eng(seed);
    const DataSet d = random_data(25, 3, 4, 100 + seed, 1);
    ParameterSet th = testing_util::random_params(3, 4, 2, eng);
    if (seed % 2) th.psi = -th.psi;
    if (seed % 3) th.phi = -th.phi;
    const double before = negative_log_likelihood(d, th);
    canonicalize_signs(th);
    EXPECT_NEAR(negative_log_likelihood(d, th), before, 1e-12 * std::abs(before));
  }
}

TEST(ComponentSequence, StacksProjections) {
  std::vector<MediationComponent> cs(2);
  cs[0].params.phi = Vector::Unit(3, 0);
  cs[0].params.psi = Vector::Unit(2, 1);
  cs[1].params.phi = Vector::Unit(3, 2);
  cs[1].params.psi = Vector::Unit(2, 0);
  const auto seq = ComponentSequence::from_components(cs, 3, 2);
  EXPECT_EQ(seq.phi_matrix.cols(), 2);
  EXPECT_EQ(seq.phi_matrix.col(1), cs[1].params.phi);
  EXPECT_EQ(seq.psi_matrix.col(0), cs[0].params.psi);

  const auto empty = ComponentSequence::from_components({}, 3, 2);
  EXPECT_EQ(empty.phi_matrix.rows(), 3);
  EXPECT_EQ(empty.phi_matrix.cols(), 0);
}

}  // namespace
}  // namespace pcma
