#include "pcma/sequential.hpp"

#include <cmath>

#include "gtest/gtest.h"
#include "test_util.hpp"

namespace pcma {
namespace {

using testing_util::gaussian;
using testing_util::random_data;
using testing_util::unit;

int numerical_rank(const Matrix& a, double tol = 1e-8) {
  Eigen::JacobiSVD<Matrix> svd(a);
  const Vector sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  return static_cast<int>((sv.array() > tol * sv(0)).count());
}

MediationComponent arbitrary_component(Eigen::Index p, Eigen::Index q, std::uint64_t seed) {
  Engine eng(seed);
  ParameterSet th;
  th.phi = unit(p, eng);
  th.psi = unit(q, eng);
  th.alpha = 0.7;
  th.beta = -1.2;
  th.gamma = 0.4;
  return MediationComponent::from_params(th, 0.0, 0, true);
}

DataSet centered(std::uint64_t seed, Eigen::Index n = 200, Eigen::Index p = 5,
                 Eigen::Index q = 6) {
  return standardize(random_data(n, p, q, seed), true, true).data;
}

InferenceConfig quick_bootstrap() {
  InferenceConfig c;
  c.n_boot = 200;
  c.seed = 11;
  return c;
}

SequenceOptions exhaustive_untested() {
  SequenceOptions o;
  o.exhaustive = true;
  o.test_significance = false;
  return o;
}

TEST(Deflate, AnnihilatesExtractedDirections) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const DataSet d = random_data(40, 4, 5, seed);
    const auto c = arbitrary_component(4, 5, 100 + seed);
    const DeflationState st = deflate(DeflationState::initial(d), c);
    EXPECT_LE((st.X * c.params.phi).norm(), 1e-10 * d.X.norm());
    EXPECT_LE((st.M * c.params.psi).norm(), 1e-10 * d.M.norm());
    EXPECT_EQ(st.W, d.W);
    EXPECT_EQ(st.k, 1);
  }
}

TEST(Deflate, OutcomeRemovesBothScoreTerms) {
  const DataSet d = random_data(30, 3, 3, 5);
  const auto c = arbitrary_component(3, 3, 6);
  const DeflationState st = deflate(DeflationState::initial(d), c);
  const Vector expected =
      d.Y - c.params.gamma * (d.X * c.params.phi) - c.params.beta * (d.M * c.params.psi);
  EXPECT_LE((st.Y - expected).norm(), 1e-12 * d.Y.norm());
}

// Deflating twice by the same direction changes nothing for X and M.
TEST(Deflate, IdempotentOnExposuresAndMediators) {
  const DataSet d = random_data(30, 4, 4, 7);
  const auto c = arbitrary_component(4, 4, 8);
  const DeflationState once = deflate(DeflationState::initial(d), c);
  const DeflationState twice = deflate(once, c);
  EXPECT_LE((twice.X - once.X).norm(), 1e-10 * d.X.norm());
  EXPECT_LE((twice.M - once.M).norm(), 1e-10 * d.M.norm());
}

TEST(Deflate, DropsRankByOne) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const DataSet d = random_data(50, 5, 7, 20 + seed);
    const auto c = arbitrary_component(5, 7, 40 + seed);
    const DeflationState st = deflate(DeflationState::initial(d), c);
    EXPECT_EQ(numerical_rank(st.X), numerical_rank(d.X) - 1);
    EXPECT_EQ(numerical_rank(st.M), numerical_rank(d.M) - 1);
  }
}

TEST(Deflate, RejectsMismatchedComponent) {
  const DataSet d = random_data(30, 4, 4, 7);
  try {
    deflate(DeflationState::initial(d), arbitrary_component(3, 4, 1));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

// Property: extracted projections are mutually orthogonal.
TEST(FitSequence, ProjectionsAreOrthonormal) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const DataSet d = centered(60 + seed);
    const SequenceResult r = fit_sequence(d, 5, FitConfig{}, {}, exhaustive_untested());
    ASSERT_EQ(r.sequence.components.size(), 5u);
    const Matrix& P = r.sequence.phi_matrix;
    const Matrix& Q = r.sequence.psi_matrix;
    EXPECT_LE((P.transpose() * P - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LE((Q.transpose() * Q - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-8);
  }
}

// The stored step data is what each component was fitted on: refitting
// reproduces the component.
TEST(FitSequence, RefitOnStepDataReproducesComponent) {
  const DataSet d = centered(3);
  const SequenceResult r = fit_sequence(d, 3, FitConfig{}, {}, exhaustive_untested());
  ASSERT_EQ(r.step_data.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    FitConfig cfg;
    cfg.fixed_phi = r.tests[k].component.params.phi;
    cfg.fixed_psi = r.tests[k].component.params.psi;
    const auto& ref = r.tests[k].component.params;
    const auto& again = fit_component(r.step_data[k], cfg).component.params;
    EXPECT_NEAR(again.alpha, ref.alpha, 1e-9);
    EXPECT_NEAR(again.beta, ref.beta, 1e-9);
    EXPECT_NEAR(again.gamma, ref.gamma, 1e-9);
  }
}

TEST(FitSequence, FirstComponentEqualsSingleFit) {
  const DataSet d = centered(4);
  const SequenceResult r = fit_sequence(d, 2, FitConfig{}, {}, exhaustive_untested());
  const FitResult single = fit_component(d);
  EXPECT_EQ(r.tests[0].component.params.phi, single.component.params.phi);
  EXPECT_EQ(r.tests[0].component.objective, single.component.objective);
}

TEST(FitSequence, StopsAtFirstNonSignificantComponent) {
  // one planted path; the second component should carry no indirect effect
  const DataSet d = centered(9, 400, 4, 4);
  const SequenceResult r = fit_sequence(d, 4, FitConfig{}, quick_bootstrap());
  ASSERT_GE(r.tests.size(), 1u);
  EXPECT_TRUE(r.tests[0].significant);
  EXPECT_EQ(r.sequence.components.size(), r.tests.size() - (r.tests.back().significant ? 0 : 1));
  for (std::size_t k = 0; k + 1 < r.tests.size(); ++k) EXPECT_TRUE(r.tests[k].significant);
}

TEST(FitSequence, NoMediatorOutcomeLinkGivesNoComponents) {
  Engine eng(12);
  DataSet d;
  d.X = gaussian(300, 3, eng);
  d.M = gaussian(300, 3, eng) + d.X * gaussian(3, 3, eng);
  d.W = Matrix::Ones(300, 1);
  d.Y = d.X.col(0) + gaussian(300, 1, eng).col(0);  // β = 0 for every ψ
  d = standardize(d, true, true).data;
  const SequenceResult r = fit_sequence(d, 3, FitConfig{}, quick_bootstrap());
  EXPECT_EQ(r.sequence.components.size(), 0u);
  ASSERT_EQ(r.tests.size(), 1u);
  EXPECT_FALSE(r.tests[0].significant);
}

TEST(FitSequence, ZeroAndCappedComponentCounts) {
  const DataSet d = centered(5, 100, 2, 3);
  const SequenceResult none = fit_sequence(d, 0, FitConfig{}, {});
  EXPECT_EQ(none.sequence.components.size(), 0u);
  EXPECT_TRUE(none.tests.empty());
  EXPECT_EQ(none.sequence.phi_matrix.rows(), 2);

  const SequenceResult one = fit_sequence(d, 1, FitConfig{}, {}, exhaustive_untested());
  EXPECT_EQ(one.tests.size(), 1u);

  try {
    fit_sequence(d, 3, FitConfig{}, {});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
  }
}

// The last admissible component leaves a one-dimensional space for φ.
TEST(FitSequence, FullDepthWhenDimensionsAreSmall) {
  const DataSet d = centered(6, 100, 3, 3);
  const SequenceResult r = fit_sequence(d, 3, FitConfig{}, {}, exhaustive_untested());
  ASSERT_EQ(r.sequence.components.size(), 3u);
  const Matrix& P = r.sequence.phi_matrix;
  EXPECT_LE((P.transpose() * P - Matrix::Identity(3, 3)).norm(), 1e-8);
}

}  // namespace
}  // namespace pcma
