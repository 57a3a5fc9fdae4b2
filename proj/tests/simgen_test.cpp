#include "pcma/simgen.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "gtest/gtest.h"

namespace pcma {
namespace {

SimScenario small_at(int n, std::uint64_t seed = 1) {
  ScenarioSpec spec = builtin_scenario("small");
  spec.n = n;
  return make_scenario(spec, seed);
}

TEST(ExponentialDecay, HalvingFromFour) {
  const Vector v = exponential_decay(4, 4.0, 0.5);
  EXPECT_EQ(v(0), 4.0);
  EXPECT_EQ(v(1), 2.0);
  EXPECT_EQ(v(3), 0.5);
}

TEST(RandomOrthonormal, OrthonormalAndSeeded) {
  const Matrix a = random_orthonormal(7, 3);
  EXPECT_LE((a.transpose() * a - Matrix::Identity(7, 7)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(a, random_orthonormal(7, 3));
  EXPECT_NE(a, random_orthonormal(7, 4));
}

TEST(BuiltinScenario, Dimensions) {
  const ScenarioSpec small = builtin_scenario("small");
  EXPECT_EQ(small.p, 5);
  EXPECT_EQ(small.q, 10);
  EXPECT_EQ(small.n, 500);
  const ScenarioSpec adni = builtin_scenario("adni-dim");
  EXPECT_EQ(adni.p, 35);
  EXPECT_EQ(adni.q, 37);
  EXPECT_EQ(adni.n, 135);
  EXPECT_THROW(builtin_scenario("large"), Error);
}

TEST(MakeScenario, PathVariancesAndTruth) {
  const SimScenario sc = small_at(500);
  EXPECT_EQ(sc.r, 2);
  EXPECT_DOUBLE_EQ(sc.eigen_x(0), 4.0);
  EXPECT_DOUBLE_EQ(sc.eigen_x(4), 0.25);
  // path PCs: α²λⱼ + 1
  EXPECT_DOUBLE_EQ(sc.eigen_m(0), 4.0 * 4.0 + 1.0);
  EXPECT_DOUBLE_EQ(sc.eigen_m(1), 4.0 * 2.0 + 1.0);
  EXPECT_DOUBLE_EQ(sc.eigen_m(2), 4.0);
  EXPECT_NO_THROW(sc.validate());
  // projections depend on projection_seed only, not on the data seed
  EXPECT_EQ(sc.phi_true, small_at(500, 99).phi_true);
  EXPECT_EQ(sc.psi_true, small_at(500, 99).psi_true);
}

TEST(SimScenario, ValidationRejectsIncreasingEigenvalues) {
  SimScenario sc = small_at(50);
  sc.eigen_x(3) = 10.0;
  EXPECT_THROW(sc.validate(), Error);
  sc = small_at(50);
  sc.phi_true(0, 0) += 1e-6;
  EXPECT_THROW(sc.validate(), Error);
}

TEST(ParseScenarioSpec, FieldsAndDefaults) {
  const ScenarioSpec s = parse_scenario_spec(
      R"({"name": "mine", "p": 4, "n": 80, "paths": [{"alpha": 1, "beta": 0.5, "gamma": 0}]})");
  EXPECT_EQ(s.name, "mine");
  EXPECT_EQ(s.p, 4);
  EXPECT_EQ(s.q, 10);
  EXPECT_EQ(s.n, 80);
  ASSERT_EQ(s.paths.size(), 1u);
  EXPECT_EQ(s.paths[0].beta, 0.5);
  try {
    parse_scenario_spec("{\"p\": ");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
  }
  EXPECT_THROW(load_scenario_spec("/nonexistent/scenario.json"), Error);
}

// ------------------------------------------------------------------ generate

TEST(Generate, SampleCovarianceMatchesTruth) {
  const SimScenario sc = small_at(100000, 5);
  const DataSet d = generate(sc);
  const Matrix xc = d.X.rowwise() - d.X.colwise().mean();
  const Matrix sx = xc.transpose() * xc / static_cast<double>(d.n() - 1);
  const Matrix truth = sc.phi_true * sc.eigen_x.asDiagonal() * sc.phi_true.transpose();
  EXPECT_LE((sx - truth).norm() / truth.norm(), 0.05);

  const Matrix mc = d.M.rowwise() - d.M.colwise().mean();
  const Matrix sm = mc.transpose() * mc / static_cast<double>(d.n() - 1);
  const Matrix truth_m = sc.psi_true * sc.eigen_m.asDiagonal() * sc.psi_true.transpose();
  EXPECT_LE((sm - truth_m).norm() / truth_m.norm(), 0.05);
}

TEST(Generate, NullPathsLeaveOutcomeIndependent) {
  ScenarioSpec spec = builtin_scenario("small");
  spec.n = 10000;
  spec.paths = {{0, 0, 0}, {0, 0, 0}};
  spec.mediator_variance = 1.0;  // keeps the mediator spectrum non-increasing
  const DataSet d = generate(make_scenario(spec, 8));
  const Vector y = (d.Y.array() - d.Y.mean()).matrix();
  EXPECT_NEAR(y.squaredNorm() / (d.n() - 1), 1.0, 0.05);
  auto corr = [&](const Vector& c) {
    const Vector cc = (c.array() - c.mean()).matrix();
    return std::abs(cc.dot(y)) / (cc.norm() * y.norm());
  };
  for (Eigen::Index j = 0; j < d.p(); ++j) EXPECT_LT(corr(d.X.col(j)), 0.05);
  for (Eigen::Index j = 0; j < d.q(); ++j) EXPECT_LT(corr(d.M.col(j)), 0.05);
}

TEST(Generate, FirstPathSlopeRecovered) {
  const SimScenario sc = small_at(100000, 9);
  const DataSet d = generate(sc);
  const Vector t = d.X * sc.phi_true.col(0);
  const Vector s = d.M * sc.psi_true.col(0);
  const Vector tc = (t.array() - t.mean()).matrix();
  const Vector sc_ = (s.array() - s.mean()).matrix();
  EXPECT_NEAR(tc.dot(sc_) / tc.squaredNorm(), 2.0, 0.04);
}

TEST(Generate, DeterministicPerSeed) {
  const SimScenario sc = small_at(300, 4);
  const DataSet a = generate(sc), b = generate(sc);
  EXPECT_EQ(a.X, b.X);
  EXPECT_EQ(a.M, b.M);
  EXPECT_EQ(a.Y, b.Y);
  EXPECT_NE(generate(with_seed(sc, 5)).X, a.X);
}

// -------------------------------------------------------------------- PCA-HP

DataSet with_exposure_spectrum(const Vector& eig, int n, std::uint64_t seed) {
  ScenarioSpec spec;
  spec.p = static_cast<int>(eig.size());
  spec.q = 4;
  spec.n = n;
  spec.paths = {{1.0, 1.0, 0.5}};
  spec.mediator_variance = 1.0;
  SimScenario sc = make_scenario(spec, seed);
  sc.eigen_x = eig;
  sc.eigen_m(0) = 1.0 * eig(0) + 1.0;
  return generate(sc);
}

TEST(PcaHp, DominantEigenvalueKeepsOnePc) {
  Vector eig(4);
  eig << 99.0, 0.4, 0.3, 0.3;
  const auto entries = pca_hp(with_exposure_spectrum(eig, 5000, 1), 0.85);
  ASSERT_EQ(entries.size(), 1u);
  EXPECT_GE(entries[0].explained, 0.85);
  EXPECT_TRUE(entries[0].significant);
}

TEST(PcaHp, FullThresholdKeepsEveryPc) {
  const auto entries = pca_hp(with_exposure_spectrum(Vector::Ones(4), 400, 2), 1.0);
  ASSERT_EQ(entries.size(), 4u);
  EXPECT_NEAR(entries.back().explained, 1.0, 1e-12);
  for (std::size_t j = 0; j < entries.size(); ++j) {
    EXPECT_EQ(entries[j].exposure_index, static_cast<int>(j));
    EXPECT_NEAR(entries[j].phi.norm(), 1.0, 1e-12);
  }
}

TEST(PcaHp, PlantedPathIsFoundOnFirstPc) {
  ScenarioSpec spec;
  spec.p = 3;
  spec.q = 4;
  spec.n = 2000;
  spec.paths = {{2.0, 2.0, 1.0}};
  spec.mediator_variance = 0.5;  // residual covariance peaks along the path
  const SimScenario sc = make_scenario(spec, 3);
  const auto entries = pca_hp(generate(sc), 0.5);
  ASSERT_GE(entries.size(), 1u);
  const PcaHpEntry& e = entries[0];
  ASSERT_TRUE(e.significant);
  EXPECT_GT(std::abs(e.phi.dot(sc.phi_true.col(0))), 0.99);
  EXPECT_GT(std::abs(e.psi.dot(sc.psi_true.col(0))), 0.95);
  EXPECT_LT(e.p_alpha, 1e-10);
  EXPECT_NEAR(e.psi.norm(), 1.0, 1e-12);
}

TEST(PcaHp, RejectsBadThreshold) {
  const DataSet d = with_exposure_spectrum(Vector::Ones(3), 100, 1);
  EXPECT_THROW(pca_hp(d, 0.0), Error);
  EXPECT_THROW(pca_hp(d, 1.5), Error);
}

// ------------------------------------------------------------------ evaluate

TEST(IsIdentified, ThresholdArithmetic) {
  EXPECT_TRUE(is_identified(0.6, 0.45));
  EXPECT_FALSE(is_identified(0.5, 0.5));
  EXPECT_FALSE(is_identified(0.0, 1.0));
}

ParameterSet from_truth(const SimScenario& sc, int j) {
  ParameterSet th;
  th.phi = sc.phi_true.col(j);
  th.psi = sc.psi_true.col(j);
  th.alpha = sc.paths[j].alpha;
  th.beta = sc.paths[j].beta;
  th.gamma = sc.paths[j].gamma;
  return th;
}

TEST(Evaluate, ExactTruthScoresOne) {
  const SimScenario sc = small_at(100);
  const ReplicateMetrics m = evaluate(sc, {from_truth(sc, 0), from_truth(sc, 1)});
  ASSERT_EQ(m.components.size(), 2u);
  for (int j = 0; j < 2; ++j) {
    EXPECT_TRUE(m.components[j].present);
    EXPECT_TRUE(m.components[j].identified);
    EXPECT_NEAR(m.components[j].sim_phi, 1.0, 1e-12);
    EXPECT_NEAR(m.components[j].sim_psi, 1.0, 1e-12);
    EXPECT_NEAR(m.components[j].ie, sc.paths[j].alpha * sc.paths[j].beta, 1e-12);
  }
}

TEST(Evaluate, OrthogonalProjectionIsNotIdentified) {
  const SimScenario sc = small_at(100);
  ParameterSet th = from_truth(sc, 0);
  th.phi = sc.phi_true.col(1);
  th.psi = sc.psi_true.col(2);
  const ReplicateMetrics m = evaluate(sc, {th});
  EXPECT_NEAR(m.components[0].sim_phi, 0.0, 1e-12);
  EXPECT_FALSE(m.components[0].identified);
  EXPECT_FALSE(m.components[1].present);
  EXPECT_FALSE(m.components[1].identified);
}

// Similarities and aligned estimates ignore the sign of the projections.
TEST(Evaluate, SignBlind) {
  const SimScenario sc = small_at(100);
  ParameterSet th = from_truth(sc, 0);
  th.phi = (0.8 * sc.phi_true.col(0) + 0.6 * sc.phi_true.col(2)).normalized();
  th.alpha = 1.7;
  th.beta = 2.2;
  th.gamma = 0.9;
  ParameterSet flipped = th;
  flipped.phi = -th.phi;
  flipped.alpha = -th.alpha;
  flipped.gamma = -th.gamma;
  flipped.psi = -th.psi;
  flipped.alpha = -flipped.alpha;
  flipped.beta = -th.beta;
  const auto a = evaluate(sc, {th}).components[0];
  const auto b = evaluate(sc, {flipped}).components[0];
  EXPECT_EQ(a.sim_phi, b.sim_phi);
  EXPECT_EQ(a.sim_psi, b.sim_psi);
  EXPECT_EQ(a.alpha, b.alpha);
  EXPECT_EQ(a.beta, b.beta);
  EXPECT_EQ(a.gamma, b.gamma);
  EXPECT_EQ(a.ie, b.ie);
  EXPECT_NEAR(a.alpha, 1.7, 1e-15);
}

// ----------------------------------------------------------------- run_study

StudyConfig fast_study(int replicates) {
  StudyConfig cfg;
  cfg.replicates = replicates;
  cfg.sequence.test_significance = false;
  return cfg;
}

TEST(RunStudy, SingleReplicateHasAbsentSpreads) {
  const StudySummary s = run_study(small_at(200), fast_study(1));
  ASSERT_FALSE(s.rows.empty());
  for (const auto& r : s.rows) {
    EXPECT_FALSE(r.sim_phi_sd.has_value());
    if (r.ie) EXPECT_FALSE(r.ie->se.has_value());
  }
  const std::string csv = study_csv(s);
  EXPECT_NE(csv.find(",-"), std::string::npos);
  EXPECT_EQ(csv.rfind("p,q,n,method,component,identified_pct,", 0), 0u);
}

TEST(RunStudy, RowsPerMethodAndComponent) {
  const StudySummary s = run_study(small_at(200), fast_study(3));
  EXPECT_EQ(s.rows.size(), 4u);  // 2 methods × 2 true paths
  EXPECT_EQ(s.raw.size(), 2u);
  EXPECT_EQ(s.raw[0].size(), 3u);
  std::istringstream lines(study_csv(s));
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) ++count;
  EXPECT_EQ(count, 5);
}

TEST(RunStudy, DeterministicAndThreadIndependent) {
  StudyConfig one = fast_study(4);
  StudyConfig four = fast_study(4);
  four.threads = 4;
  const SimScenario sc = small_at(150);
  EXPECT_EQ(study_csv(run_study(sc, one)), study_csv(run_study(sc, one)));
  EXPECT_EQ(study_csv(run_study(sc, one)), study_csv(run_study(sc, four)));
}

// Larger samples sharpen the estimates. With two planted paths the
// single-component likelihood is not stationary at the truth (the second
// path leaks into the outcome residual), so the similarities level off near
// 0.979; this check fails for that reason and is kept as stated.
TEST(RunStudy, ConsistencyTrend) {
  StudyConfig cfg = fast_study(10);
  cfg.methods = {Method::kPcma};
  const StudySummary big = run_study(small_at(10000, 21), cfg);
  cfg.replicates = 50;
  const StudySummary mid = run_study(small_at(500, 21), cfg);
  for (const auto& r : big.rows) {
    EXPECT_EQ(r.identified, 10);
    EXPECT_GT(r.sim_phi_mean, 0.99) << "C" << r.component;
    EXPECT_GT(r.sim_psi_mean, 0.99) << "C" << r.component;
  }
  ASSERT_TRUE(big.rows[0].ie && mid.rows[0].ie);
  EXPECT_LT(std::abs(big.rows[0].ie->bias), std::abs(mid.rows[0].ie->bias));
}

// With a single planted path the truth is the population optimum.
TEST(RunStudy, SinglePathIsConsistent) {
  ScenarioSpec spec = builtin_scenario("small");
  spec.paths = {{2.0, 2.0, 1.0}};
  spec.n = 100000;
  const SimScenario sc = make_scenario(spec, 5);
  const DataSet d = standardize(generate(sc), true, false).data;
  const auto& th = fit_component(d).component.params;
  EXPECT_GT(std::abs(th.phi.dot(sc.phi_true.col(0))), 0.999);
  EXPECT_GT(std::abs(th.psi.dot(sc.psi_true.col(0))), 0.999);
  EXPECT_NEAR(std::abs(th.alpha * th.beta), 4.0, 0.05);
}

}  // namespace
}  // namespace pcma
