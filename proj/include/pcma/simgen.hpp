#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pcma/inference.hpp"
#include "pcma/model.hpp"
#include "pcma/sequential.hpp"
#include "pcma/solver.hpp"

namespace pcma {

struct PathCoefficients {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};

/// Generative configuration of the benchmark: exposure PCs with variances
/// eigen_x along the columns of phi_true; mediator PCs 1..r follow the
/// mediator model on the matching exposure PC, the rest are independent with
/// variances eigen_m; the outcome sums the r paths. No covariates.
struct SimScenario {
  std::string name;
  int p = 0;
  int q = 0;
  int n = 0;
  int r = 0;
  Matrix phi_true;  // p×p orthonormal
  Matrix psi_true;  // q×q orthonormal
  Vector eigen_x;
  Vector eigen_m;  // entries 0..r−1 are the implied path-PC variances
  std::vector<PathCoefficients> paths;
  std::uint64_t seed = 0;  // data seed

  void validate() const;
};

/// c·ρ^k for k = 0..count−1.
Vector exponential_decay(int count, double first, double ratio);

/// Random p×p orthonormal matrix (QR of a Gaussian draw, sign-fixed R).
Matrix random_orthonormal(int dim, std::uint64_t seed);

struct ScenarioSpec {
  std::string name = "custom";
  int p = 5;
  int q = 10;
  int n = 500;
  double lambda_first = 4.0;
  double lambda_ratio = 0.5;
  double mediator_variance = 4.0;  // variance of every non-path mediator PC
  std::vector<PathCoefficients> paths = {{2.0, 2.0, 1.0}, {2.0, 1.0, -1.0}};
  std::uint64_t projection_seed = 0;
};

SimScenario make_scenario(const ScenarioSpec& spec, std::uint64_t seed);

/// "small" = (5,10), n=500; "adni-dim" = (35,37), n=135.
ScenarioSpec builtin_scenario(const std::string& name);

/// JSON object with any of the ScenarioSpec fields; "paths" is a list of
/// {"alpha", "beta", "gamma"} objects. Missing fields keep their defaults.
ScenarioSpec parse_scenario_spec(const std::string& json_text);
ScenarioSpec load_scenario_spec(const std::string& path);

/// Same scenario, different data seed (true projections unchanged).
SimScenario with_seed(SimScenario scenario, std::uint64_t seed);

DataSet generate(const SimScenario& scenario);

/// One retained exposure PC of the PCA-HP comparator with its best mediator
/// direction, if any passed the joint-significance test.
struct PcaHpEntry {
  int exposure_index = 0;
  Vector phi;
  double explained = 0.0;  // cumulative variance fraction up to this PC
  bool significant = false;
  Vector psi;
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double p_alpha = 1.0;
  double p_beta = 1.0;
  double sigma2 = 1.0;
  double tau2 = 1.0;
};

/// (i) PCA of X, keeping the leading PCs that reach `variance_threshold` of
/// the total variance. (ii) Each retained PC is analysed as a scalar
/// exposure: mediators are decorrelated by the eigenvectors of their residual
/// covariance given that PC, and every transformed mediator gets a mediator
/// model (α) and an outcome model with that single mediator (β, γ). A pair is
/// significant when max(p_α, p_β) < `test_level`; the reported pair per PC is
/// the one with the largest min(|t_α|, |t_β|).
std::vector<PcaHpEntry> pca_hp(const DataSet& data, double variance_threshold = 0.85,
                               double test_level = 0.05);

struct ComponentMetrics {
  bool present = false;
  bool identified = false;
  double sim_phi = 0.0;
  double sim_psi = 0.0;
  double alpha = 0.0;  // estimates after sign alignment with the truth
  double beta = 0.0;
  double gamma = 0.0;
  double ie = 0.0;
};

struct ReplicateMetrics {
  std::vector<ComponentMetrics> components;  // one per true path
};

/// Fitted component j is compared with true path j.
ReplicateMetrics evaluate(const SimScenario& truth, const ComponentSequence& fitted);
ReplicateMetrics evaluate(const SimScenario& truth,
                          const std::vector<std::optional<ParameterSet>>& fitted);

/// Identified when the mean of the two similarities exceeds 0.5.
bool is_identified(double sim_phi, double sim_psi);

enum class Method { kPcma, kPcaHp };
const char* method_name(Method m);

struct StudyConfig {
  int replicates = 200;
  std::vector<Method> methods = {Method::kPcaHp, Method::kPcma};
  FitConfig fit;
  InferenceConfig infer;
  SequenceOptions sequence;
  int max_components = 0;  // 0: r + 1, capped at min(p, q)
  double pca_hp_threshold = 0.85;
  int threads = 1;
};

struct ParameterStats {
  double bias = 0.0;
  std::optional<double> se;  // absent with a single replicate
  double mse = 0.0;
};

struct StudyRow {
  Method method = Method::kPcma;
  int component = 0;
  int identified = 0;
  int replicates = 0;
  double sim_phi_mean = 0.0;
  std::optional<double> sim_phi_sd;
  double sim_psi_mean = 0.0;
  std::optional<double> sim_psi_sd;
  // Over identified replicates; absent when none.
  std::optional<ParameterStats> alpha, beta, gamma, ie;

  double identified_pct() const {
    return replicates > 0 ? 100.0 * identified / replicates : 0.0;
  }
};

struct StudySummary {
  int p = 0, q = 0, n = 0, replicates = 0;
  std::vector<StudyRow> rows;
  std::vector<std::vector<ReplicateMetrics>> raw;  // [method][replicate]
};

StudySummary run_study(const SimScenario& scenario, const StudyConfig& config);

/// Table-1 column layout; "-" marks absent values.
std::string study_csv(const StudySummary& summary);

}  // namespace pcma
