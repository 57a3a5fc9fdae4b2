#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "pcma/model.hpp"
#include "pcma/solver.hpp"

namespace pcma {

enum class CiType { kPercentile, kBiasCorrected };

struct InferenceConfig {
  int n_boot = 1000;
  double level = 0.95;
  CiType ci_type = CiType::kBiasCorrected;
  std::uint64_t seed = 0;
  int threads = 1;
  // Re-estimate φ and ψ inside every draw instead of holding them fixed.
  bool refit_projections = false;

  void validate() const;
};

/// Columns of BootstrapResult::draws.
enum Quantity : int { kAlpha = 0, kBeta = 1, kGamma = 2, kDE = 3, kIE = 4 };
inline constexpr int kQuantityCount = 5;
const char* quantity_name(int quantity);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;

  bool covers(double value) const { return lower <= value && value <= upper; }
};

struct BootstrapResult {
  Matrix draws;  // n_boot × 5: α*, β*, γ*, DE*, IE*
  std::array<double, kQuantityCount> point{};
  std::array<Interval, kQuantityCount> ci{};
  std::array<double, kQuantityCount> se{};
  int redraws = 0;
};

// Linear interpolation between order statistics: with sorted x₀..x_{N−1} the
// quantile at probability p sits at position h = (N−1)p.
double empirical_quantile(std::span<const double> sorted, double prob);

Interval percentile_interval(std::span<const double> draws, double level);

/// Bias-corrected interval: z₀ = Φ⁻¹(#{draws < point}/B), bounds at the
/// quantiles Φ(2z₀ ∓ z_{(1+level)/2}). The fraction is clamped to
/// [1/(2B), 1 − 1/(2B)] so z₀ stays finite.
Interval bc_interval(std::span<const double> draws, double point, double level);

double normal_cdf(double z);
double normal_quantile(double p);

/// Nonparametric bootstrap of one component. By default rows of the
/// score-level data {φ̂ᵀx, ψ̂ᵀm, w, y} are resampled and only the
/// coefficients and variances are re-estimated. `component_index` feeds the
/// per-draw stream derivation (seed, component, draw).
BootstrapResult bootstrap_component(const DataSet& data,
                                    const MediationComponent& component,
                                    const InferenceConfig& config,
                                    int component_index = 0,
                                    const FitConfig& refit = {});

/// Plug-in covariances (already divided by n) of the estimators.
struct AsymptoticCovariances {
  Matrix Pi;         // (p+q)×(p+q), (φ̂, ψ̂)
  Matrix Xi;         // 3×3, (α̂, β̂, γ̂)
  Matrix theta_cov;  // 2s×2s, (θ̂₁, θ̂₂)
  double sigma2_ab = 0.0;  // variance of α̂β̂
  double kappa_x = 0.0;
  double kappa_m = 0.0;
  double kappa_xm = 0.0;
  double sigma2 = 0.0;
  double tau2 = 0.0;
  Eigen::Index n = 0;
};

/// Ξ from the inverse of its 3×3 information matrix (not divided by n).
Matrix xi_matrix(double kappa_x, double kappa_m, double kappa_xm, double sigma2,
                 double tau2);

/// Π from the inverse of its block information matrix (not divided by n).
Matrix pi_matrix(const Matrix& P, const Matrix& Q, const Matrix& R,
                 const ParameterSet& params);

AsymptoticCovariances asymptotic_covariances(const DataSet& data,
                                             const MediationComponent& component);

/// σ²_{αβ} = β²σ²/κₓ + α²τ²κₓ/(κₓκₘ − κₓₘ²), the asymptotic variance of
/// √n(α̂β̂ − αβ). Uses κ, σ², τ² from `cov`.
double ie_variance(const AsymptoticCovariances& cov, const ParameterSet& params);

}  // namespace pcma
