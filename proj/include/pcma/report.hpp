#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "pcma/inference.hpp"
#include "pcma/model.hpp"
#include "pcma/sequential.hpp"

namespace pcma {

struct ReportSettings {
  int components = 0;
  int n_boot = 0;  // 0: no bootstrap
  double level = 0.95;
  CiType ci_type = CiType::kBiasCorrected;
  std::uint64_t seed = 0;
  std::string standardize = "zscore";
  std::string covariate_mode = "in-model";
};

struct FeatureNames {
  std::vector<std::string> x, m, w;
  std::string y = "y";
};

/// The canonical fit artifact: per tested component the loadings, the
/// coefficient table (estimate, bootstrap SE and CI, asymptotic SE) for α, β,
/// IE, DE, nuisance parameters and convergence diagnostics; plus the
/// standardization record and run settings.
nlohmann::json build_report(const SequenceResult& result, const StandardizationRecord& record,
                            const FeatureNames& names, const ReportSettings& settings);

/// Throws ErrorCode::kParseError when required fields are missing.
void check_report(const nlohmann::json& report);

/// Coefficient tables per component followed by the top_k loadings of each
/// projection ranked by magnitude with their sign. Numbers are printed in the
/// shortest form that round-trips, so they equal the JSON values exactly.
std::string render_report(const nlohmann::json& report, int top_k);

/// Long-format coefficient table: component,quantity,estimate,se,ci_lower,
/// ci_upper,asymptotic_se.
std::string coefficients_csv(const nlohmann::json& report);

/// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace pcma
