#pragma once

#include <optional>
#include <vector>

#include "pcma/inference.hpp"
#include "pcma/model.hpp"
#include "pcma/solver.hpp"

namespace pcma {

// Data after removing the first k components. W is never deflated.
struct DeflationState {
  Matrix X;
  Matrix M;
  Matrix W;
  Vector Y;
  int k = 0;
  Matrix phi_basis;  // p×k, extracted φ̂ⱼ
  Matrix psi_basis;  // q×k

  static DeflationState initial(const DataSet& data);
  DataSet data() const;
};

/// x ← x − (xφ̂)φ̂ᵀ, m ← m − (mψ̂)ψ̂ᵀ, y ← y − (xφ̂)γ̂ − (mψ̂)β̂ with the
/// scores taken from the pre-deflation data.
DeflationState deflate(const DeflationState& state, const MediationComponent& component);

struct SequenceOptions {
  // Fit all max_components and report every test instead of stopping at the
  // first non-significant indirect effect.
  bool exhaustive = false;
  // Skip the bootstrap; every fitted component counts as significant.
  bool test_significance = true;
};

struct ComponentTest {
  MediationComponent component;
  FitTrace trace;
  std::optional<BootstrapResult> bootstrap;
  bool significant = true;
};

struct SequenceResult {
  ComponentSequence sequence;       // retained components
  std::vector<ComponentTest> tests;  // every fitted component, in order
  std::vector<DataSet> step_data;    // data each component was fitted on
};

SequenceResult fit_sequence(const DataSet& data, int max_components,
                            const FitConfig& config, const InferenceConfig& infer,
                            const SequenceOptions& options = {});

}  // namespace pcma
