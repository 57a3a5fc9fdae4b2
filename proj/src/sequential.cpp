#include "pcma/sequential.hpp"

#include <algorithm>
#include <sstream>

namespace pcma {

DeflationState DeflationState::initial(const DataSet& data) {
  DeflationState st;
  st.X = data.X;
  st.M = data.M;
  st.W = data.W;
  st.Y = data.Y;
  st.phi_basis.resize(data.p(), 0);
  st.psi_basis.resize(data.q(), 0);
  return st;
}

DataSet DeflationState::data() const {
  DataSet d;
  d.X = X;
  d.M = M;
  d.W = W;
  d.Y = Y;
  return d;
}

DeflationState deflate(const DeflationState& state, const MediationComponent& component) {
  const auto& th = component.params;
  if (th.phi.size() != state.X.cols() || th.psi.size() != state.M.cols())
    throw Error(ErrorCode::kDimensionMismatch,
                "component projections do not match the deflation state");
  const Vector t = state.X * th.phi;
  const Vector s = state.M * th.psi;

  DeflationState next = state;
  next.X.noalias() -= t * th.phi.transpose();
  next.M.noalias() -= s * th.psi.transpose();
  next.Y = state.Y - th.gamma * t - th.beta * s;
  next.k = state.k + 1;
  next.phi_basis.conservativeResize(Eigen::NoChange, next.k);
  next.psi_basis.conservativeResize(Eigen::NoChange, next.k);
  next.phi_basis.col(next.k - 1) = th.phi;
  next.psi_basis.col(next.k - 1) = th.psi;
  return next;
}

SequenceResult fit_sequence(const DataSet& data, int max_components,
                            const FitConfig& config, const InferenceConfig& infer,
                            const SequenceOptions& options) {
  validate(data);
  const auto cap = std::min(data.p(), data.q());
  if (max_components < 0 || max_components > cap) {
    std::ostringstream msg;
    msg << "max_components must lie in [0, " << cap << "], got " << max_components;
    throw Error(ErrorCode::kInvalidArgument, msg.str());
  }
  if (options.test_significance && max_components > 0) infer.validate();

  SequenceResult out;
  std::vector<MediationComponent> kept;
  DeflationState state = DeflationState::initial(data);
  for (int k = 0; k < max_components; ++k) {
    FitConfig cfg = config;
    cfg.exclude_phi = state.phi_basis;
    cfg.exclude_psi = state.psi_basis;
    DataSet step = state.data();
    FitResult fit = fit_component(step, cfg);

    ComponentTest test{fit.component, std::move(fit.trace), std::nullopt, true};
    if (options.test_significance) {
      test.bootstrap = bootstrap_component(step, fit.component, infer, k);
      test.significant = !test.bootstrap->ci[kIE].covers(0.0);
    }
    const bool significant = test.significant;
    out.tests.push_back(std::move(test));
    out.step_data.push_back(std::move(step));

    if (significant || options.exhaustive) kept.push_back(fit.component);
    if (!significant && !options.exhaustive) break;
    if (k + 1 < max_components) state = deflate(state, fit.component);
  }
  out.sequence = ComponentSequence::from_components(std::move(kept), data.p(), data.q());
  return out;
}

}  // namespace pcma
