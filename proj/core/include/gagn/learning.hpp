#pragma once

#include "gagn/agent.hpp"
#include "gagn/types.hpp"

#include <optional>

namespace gagn {

struct SgdConfig {
  double lr_A = 0.05;
  double lr_M = 0.05;
  double lr_D = 0.05;
  double lr_N = 0.05;
  int steps_per_round = 1;
  // Rescales any gradient whose L2 norm exceeds this value.
  std::optional<double> grad_clip;

  // Throws ConfigError.
  void validate() const;
};

// Per-round means across agents. j_A averages over labeled agents only.
struct LossReport {
  double j_A = 0.0;
  double j_D = 0.0;
  double j_N = 0.0;
  std::size_t labeled_agents = 0;
  std::size_t agents = 0;
};

// ---- aggregator + embedding (cross entropy on the agent's own label) ----

// nullopt for unlabeled agents.
std::optional<double> loss_A(const AgentState& agent, const NeighborView& view);

struct AMGradients {
  double loss = 0.0;
  Vector attention;  // d loss / d w, length deg + 1
  Matrix theta_M;    // d loss / d theta_M
};

// Both gradients come from one forward pass. Precondition: agent.has_label.
AMGradients grad_AM(const AgentState& agent, const NeighborView& view);

// One step on the attention only; theta_M is left untouched. Attention is
// clamped at zero afterwards. Unlabeled agents are skipped (returns nullopt).
std::optional<double> step_A(AgentState& agent, const NeighborView& view, const SgdConfig& cfg);
// One step on theta_M only; attention is left untouched.
std::optional<double> step_M_local(AgentState& agent, const NeighborView& view,
                                   const SgdConfig& cfg);
// step_A and step_M_local from the same forward pass, which is what the
// round engine runs: both updates see the parameters as they were before
// either step.
std::optional<double> step_AM(AgentState& agent, const NeighborView& view, const SgdConfig& cfg);

// ---- degree inference ----

inline constexpr double kTargetSmoothing = 1e-6;

// Smoothed one-hot target for a degree (index d - 1, clamped into range).
Vector degree_target(int degree, int deg_max);

// Attention-weighted KL(X_r || Y_r) summed over self + neighbor rows and
// divided by deg + 1. Rows whose degree is 0 carry no supervision and are
// skipped. Throws UnsupportedGraphError when deg_max is 0.
double loss_D(const AgentState& agent, const NeighborView& view);
double loss_D(const Matrix& theta_D, const AgentState& agent, const NeighborView& view);
Matrix grad_D(const Matrix& theta_D, const AgentState& agent, const NeighborView& view);
// Loss and (when grad is non-null) its gradient from one forward pass.
double loss_grad_D(const Matrix& theta_D, const AgentState& agent, const NeighborView& view,
                   Matrix* grad);
double step_D_local(AgentState& agent, const NeighborView& view, const SgdConfig& cfg);

// ---- neighbor confidence ----

// Rows are concatenated pairs (2 * d_z columns).
struct PairSamples {
  Matrix positives;
  Matrix negatives;

  Eigen::Index size() const noexcept { return positives.rows() + negatives.rows(); }
};

// Positives: (z_i, z_j) and (z_j, z_i) for every 1-hop neighbor. Negatives:
// the same two orders for every relayed 2-hop feature.
PairSamples build_N_samples(const AgentState& agent, const NeighborView& view);

// Two-term binary cross entropy, each term normalized by its own sample
// count. An empty class drops its term.
double loss_N(const Vector& theta_N, const PairSamples& samples);
Vector grad_N(const Vector& theta_N, const PairSamples& samples);
double step_N_local(AgentState& agent, const PairSamples& samples, const SgdConfig& cfg);

struct LocalLosses {
  std::optional<double> j_A;
  double j_D = 0.0;
  double j_N = 0.0;
};

// steps_per_round repetitions of step_AM, step_D_local, step_N_local.
// Reported losses are the ones measured before the last repetition's update.
LocalLosses train_local(AgentState& agent, const NeighborView& view, const PairSamples& samples,
                        const SgdConfig& cfg);

// Scales `grad` in place so its norm is at most `clip`.
template <class Derived>
void clip_gradient(Eigen::MatrixBase<Derived>& grad, const std::optional<double>& clip) {
  if (!clip) return;
  const double norm = grad.norm();
  if (norm > *clip && norm > 0.0) grad *= *clip / norm;
}

}  // namespace gagn
