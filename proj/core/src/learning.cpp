#include "gagn/learning.hpp"

#include "gagn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gagn {
namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

Vector log_softmax(const Vector& logits) {
  const double top = logits.maxCoeff();
  const double lse = top + std::log((logits.array() - top).exp().sum());
  return (logits.array() - lse).matrix();
}

void check_rate(double rate, const char* name) {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw ConfigError(std::string(name) + " must be a positive finite number");
  }
}

int row_degree(const NeighborView& view, int row) {
  return row == 0 ? view.self_degree : view.degrees[static_cast<std::size_t>(row - 1)];
}

void check_view(const AgentState& agent, const NeighborView& view) {
  if (agent.attention.size() != view.size() + 1) throw ShapeError("attention length does not match view");
  if (static_cast<int>(view.degrees.size()) != view.size()) {
    throw ShapeError("view degrees do not match neighbor ids");
  }
}

// Gradient of KL(softmax(a) || Y) with respect to a, together with the KL.
double kl_row(const Vector& logits, const Vector& log_target, Vector& grad) {
  const Vector log_x = log_softmax(logits);
  const Vector x = log_x.array().exp().matrix();
  const Vector ratio = log_x - log_target;
  const double kl = x.dot(ratio);
  grad = (x.array() * (ratio.array() - kl)).matrix();
  return kl;
}

}  // namespace

void SgdConfig::validate() const {
  check_rate(lr_A, "lr_A");
  check_rate(lr_M, "lr_M");
  check_rate(lr_D, "lr_D");
  check_rate(lr_N, "lr_N");
  if (steps_per_round < 1) throw ConfigError("steps_per_round must be >= 1");
  if (grad_clip && !(*grad_clip > 0.0)) throw ConfigError("grad_clip must be positive");
}

std::optional<double> loss_A(const AgentState& agent, const NeighborView& view) {
  if (!agent.has_label) return std::nullopt;
  const Vector x = aggregate(agent, view);
  return -log_softmax(agent.theta_M.transpose() * x)[agent.label];
}

AMGradients grad_AM(const AgentState& agent, const NeighborView& view) {
  if (!agent.has_label) throw PreconditionError("grad_AM needs a labeled agent");
  const Vector x = aggregate(agent, view);
  const Vector log_p = log_softmax(agent.theta_M.transpose() * x);
  Vector g = log_p.array().exp().matrix();
  g[agent.label] -= 1.0;

  AMGradients out;
  out.loss = -log_p[agent.label];
  out.theta_M = x * g.transpose();
  const Vector dx = agent.theta_M * g / static_cast<double>(view.size() + 1);
  out.attention.resize(view.size() + 1);
  out.attention[0] = agent.feature.dot(dx);
  for (int k = 0; k < view.size(); ++k) out.attention[k + 1] = view.features.row(k).dot(dx);
  return out;
}

std::optional<double> step_A(AgentState& agent, const NeighborView& view, const SgdConfig& cfg) {
  if (!agent.has_label) return std::nullopt;
  AMGradients g = grad_AM(agent, view);
  clip_gradient(g.attention, cfg.grad_clip);
  agent.attention = (agent.attention - cfg.lr_A * g.attention).cwiseMax(0.0);
  return g.loss;
}

std::optional<double> step_M_local(AgentState& agent, const NeighborView& view,
                                   const SgdConfig& cfg) {
  if (!agent.has_label) return std::nullopt;
  AMGradients g = grad_AM(agent, view);
  clip_gradient(g.theta_M, cfg.grad_clip);
  agent.theta_M -= cfg.lr_M * g.theta_M;
  return g.loss;
}

std::optional<double> step_AM(AgentState& agent, const NeighborView& view, const SgdConfig& cfg) {
  if (!agent.has_label) return std::nullopt;
  AMGradients g = grad_AM(agent, view);
  clip_gradient(g.attention, cfg.grad_clip);
  clip_gradient(g.theta_M, cfg.grad_clip);
  agent.attention = (agent.attention - cfg.lr_A * g.attention).cwiseMax(0.0);
  agent.theta_M -= cfg.lr_M * g.theta_M;
  return g.loss;
}

Vector degree_target(int degree, int deg_max) {
  if (deg_max < 1) throw UnsupportedGraphError("degree inference needs deg_max >= 1");
  Vector y = Vector::Constant(deg_max, kTargetSmoothing);
  y[std::clamp(degree, 1, deg_max) - 1] = 1.0;
  return y / y.sum();
}

double loss_grad_D(const Matrix& theta_D, const AgentState& agent, const NeighborView& view,
                   Matrix* grad) {
  check_view(agent, view);
  const int deg_max = static_cast<int>(theta_D.cols());
  if (deg_max < 1) throw UnsupportedGraphError("degree inference needs deg_max >= 1");
  const Matrix rows = stacked_rows(agent, view);
  const Matrix logits = rows * theta_D;
  // log of the smoothed one-hot target: two distinct values per row.
  const double norm = 1.0 + kTargetSmoothing * (deg_max - 1);
  const double log_hot = -std::log(norm);
  const double log_cold = std::log(kTargetSmoothing) - std::log(norm);
  Matrix g;
  if (grad) g = Matrix::Zero(logits.rows(), logits.cols());
  const double scale = 1.0 / static_cast<double>(view.size() + 1);
  double total = 0.0;
  Vector row_grad;
  Vector log_y = Vector::Constant(deg_max, log_cold);
  for (int r = 0; r <= view.size(); ++r) {
    const int d = row_degree(view, r);
    if (d < 1 || agent.attention[r] == 0.0) continue;
    const int hot = std::clamp(d, 1, deg_max) - 1;
    log_y[hot] = log_hot;
    total += agent.attention[r] * kl_row(logits.row(r).transpose(), log_y, row_grad);
    log_y[hot] = log_cold;
    if (grad) g.row(r) = agent.attention[r] * scale * row_grad.transpose();
  }
  if (grad) *grad = rows.transpose() * g;
  return total * scale;
}

double loss_D(const Matrix& theta_D, const AgentState& agent, const NeighborView& view) {
  return loss_grad_D(theta_D, agent, view, nullptr);
}

double loss_D(const AgentState& agent, const NeighborView& view) {
  return loss_D(agent.theta_D, agent, view);
}

Matrix grad_D(const Matrix& theta_D, const AgentState& agent, const NeighborView& view) {
  Matrix g;
  loss_grad_D(theta_D, agent, view, &g);
  return g;
}

double step_D_local(AgentState& agent, const NeighborView& view, const SgdConfig& cfg) {
  Matrix g;
  const double before = loss_grad_D(agent.theta_D, agent, view, &g);
  clip_gradient(g, cfg.grad_clip);
  agent.theta_D -= cfg.lr_D * g;
  return before;
}

PairSamples build_N_samples(const AgentState& agent, const NeighborView& view) {
  const auto dz = static_cast<Eigen::Index>(agent.feature_dim());
  auto pairs = [&](const Matrix& others) {
    Matrix out(2 * others.rows(), 2 * dz);
    for (Eigen::Index k = 0; k < others.rows(); ++k) {
      out.row(2 * k) << agent.feature.transpose(), others.row(k);
      out.row(2 * k + 1) << others.row(k), agent.feature.transpose();
    }
    return out;
  };
  PairSamples s;
  s.positives = view.size() > 0 ? pairs(view.features) : Matrix(0, 2 * dz);
  s.negatives = view.two_hop.rows() > 0 ? pairs(view.two_hop) : Matrix(0, 2 * dz);
  return s;
}

double loss_N(const Vector& theta_N, const PairSamples& samples) {
  double loss = 0.0;
  if (samples.positives.rows() > 0) {
    const Vector s = samples.positives * theta_N;
    double sum = 0.0;
    for (Eigen::Index k = 0; k < s.size(); ++k) sum += softplus(-s[k]);
    loss += sum / static_cast<double>(s.size());
  }
  if (samples.negatives.rows() > 0) {
    const Vector s = samples.negatives * theta_N;
    double sum = 0.0;
    for (Eigen::Index k = 0; k < s.size(); ++k) sum += softplus(s[k]);
    loss += sum / static_cast<double>(s.size());
  }
  return loss;
}

Vector grad_N(const Vector& theta_N, const PairSamples& samples) {
  Vector g = Vector::Zero(theta_N.size());
  if (samples.positives.rows() > 0) {
    Vector s = samples.positives * theta_N;
    for (Eigen::Index k = 0; k < s.size(); ++k) s[k] = sigmoid(s[k]) - 1.0;
    g += samples.positives.transpose() * s / static_cast<double>(s.size());
  }
  if (samples.negatives.rows() > 0) {
    Vector s = samples.negatives * theta_N;
    for (Eigen::Index k = 0; k < s.size(); ++k) s[k] = sigmoid(s[k]);
    g += samples.negatives.transpose() * s / static_cast<double>(s.size());
  }
  return g;
}

double step_N_local(AgentState& agent, const PairSamples& samples, const SgdConfig& cfg) {
  const double before = loss_N(agent.theta_N, samples);
  Vector g = grad_N(agent.theta_N, samples);
  clip_gradient(g, cfg.grad_clip);
  agent.theta_N -= cfg.lr_N * g;
  return before;
}

LocalLosses train_local(AgentState& agent, const NeighborView& view, const PairSamples& samples,
                        const SgdConfig& cfg) {
  LocalLosses out;
  for (int step = 0; step < cfg.steps_per_round; ++step) {
    out.j_A = step_AM(agent, view, cfg);
    out.j_D = step_D_local(agent, view, cfg);
    out.j_N = step_N_local(agent, samples, cfg);
  }
  return out;
}

}  // namespace gagn
