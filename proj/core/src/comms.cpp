#include "gagn/comms.hpp"

#include "gagn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>

namespace gagn {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr double kSignDeadZone = 1e-12;

bool fuse_round(std::uint64_t round, int every) { return every > 0 && round % static_cast<std::uint64_t>(every) == 0; }

void require_finite_state(const AgentState& a) {
  if (!a.attention.allFinite() || !a.theta_M.allFinite() || !a.theta_D.allFinite() ||
      !a.theta_N.allFinite()) {
    throw NumericError("parameters became non-finite");
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void CommsConfig::validate() const {
  if (rho < 1) throw ConfigError("rho must be >= 1");
  if (Q < 0) throw ConfigError("Q must be >= 0");
  if (!(xi > 0.0)) throw ConfigError("xi must be positive");
  if (middleware_steps < 0) throw ConfigError("middleware_steps must be >= 0");
  if (!(middleware_lr > 0.0)) throw ConfigError("middleware_lr must be positive");
  if (middleware_max_2hop < 0) throw ConfigError("middleware_max_2hop must be >= 0");
  if (fuse_D_direction != 1.0 && fuse_D_direction != -1.0) {
    throw ConfigError("fuse_D_direction must be +1 or -1");
  }
  if (fuse_every < 0 || fuse_D_every < 0) throw ConfigError("fusion cadence must be >= 0");
}

void RoundSchedule::validate() const {
  if (total_rounds < 0) throw ConfigError("total_rounds must be >= 0");
  if (convergence_window < 1) throw ConfigError("convergence_window must be >= 1");
  if (!(convergence_tol >= 0.0)) throw ConfigError("convergence_tol must be >= 0");
}

std::vector<int> sample_out_indices(const AgentState& agent, const Matrix& neighbor_features,
                                    int rho) {
  if (rho < 1) throw PreconditionError("rho must be >= 1");
  const int deg = static_cast<int>(neighbor_features.rows());
  std::vector<int> idx(static_cast<std::size_t>(deg));
  std::iota(idx.begin(), idx.end(), 0);
  if (deg <= rho) return idx;
  std::vector<double> dist(static_cast<std::size_t>(deg));
  for (int k = 0; k < deg; ++k) {
    dist[k] = (neighbor_features.row(k).transpose() - agent.feature).squaredNorm();
  }
  std::partial_sort(idx.begin(), idx.begin() + rho, idx.end(), [&](int a, int b) {
    if (dist[a] != dist[b]) return dist[a] > dist[b];
    return agent.neighbors[a] < agent.neighbors[b];
  });
  idx.resize(static_cast<std::size_t>(rho));
  return idx;
}

std::vector<std::pair<NodeId, Vector>> sample_out(const AgentState& agent,
                                                  const NeighborView& view, int rho) {
  std::vector<std::pair<NodeId, Vector>> out;
  for (int k : sample_out_indices(agent, view.features, rho)) {
    out.emplace_back(view.ids[k], view.features.row(k).transpose());
  }
  return out;
}

void fuse_M(Matrix& theta_M, std::span<const Matrix* const> received, const Vector& omega,
            double lr) {
  if (received.empty()) return;
  if (omega.size() != static_cast<Eigen::Index>(received.size())) {
    throw ShapeError("fuse_M: one attention per received snapshot");
  }
  Matrix delta = Matrix::Zero(theta_M.rows(), theta_M.cols());
  for (std::size_t j = 0; j < received.size(); ++j) {
    if (omega[j] == 0.0) continue;
    delta += omega[j] * (*received[j] - theta_M);
  }
  theta_M += lr * delta / static_cast<double>(received.size());
}

Matrix middleware_inputs(const Vector& z, const Matrix& two_hop, const CommsConfig& cfg,
                         std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix inputs(cfg.Q + two_hop.rows(), z.size());
  for (int q = 0; q < cfg.Q; ++q) {
    for (Eigen::Index c = 0; c < z.size(); ++c) inputs(q, c) = z[c] + cfg.xi * normal(rng);
  }
  if (two_hop.rows() > 0) inputs.bottomRows(two_hop.rows()) = two_hop;
  return inputs;
}

Matrix middleware_targets(const Matrix& inputs, std::span<const Matrix* const> received,
                          const Vector& omega) {
  const double total = omega.sum();
  Matrix targets = Matrix::Zero(inputs.rows(), received.front()->cols());
  for (std::size_t j = 0; j < received.size(); ++j) {
    if (omega[j] == 0.0) continue;
    targets += (omega[j] / total) * softmax_rows(inputs * *received[j]);
  }
  return targets;
}

double middleware_loss(const Matrix& theta, const Matrix& inputs, const Matrix& targets) {
  const Matrix diff = softmax_rows(inputs * theta) - targets;
  return diff.squaredNorm() / static_cast<double>(diff.size());
}

Matrix middleware_grad(const Matrix& theta, const Matrix& inputs, const Matrix& targets) {
  const Matrix p = softmax_rows(inputs * theta);
  const Matrix dp = 2.0 * (p - targets) / static_cast<double>(p.size());
  const Vector inner = (dp.array() * p.array()).rowwise().sum();
  const Matrix dlogits = (p.array() * (dp.colwise() - inner).array()).matrix();
  return inputs.transpose() * dlogits;
}

Matrix train_middleware(Matrix theta, const Matrix& inputs, const Matrix& targets,
                        const CommsConfig& cfg) {
  for (int step = 0; step < cfg.middleware_steps; ++step) {
    theta -= cfg.middleware_lr * middleware_grad(theta, inputs, targets);
  }
  return theta;
}

bool fuse_D(Matrix& theta_D, std::span<const Matrix* const> received, const Vector& omega,
            const Vector& z, const Matrix& two_hop, double lr, const CommsConfig& cfg,
            std::mt19937_64& rng) {
  if (received.empty()) return false;
  if (omega.size() != static_cast<Eigen::Index>(received.size())) {
    throw ShapeError("fuse_D: one attention per received snapshot");
  }
  if (!(omega.sum() > 0.0)) return false;
  if (cfg.Q + two_hop.rows() == 0) return false;

  const Matrix inputs = middleware_inputs(z, two_hop, cfg, rng);
  const Matrix targets = middleware_targets(inputs, received, omega);
  Matrix start;
  if (cfg.middleware_init == MiddlewareInit::Own) {
    start = theta_D;
  } else {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(z.size(), 1)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    start.resize(theta_D.rows(), theta_D.cols());
    for (Eigen::Index r = 0; r < start.rows(); ++r) {
      for (Eigen::Index c = 0; c < start.cols(); ++c) start(r, c) = dist(rng);
    }
  }
  const Matrix middleware = train_middleware(std::move(start), inputs, targets, cfg);
  theta_D += lr * cfg.fuse_D_direction * (middleware - theta_D);
  return true;
}

namespace {

// Outputs of every received confidence function on every sample, one column
// per neighbor.
Matrix received_logits(std::span<const Vector* const> received, const Matrix& samples) {
  Matrix thetas(samples.cols(), static_cast<Eigen::Index>(received.size()));
  for (std::size_t j = 0; j < received.size(); ++j) thetas.col(static_cast<Eigen::Index>(j)) = *received[j];
  return samples * thetas;
}

}  // namespace

double fuse_N_objective(const Vector& theta_N, std::span<const Vector* const> received,
                        const Vector& omega, const Matrix& samples) {
  if (received.empty() || samples.rows() == 0) return 0.0;
  const Vector own = samples * theta_N;
  const Matrix other = received_logits(received, samples);
  double total = 0.0;
  for (Eigen::Index j = 0; j < other.cols(); ++j) {
    if (omega[j] == 0.0) continue;
    for (Eigen::Index x = 0; x < samples.rows(); ++x) {
      total += omega[j] * std::abs(sigmoid(own[x]) - sigmoid(other(x, j)));
    }
  }
  return total / (static_cast<double>(received.size()) * static_cast<double>(samples.rows()));
}

Vector fuse_N_grad(const Vector& theta_N, std::span<const Vector* const> received,
                   const Vector& omega, const Matrix& samples) {
  Vector grad = Vector::Zero(theta_N.size());
  if (received.empty() || samples.rows() == 0) return grad;
  if (omega.size() != static_cast<Eigen::Index>(received.size())) {
    throw ShapeError("fuse_N: one attention per received snapshot");
  }
  const Vector own = samples * theta_N;
  const Matrix other = received_logits(received, samples);
  Vector coeff = Vector::Zero(samples.rows());
  for (Eigen::Index x = 0; x < samples.rows(); ++x) {
    const double si = sigmoid(own[x]);
    double c = 0.0;
    for (Eigen::Index j = 0; j < other.cols(); ++j) {
      if (omega[j] == 0.0) continue;
      // Matrix-vector and matrix-matrix products can round differently, so
      // near-equal outputs take the zero subgradient instead of a full sign.
      const double diff = si - sigmoid(other(x, j));
      if (std::abs(diff) <= kSignDeadZone) continue;
      c += omega[j] * (diff > 0 ? 1.0 : -1.0);
    }
    coeff[x] = c * si * (1.0 - si);
  }
  grad = samples.transpose() * coeff;
  return grad / (static_cast<double>(received.size()) * static_cast<double>(samples.rows()));
}

void fuse_N(Vector& theta_N, std::span<const Vector* const> received, const Vector& omega,
            const Matrix& samples, double lr) {
  theta_N -= lr * fuse_N_grad(theta_N, received, omega, samples);
}

std::uint64_t agent_round_seed(std::uint64_t seed, std::uint64_t round, NodeId id) {
  return splitmix64(splitmix64(splitmix64(seed) ^ round) ^ static_cast<std::uint64_t>(id));
}

RoundEngine::RoundEngine(AttributedGraph graph, std::vector<AgentState> agents, EngineConfig cfg)
    : graph_(std::move(graph)), agents_(std::move(agents)), cfg_(std::move(cfg)) {
  cfg_.sgd.validate();
  cfg_.comms.validate();
  if (agents_.size() != graph_.num_nodes()) throw PreconditionError("one agent per node required");
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    if (agents_[i].node_id != i) throw PreconditionError("agents must be stored in node order");
    auto nb = graph_.neighbors(static_cast<NodeId>(i));
    if (!std::equal(nb.begin(), nb.end(), agents_[i].neighbors.begin(), agents_[i].neighbors.end())) {
      throw PreconditionError("agent " + std::to_string(i) + " neighbor list does not match graph");
    }
  }
}

std::vector<RoundMessage> RoundEngine::build_outbox() const {
  const bool with_D = fuse_round(round_, cfg_.comms.fuse_D_every);
  std::vector<RoundMessage> outbox(agents_.size());
  for (std::size_t j = 0; j < agents_.size(); ++j) {
    const AgentState& a = agents_[j];
    RoundMessage& m = outbox[j];
    m.sender = a.node_id;
    m.sender_degree = a.degree();
    m.feature = a.feature;
    Matrix nf(a.degree(), a.feature_dim());
    for (int k = 0; k < a.degree(); ++k) nf.row(k) = graph_.features().row(a.neighbors[k]);
    for (int k : sample_out_indices(a, nf, cfg_.comms.rho)) {
      m.sampled_2hop.emplace_back(a.neighbors[k], nf.row(k).transpose());
    }
    m.theta_M_snap = a.theta_M;
    // theta_D snapshots are large; only copy them on rounds that fuse them.
    if (with_D) m.theta_D_snap = a.theta_D;
    m.theta_N_snap = a.theta_N;
  }
  return outbox;
}

NeighborView RoundEngine::build_view(NodeId id, const std::vector<RoundMessage>& outbox) const {
  const AgentState& a = agents_.at(id);
  NeighborView view;
  view.ids = a.neighbors;
  view.self_degree = a.degree();
  view.features.resize(a.degree(), a.feature_dim());
  std::vector<NodeId> seen;
  std::vector<const Vector*> relayed;
  for (int k = 0; k < a.degree(); ++k) {
    const RoundMessage& m = outbox[a.neighbors[k]];
    view.features.row(k) = m.feature.transpose();
    view.degrees.push_back(m.sender_degree);
    for (const auto& [origin, feature] : m.sampled_2hop) {
      if (origin == id || a.slot_of(origin) > 0) continue;
      if (std::find(seen.begin(), seen.end(), origin) != seen.end()) continue;
      seen.push_back(origin);
      relayed.push_back(&feature);
    }
  }
  view.two_hop_ids = seen;
  view.two_hop.resize(static_cast<Eigen::Index>(relayed.size()), a.feature_dim());
  for (std::size_t r = 0; r < relayed.size(); ++r) {
    view.two_hop.row(static_cast<Eigen::Index>(r)) = relayed[r]->transpose();
  }
  return view;
}

LocalLosses RoundEngine::update_agent(AgentState& agent,
                                      const std::vector<RoundMessage>& outbox) const {
  const NeighborView view = build_view(agent.node_id, outbox);
  const PairSamples samples = build_N_samples(agent, view);
  LocalLosses losses = train_local(agent, view, samples, cfg_.sgd);
  if (agent.degree() == 0) return losses;

  const Vector omega = agent.attention.tail(agent.degree());
  if (fuse_round(round_, cfg_.comms.fuse_every)) {
    std::vector<const Matrix*> m_snaps;
    std::vector<const Vector*> n_snaps;
    for (NodeId j : agent.neighbors) {
      m_snaps.push_back(&outbox[j].theta_M_snap);
      n_snaps.push_back(&outbox[j].theta_N_snap);
    }
    fuse_M(agent.theta_M, m_snaps, omega, cfg_.sgd.lr_M);
    Matrix stacked(samples.size(), 2 * agent.feature_dim());
    stacked << samples.positives, samples.negatives;
    fuse_N(agent.theta_N, n_snaps, omega, stacked, cfg_.sgd.lr_N);
  }
  if (fuse_round(round_, cfg_.comms.fuse_D_every)) {
    std::vector<const Matrix*> d_snaps;
    for (NodeId j : agent.neighbors) d_snaps.push_back(&outbox[j].theta_D_snap);
    std::mt19937_64 rng(agent_round_seed(cfg_.seed, round_, agent.node_id));
    const int cap = cfg_.comms.middleware_max_2hop;
    if (cap > 0 && view.two_hop.rows() > cap) {
      std::vector<Eigen::Index> pick(static_cast<std::size_t>(view.two_hop.rows()));
      std::iota(pick.begin(), pick.end(), 0);
      std::shuffle(pick.begin(), pick.end(), rng);
      pick.resize(static_cast<std::size_t>(cap));
      std::sort(pick.begin(), pick.end());
      Matrix kept(cap, agent.feature_dim());
      for (int r = 0; r < cap; ++r) kept.row(r) = view.two_hop.row(pick[r]);
      fuse_D(agent.theta_D, d_snaps, omega, agent.feature, kept, cfg_.sgd.lr_D, cfg_.comms, rng);
    } else {
      fuse_D(agent.theta_D, d_snaps, omega, agent.feature, view.two_hop, cfg_.sgd.lr_D,
             cfg_.comms, rng);
    }
  }
  return losses;
}

LossReport RoundEngine::run_round() {
  std::vector<NodeId> order(agents_.size());
  std::iota(order.begin(), order.end(), 0);
  return run_round(order);
}

LossReport RoundEngine::run_round(std::span<const NodeId> update_order) {
  if (update_order.size() != agents_.size()) throw PreconditionError("update order must cover every agent");
  const std::vector<RoundMessage> outbox = build_outbox();
  messages_sent_ = outbox.size();
  deliveries_ = 2 * graph_.num_edges();

  LossReport report;
  report.agents = agents_.size();
  std::vector<LocalLosses> per_agent(agents_.size());
  for (NodeId id : update_order) {
    AgentState& agent = agents_.at(id);
    try {
      per_agent[id] = update_agent(agent, outbox);
      require_finite_state(agent);
    } catch (const NumericError& e) {
      throw NumericError("agent " + std::to_string(id) + ": " + e.what());
    }
  }
  // Sum in node order so the report does not depend on the update order.
  for (const LocalLosses& l : per_agent) {
    if (l.j_A) {
      report.j_A += *l.j_A;
      ++report.labeled_agents;
    }
    report.j_D += l.j_D;
    report.j_N += l.j_N;
  }
  if (report.labeled_agents > 0) report.j_A /= static_cast<double>(report.labeled_agents);
  if (report.agents > 0) {
    report.j_D /= static_cast<double>(report.agents);
    report.j_N /= static_cast<double>(report.agents);
  }
  if (!std::isfinite(report.j_A) || !std::isfinite(report.j_D) || !std::isfinite(report.j_N)) {
    throw NumericError("round " + std::to_string(round_) + ": non-finite mean loss");
  }
  ++round_;
  return report;
}

void RoundEngine::set_graph(AttributedGraph graph, double new_slot_attention) {
  if (graph.num_nodes() != graph_.num_nodes()) throw PreconditionError("node set must not change");
  graph_ = std::move(graph);
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    reindex_neighbors(agents_[i], graph_.neighbors(static_cast<NodeId>(i)), new_slot_attention);
  }
}

bool ConvergenceMonitor::push(const LossReport& report) {
  history_.push_back(report);
  if (history_.size() <= static_cast<std::size_t>(window_)) return false;
  const LossReport& now = history_.back();
  const LossReport& then = history_[history_.size() - 1 - static_cast<std::size_t>(window_)];
  return std::abs(now.j_A - then.j_A) < tol_ && std::abs(now.j_D - then.j_D) < tol_ &&
         std::abs(now.j_N - then.j_N) < tol_;
}

ConvergenceResult run_until_converged(RoundEngine& engine, const RoundSchedule& schedule,
                                      const RoundCallback& on_round) {
  schedule.validate();
  ConvergenceMonitor monitor(schedule.convergence_window, schedule.convergence_tol);
  ConvergenceResult result;
  for (int r = 0; r < schedule.total_rounds; ++r) {
    const LossReport report = engine.run_round();
    ++result.rounds;
    if (on_round) on_round(engine, report);
    if (monitor.push(report)) {
      result.converged = true;
      break;
    }
  }
  result.history = monitor.history();
  return result;
}

void write_loss_log(const std::filesystem::path& path, const std::vector<LossReport>& history,
                    std::uint64_t first_round) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "round,j_A,j_D,j_N\n";
  for (std::size_t r = 0; r < history.size(); ++r) {
    out << first_round + r << ',' << fmt(history[r].j_A) << ',' << fmt(history[r].j_D) << ','
        << fmt(history[r].j_N) << '\n';
  }
}

std::vector<AttentionPair> attention_pairs(const AttributedGraph& graph,
                                           const std::vector<AgentState>& agents) {
  std::vector<AttentionPair> out;
  out.reserve(graph.num_edges());
  for (const Edge& e : graph.edges()) {
    const int fwd = agents.at(e.u).slot_of(e.v);
    const int bwd = agents.at(e.v).slot_of(e.u);
    if (fwd < 0 || bwd < 0) throw PreconditionError("agents do not match graph topology");
    out.push_back({e, agents[e.u].attention[fwd], agents[e.v].attention[bwd]});
  }
  return out;
}

void write_attention_dump(const std::filesystem::path& path, std::uint64_t round,
                          const std::vector<AttentionPair>& pairs) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "round,i,j,w_ij,w_ji\n";
  for (const AttentionPair& p : pairs) {
    out << round << ',' << p.edge.u << ',' << p.edge.v << ',' << fmt(p.forward) << ','
        << fmt(p.backward) << '\n';
  }
}

}  // namespace gagn
