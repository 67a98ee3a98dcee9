#pragma once

#include "gagn/agent.hpp"
#include "gagn/graph.hpp"
#include "gagn/learning.hpp"
#include "gagn/types.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace gagn {

// Own starts the middleware from the agent's current theta_D, which makes
// neighborhood agreement an exact fixed point of the fusion.
enum class MiddlewareInit { Random, Own };

struct CommsConfig {
  int rho = 5;
  // Fusion of theta_D: Q perturbed copies of z_i with spread xi, plus the
  // relayed 2-hop features, are the middleware's training inputs.
  int Q = 10;
  double xi = 0.05;
  int middleware_steps = 50;
  double middleware_lr = 0.05;
  MiddlewareInit middleware_init = MiddlewareInit::Own;
  // 0 keeps every relayed 2-hop feature as a middleware input.
  int middleware_max_2hop = 0;
  // +1 moves theta_D toward the middleware, -1 away from it.
  double fuse_D_direction = 1.0;
  // Fusion runs on rounds where round % every == 0.
  int fuse_every = 1;
  int fuse_D_every = 1;

  void validate() const;
};

// One broadcast per sender per round; delivered to each of its deg neighbors.
// Parameter blocks are copies taken at round start.
struct RoundMessage {
  NodeId sender = 0;
  int sender_degree = 0;
  Vector feature;
  std::vector<std::pair<NodeId, Vector>> sampled_2hop;
  Matrix theta_M_snap;
  Matrix theta_D_snap;
  Vector theta_N_snap;
};

struct RoundSchedule {
  int total_rounds = 300;
  int convergence_window = 10;
  double convergence_tol = 1e-4;

  void validate() const;
};

// Neighbor positions (indices into agent.neighbors) that go into the
// agent's outbound 2-hop sample. Everything when deg <= rho, otherwise the
// rho neighbors farthest from z_i, ties to the lower node id. Returned in
// selection order.
std::vector<int> sample_out_indices(const AgentState& agent, const Matrix& neighbor_features,
                                    int rho);
std::vector<std::pair<NodeId, Vector>> sample_out(const AgentState& agent,
                                                  const NeighborView& view, int rho);

// theta_M += lr * sum_j omega_j (theta_j - theta_M) / |N|
void fuse_M(Matrix& theta_M, std::span<const Matrix* const> received, const Vector& omega,
            double lr);

// Middleware inputs: Q Gaussian perturbations of z, then the 2-hop rows.
Matrix middleware_inputs(const Vector& z, const Matrix& two_hop, const CommsConfig& cfg,
                         std::mt19937_64& rng);
// Attention-weighted mean of softmax(inputs * theta_j).
Matrix middleware_targets(const Matrix& inputs, std::span<const Matrix* const> received,
                          const Vector& omega);
// Mean squared entry error between softmax(inputs * theta) and targets.
double middleware_loss(const Matrix& theta, const Matrix& inputs, const Matrix& targets);
Matrix middleware_grad(const Matrix& theta, const Matrix& inputs, const Matrix& targets);
Matrix train_middleware(Matrix theta, const Matrix& inputs, const Matrix& targets,
                        const CommsConfig& cfg);

// Trains a middleware against the received degree functions, then moves
// theta_D by lr * direction * (middleware - theta_D). Returns false and leaves
// theta_D alone when nothing was received, every attention is zero, or there
// are no middleware inputs.
bool fuse_D(Matrix& theta_D, std::span<const Matrix* const> received, const Vector& omega,
            const Vector& z, const Matrix& two_hop, double lr, const CommsConfig& cfg,
            std::mt19937_64& rng);

// sum_x sum_j omega_j |N_i(x) - N_j(x)| / (deg * |samples|)
double fuse_N_objective(const Vector& theta_N, std::span<const Vector* const> received,
                        const Vector& omega, const Matrix& samples);
Vector fuse_N_grad(const Vector& theta_N, std::span<const Vector* const> received,
                   const Vector& omega, const Matrix& samples);
// One descent step on the objective above. `samples` holds the round's
// positive and negative pairs stacked.
void fuse_N(Vector& theta_N, std::span<const Vector* const> received, const Vector& omega,
            const Matrix& samples, double lr);

struct EngineConfig {
  SgdConfig sgd;
  CommsConfig comms;
  std::uint64_t seed = 0;
};

// Seed for agent `id` in round `round`; independent of processing order.
std::uint64_t agent_round_seed(std::uint64_t seed, std::uint64_t round, NodeId id);

// Synchronous two-phase rounds. Phase one builds every outbound message from
// the state at round start; phase two updates each agent from its inbox.
class RoundEngine {
 public:
  RoundEngine(AttributedGraph graph, std::vector<AgentState> agents, EngineConfig cfg);

  LossReport run_round();
  // Same round with an explicit update order (a permutation of node ids).
  LossReport run_round(std::span<const NodeId> update_order);

  // Replaces the topology (node set and features unchanged). Agents keep
  // attention for surviving neighbors.
  void set_graph(AttributedGraph graph, double new_slot_attention = 1.0);

  const AttributedGraph& graph() const noexcept { return graph_; }
  const std::vector<AgentState>& agents() const noexcept { return agents_; }
  std::vector<AgentState>& agents() noexcept { return agents_; }
  const EngineConfig& config() const noexcept { return cfg_; }
  std::uint64_t round() const noexcept { return round_; }
  void set_round(std::uint64_t round) noexcept { round_ = round; }

  // Messages built and deliveries made in the last round.
  std::size_t messages_sent() const noexcept { return messages_sent_; }
  std::size_t deliveries() const noexcept { return deliveries_; }

  // The view agent `id` would assemble from the given outbox.
  NeighborView build_view(NodeId id, const std::vector<RoundMessage>& outbox) const;
  std::vector<RoundMessage> build_outbox() const;

 private:
  LocalLosses update_agent(AgentState& agent, const std::vector<RoundMessage>& outbox) const;

  AttributedGraph graph_;
  std::vector<AgentState> agents_;
  EngineConfig cfg_;
  std::uint64_t round_ = 0;
  std::size_t messages_sent_ = 0;
  std::size_t deliveries_ = 0;
};

class ConvergenceMonitor {
 public:
  ConvergenceMonitor(int window, double tol) : window_(window), tol_(tol) {}

  // True once every mean loss moved by less than tol across the last window.
  bool push(const LossReport& report);
  const std::vector<LossReport>& history() const noexcept { return history_; }

 private:
  int window_;
  double tol_;
  std::vector<LossReport> history_;
};

struct ConvergenceResult {
  int rounds = 0;
  bool converged = false;
  std::vector<LossReport> history;
};

using RoundCallback = std::function<void(const RoundEngine&, const LossReport&)>;

ConvergenceResult run_until_converged(RoundEngine& engine, const RoundSchedule& schedule,
                                      const RoundCallback& on_round = {});

// round,j_A,j_D,j_N
void write_loss_log(const std::filesystem::path& path, const std::vector<LossReport>& history,
                    std::uint64_t first_round = 0);

struct AttentionPair {
  Edge edge;
  double forward = 0.0;   // weight u assigns to v
  double backward = 0.0;  // weight v assigns to u
};

std::vector<AttentionPair> attention_pairs(const AttributedGraph& graph,
                                           const std::vector<AgentState>& agents);
// round,i,j,w_ij,w_ji
void write_attention_dump(const std::filesystem::path& path, std::uint64_t round,
                          const std::vector<AttentionPair>& pairs);

}  // namespace gagn
