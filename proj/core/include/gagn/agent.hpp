#pragma once

#include "gagn/graph.hpp"
#include "gagn/types.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

namespace gagn {

// Everything one node stores: its own feature and label, the attention it
// assigns to itself and its neighbors, and the three communicable parameter
// blocks.
//
// attention[0] is the self slot; attention[k + 1] belongs to neighbors[k].
// theta_M is d_z x d_L, theta_D is d_z x deg_max, theta_N has 2 * d_z
// entries. The parameter shapes never change during a run.
struct AgentState {
  NodeId node_id = 0;
  Vector feature;
  int label = -1;
  bool has_label = false;
  std::vector<NodeId> neighbors;
  Vector attention;
  Matrix theta_M;
  Matrix theta_D;
  Vector theta_N;

  int degree() const noexcept { return static_cast<int>(neighbors.size()); }
  int feature_dim() const noexcept { return static_cast<int>(feature.size()); }
  int num_classes() const noexcept { return static_cast<int>(theta_M.cols()); }
  int deg_max() const noexcept { return static_cast<int>(theta_D.cols()); }
  Vector label_one_hot() const;

  // Attention slot for a neighbor id, or -1 when `id` is not a neighbor.
  int slot_of(NodeId id) const;
};

// What an agent sees about its 1-hop neighborhood in one round.
// Rows of `features` and entries of `degrees` follow `ids`, which matches
// the agent's neighbor order. `two_hop` holds relayed features of nodes that
// are neither the agent nor one of its neighbors.
struct NeighborView {
  std::vector<NodeId> ids;
  Matrix features;
  std::vector<int> degrees;
  int self_degree = 0;
  std::vector<NodeId> two_hop_ids;
  Matrix two_hop;

  int size() const noexcept { return static_cast<int>(ids.size()); }
};

struct AgentInit {
  double attention_init = 1e-3;
  // Unlabeled agents never train their aggregator; they keep this uniform
  // weight (1.0 is the plain mean aggregator).
  double unlabeled_attention = 1.0;
};

// theta blocks are drawn i.i.d. uniform in [-1/sqrt(d_z), 1/sqrt(d_z)].
// Throws UnsupportedGraphError when the graph has no edges (deg_max = 0).
AgentState make_agent(const AttributedGraph& graph, NodeId node, const AgentInit& init,
                      std::mt19937_64& rng);
std::vector<AgentState> make_agents(const AttributedGraph& graph, const AgentInit& init,
                                    std::uint64_t seed);

// Rebuilds the neighbor list after edges were removed. Surviving neighbors
// keep their attention; slots for removed neighbors are dropped.
void reindex_neighbors(AgentState& agent, std::span<const NodeId> new_neighbors,
                       double new_slot_attention);

// Self feature followed by neighbor features, one per row.
Matrix stacked_rows(const AgentState& agent, const NeighborView& view);

// w . Concat_rows(z_i, z_j...) / (deg + 1)
Vector aggregate(const AgentState& agent, const NeighborView& view);

// Row-wise numerically stable softmax.
Vector softmax(const Vector& logits);
Matrix softmax_rows(const Matrix& logits);
double sigmoid(double x);

// softmax(x . theta_M)
Vector embed(const AgentState& agent, const Vector& x);
// softmax(x . theta_D); class k means degree k + 1.
Vector infer_degree(const AgentState& agent, const Vector& x);
int predicted_degree(const AgentState& agent, const Vector& x);
// sigmoid(Concat(za, zb) . theta_N)
double neighbor_confidence(const AgentState& agent, const Vector& za, const Vector& zb);
double neighbor_confidence(const Vector& theta_N, const Vector& za, const Vector& zb);

// Predicted class of the agent itself: argmax embed(aggregate(view)).
int classify(const AgentState& agent, const NeighborView& view);

// Builds the view an agent would receive from its current neighbors without
// any 2-hop relay. Used for evaluation outside the round engine.
NeighborView direct_view(const AgentState& agent, const AttributedGraph& graph);

// ---------------------------------------------------------------------------
// Checkpoints
//
// Little-endian binary:
//   "GAGNCKPT" magic, u32 version (=1), u64 round, u64 agent count,
//   u32 d_z, u32 d_L, u32 deg_max,
//   then per agent: u32 node_id, u8 has_label, i32 label, u32 degree,
//   u32[degree] neighbor ids, f64[degree + 1] attention,
//   f64[d_z * d_L] theta_M, f64[d_z * deg_max] theta_D, f64[2 * d_z] theta_N
//   (matrices row-major), then the f64[d_z] feature.
struct Checkpoint {
  std::uint64_t round = 0;
  std::vector<AgentState> agents;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gagn
