#include "gagn/agent.hpp"

#include "gagn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gagn {
namespace {

void require_finite(const Vector& x, const char* what) {
  if (!x.allFinite()) throw NumericError(std::string(what) + ": non-finite input");
}

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  // Row-major fill order keeps the draw sequence independent of Eigen storage.
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  }
  return m;
}

}  // namespace

Vector AgentState::label_one_hot() const {
  Vector out = Vector::Zero(num_classes());
  if (label >= 0 && label < num_classes()) out[label] = 1.0;
  return out;
}

int AgentState::slot_of(NodeId id) const {
  auto it = std::lower_bound(neighbors.begin(), neighbors.end(), id);
  if (it == neighbors.end() || *it != id) return -1;
  return static_cast<int>(it - neighbors.begin()) + 1;
}

AgentState make_agent(const AttributedGraph& graph, NodeId node, const AgentInit& init,
                      std::mt19937_64& rng) {
  if (graph.deg_max() < 1) {
    throw UnsupportedGraphError("graph has no edges: degree inference has no classes");
  }
  AgentState agent;
  agent.node_id = node;
  agent.feature = graph.feature(node);
  agent.label = graph.label(node);
  agent.has_label = graph.label_visible(node);
  auto nb = graph.neighbors(node);
  agent.neighbors.assign(nb.begin(), nb.end());
  const double w = agent.has_label ? init.attention_init : init.unlabeled_attention;
  agent.attention = Vector::Constant(agent.degree() + 1, w);

  const auto dz = static_cast<Eigen::Index>(graph.feature_dim());
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(dz, 1)));
  agent.theta_M = uniform_matrix(dz, graph.num_classes(), bound, rng);
  agent.theta_D = uniform_matrix(dz, graph.deg_max(), bound, rng);
  agent.theta_N = uniform_matrix(2 * dz, 1, bound, rng).col(0);
  return agent;
}

std::vector<AgentState> make_agents(const AttributedGraph& graph, const AgentInit& init,
                                    std::uint64_t seed) {
  std::vector<AgentState> agents;
  agents.reserve(graph.num_nodes());
  std::mt19937_64 rng(seed);
  for (NodeId i = 0; i < graph.num_nodes(); ++i) {
    // One stream per agent so agent i's draws do not depend on graph size.
    std::mt19937_64 agent_rng(rng());
    agents.push_back(make_agent(graph, i, init, agent_rng));
  }
  return agents;
}

void reindex_neighbors(AgentState& agent, std::span<const NodeId> new_neighbors,
                       double new_slot_attention) {
  Vector attention(static_cast<Eigen::Index>(new_neighbors.size()) + 1);
  attention[0] = agent.attention[0];
  for (std::size_t k = 0; k < new_neighbors.size(); ++k) {
    const int slot = agent.slot_of(new_neighbors[k]);
    attention[static_cast<Eigen::Index>(k) + 1] = slot > 0 ? agent.attention[slot] : new_slot_attention;
  }
  agent.neighbors.assign(new_neighbors.begin(), new_neighbors.end());
  agent.attention = std::move(attention);
}

Matrix stacked_rows(const AgentState& agent, const NeighborView& view) {
  Matrix rows(view.size() + 1, agent.feature_dim());
  rows.row(0) = agent.feature.transpose();
  if (view.size() > 0) rows.bottomRows(view.size()) = view.features;
  return rows;
}

Vector aggregate(const AgentState& agent, const NeighborView& view) {
  if (agent.attention.size() != view.size() + 1) {
    throw ShapeError("attention has " + std::to_string(agent.attention.size()) +
                     " slots for " + std::to_string(view.size()) + " neighbors");
  }
  if (view.size() > 0 && view.features.cols() != agent.feature.size()) {
    throw ShapeError("neighbor feature dimension mismatch");
  }
  Vector out = agent.attention[0] * agent.feature;
  for (int k = 0; k < view.size(); ++k) {
    out.noalias() += agent.attention[k + 1] * view.features.row(k).transpose();
  }
  return out / static_cast<double>(view.size() + 1);
}

Vector softmax(const Vector& logits) {
  const double top = logits.maxCoeff();
  Vector e = (logits.array() - top).exp().matrix();
  return e / e.sum();
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out = logits;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double top = row.maxCoeff();
    row = (row.array() - top).exp().matrix();
    row /= row.sum();
  }
  return out;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector embed(const AgentState& agent, const Vector& x) {
  require_finite(x, "embed");
  if (x.size() != agent.theta_M.rows()) throw ShapeError("embed: input dimension mismatch");
  return softmax(agent.theta_M.transpose() * x);
}

Vector infer_degree(const AgentState& agent, const Vector& x) {
  require_finite(x, "infer_degree");
  if (x.size() != agent.theta_D.rows()) throw ShapeError("infer_degree: input dimension mismatch");
  return softmax(agent.theta_D.transpose() * x);
}

int predicted_degree(const AgentState& agent, const Vector& x) {
  Eigen::Index best = 0;
  infer_degree(agent, x).maxCoeff(&best);
  return static_cast<int>(best) + 1;
}

double neighbor_confidence(const Vector& theta_N, const Vector& za, const Vector& zb) {
  require_finite(za, "neighbor_confidence");
  require_finite(zb, "neighbor_confidence");
  const auto dz = za.size();
  if (zb.size() != dz || theta_N.size() != 2 * dz) {
    throw ShapeError("neighbor_confidence: dimension mismatch");
  }
  return sigmoid(theta_N.head(dz).dot(za) + theta_N.tail(dz).dot(zb));
}

double neighbor_confidence(const AgentState& agent, const Vector& za, const Vector& zb) {
  return neighbor_confidence(agent.theta_N, za, zb);
}

int classify(const AgentState& agent, const NeighborView& view) {
  Eigen::Index best = 0;
  embed(agent, aggregate(agent, view)).maxCoeff(&best);
  return static_cast<int>(best);
}

NeighborView direct_view(const AgentState& agent, const AttributedGraph& graph) {
  NeighborView view;
  view.ids = agent.neighbors;
  view.self_degree = agent.degree();
  view.features.resize(static_cast<Eigen::Index>(agent.neighbors.size()), graph.feature_dim());
  for (std::size_t k = 0; k < agent.neighbors.size(); ++k) {
    view.features.row(static_cast<Eigen::Index>(k)) = graph.features().row(agent.neighbors[k]);
    view.degrees.push_back(graph.degree(agent.neighbors[k]));
  }
  view.two_hop.resize(0, graph.feature_dim());
  return view;
}

}  // namespace gagn
