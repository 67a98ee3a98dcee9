#include "gagn/graph.hpp"

#include "gagn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>

namespace gagn {

AttributedGraph::AttributedGraph(std::size_t num_nodes, std::vector<Edge> edges, Matrix features,
                                 std::vector<int> labels, int num_classes,
                                 std::vector<bool> label_mask,
                                 std::vector<std::string> original_ids)
    : num_nodes_(num_nodes),
      edges_(std::move(edges)),
      features_(std::move(features)),
      labels_(std::move(labels)),
      num_classes_(num_classes),
      label_mask_(std::move(label_mask)),
      original_ids_(std::move(original_ids)) {
  if (static_cast<std::size_t>(features_.rows()) != num_nodes_) {
    throw SchemaError("feature matrix has " + std::to_string(features_.rows()) +
                      " rows, expected " + std::to_string(num_nodes_));
  }
  if (labels_.size() != num_nodes_) {
    throw SchemaError("label vector has " + std::to_string(labels_.size()) +
                      " entries, expected " + std::to_string(num_nodes_));
  }
  if (num_classes_ < 1) throw SchemaError("graph needs at least one class");
  for (int c : labels_) {
    if (c < 0 || c >= num_classes_) throw SchemaError("label index out of range");
  }
  if (label_mask_.empty()) label_mask_.assign(num_nodes_, true);
  if (label_mask_.size() != num_nodes_) throw SchemaError("label mask size mismatch");
  if (!original_ids_.empty() && original_ids_.size() != num_nodes_) {
    throw SchemaError("original id table size mismatch");
  }
  if (!features_.allFinite()) throw SchemaError("features contain non-finite values");

  for (const Edge& e : edges_) {
    if (e.u == e.v) throw SchemaError("self-loop on node " + std::to_string(e.u));
    if (e.v >= num_nodes_) throw SchemaError("edge endpoint out of range");
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  build_adjacency();
}

void AttributedGraph::build_adjacency() {
  std::vector<std::size_t> degree(num_nodes_, 0);
  for (const Edge& e : edges_) {
    ++degree[e.u];
    ++degree[e.v];
  }
  offsets_.assign(num_nodes_ + 1, 0);
  for (std::size_t i = 0; i < num_nodes_; ++i) offsets_[i + 1] = offsets_[i] + degree[i];
  adjacency_.assign(offsets_.back(), 0);
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (const Edge& e : edges_) {
    adjacency_[cursor[e.u]++] = e.v;
    adjacency_[cursor[e.v]++] = e.u;
  }
  deg_max_ = 0;
  for (std::size_t i = 0; i < num_nodes_; ++i) {
    std::sort(adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]),
              adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]));
    deg_max_ = std::max(deg_max_, static_cast<int>(degree[i]));
  }

  warnings_.clear();
  connected_ = true;
  if (num_nodes_ > 0) {
    const auto dist = bfs_distances(0);
    connected_ = std::none_of(dist.begin(), dist.end(), [](int d) { return d < 0; });
    // A lone node has nobody to talk to, which the agent model cannot use.
    if (num_nodes_ == 1) connected_ = false;
  }
  if (!connected_) warnings_.push_back("graph is not connected");
}

std::span<const NodeId> AttributedGraph::neighbors(NodeId node) const {
  if (node >= num_nodes_) throw PreconditionError("node id out of range");
  return {adjacency_.data() + offsets_[node], offsets_[node + 1] - offsets_[node]};
}

int AttributedGraph::degree(NodeId node) const {
  if (node >= num_nodes_) throw PreconditionError("node id out of range");
  return static_cast<int>(offsets_[node + 1] - offsets_[node]);
}

bool AttributedGraph::has_edge(NodeId a, NodeId b) const {
  if (a >= num_nodes_ || b >= num_nodes_ || a == b) return false;
  auto nb = neighbors(a);
  return std::binary_search(nb.begin(), nb.end(), b);
}

Matrix AttributedGraph::labels_one_hot() const {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(num_nodes_), num_classes_);
  for (std::size_t i = 0; i < num_nodes_; ++i) out(static_cast<Eigen::Index>(i), labels_[i]) = 1.0;
  return out;
}

AttributedGraph AttributedGraph::with_edges(std::vector<Edge> edges) const {
  return AttributedGraph(num_nodes_, std::move(edges), features_, labels_, num_classes_,
                         label_mask_, original_ids_);
}

AttributedGraph AttributedGraph::with_features(Matrix features) const {
  return AttributedGraph(num_nodes_, edges_, std::move(features), labels_, num_classes_,
                         label_mask_, original_ids_);
}

AttributedGraph AttributedGraph::with_label_mask(std::vector<bool> mask) const {
  return AttributedGraph(num_nodes_, edges_, features_, labels_, num_classes_, std::move(mask),
                         original_ids_);
}

std::vector<int> AttributedGraph::bfs_distances(NodeId source) const {
  std::vector<int> dist(num_nodes_, -1);
  if (source >= num_nodes_) return dist;
  std::deque<NodeId> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    NodeId u = queue.front();
    queue.pop_front();
    for (NodeId v : neighbors(u)) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

Matrix degree_bucket_features(const AttributedGraph& graph, int buckets) {
  if (buckets < 1) throw ConfigError("degree_buckets must be >= 1");
  const auto n = static_cast<Eigen::Index>(graph.num_nodes());
  Matrix out = Matrix::Zero(n, buckets);
  const double top = std::log(static_cast<double>(std::max(graph.deg_max(), 1)) + 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int deg = graph.degree(static_cast<NodeId>(i));
    int b = 0;
    if (deg > 0 && top > 0) {
      b = static_cast<int>(std::floor(std::log(deg + 1.0) / top * buckets));
    }
    out(i, std::clamp(b, 0, buckets - 1)) = 1.0;
  }
  return out;
}

AttributedGraph project_features(const AttributedGraph& graph, int dim, std::uint64_t seed) {
  if (dim < 1) throw ConfigError("projection dimension must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
  Matrix proj(graph.feature_dim(), dim);
  for (Eigen::Index r = 0; r < proj.rows(); ++r) {
    for (Eigen::Index c = 0; c < proj.cols(); ++c) proj(r, c) = normal(rng);
  }
  return graph.with_features(graph.features() * proj);
}

AttributedGraph split_labels(const AttributedGraph& graph, double labeled_fraction,
                             std::uint64_t seed) {
  if (labeled_fraction < 0.0 || labeled_fraction > 1.0) {
    throw ConfigError("labeled_fraction must be in [0, 1]");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<bool> mask(graph.num_nodes());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = unit(rng) < labeled_fraction;
  return graph.with_label_mask(std::move(mask));
}

}  // namespace gagn
