#include "gagn/harness.hpp"

#include "gagn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

namespace gagn {
namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

// k distinct ids from [0, n), in draw order.
std::vector<NodeId> draw_nodes(std::size_t n, int k, std::uint64_t seed) {
  std::vector<NodeId> ids(n);
  std::iota(ids.begin(), ids.end(), NodeId{0});
  std::mt19937_64 rng(seed);
  const std::size_t take = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(k, 0)));
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  ids.resize(take);
  return ids;
}

}  // namespace

DegreeTestSets degree_test_sets(const AttributedGraph& graph, NodeId source, int set_size) {
  const std::vector<int> dist = graph.bfs_distances(source);
  std::vector<NodeId> pool;
  for (NodeId v = 0; v < graph.num_nodes(); ++v) {
    if (dist[v] < 0 || dist[v] > 2) pool.push_back(v);
  }
  const auto take = std::min<std::size_t>(pool.size(), static_cast<std::size_t>(set_size));
  DegreeTestSets sets;

  auto by_degree = pool;
  std::stable_sort(by_degree.begin(), by_degree.end(),
                   [&](NodeId a, NodeId b) { return graph.degree(a) > graph.degree(b); });
  sets.large.assign(by_degree.begin(), by_degree.begin() + static_cast<std::ptrdiff_t>(take));

  by_degree = pool;
  std::stable_sort(by_degree.begin(), by_degree.end(),
                   [&](NodeId a, NodeId b) { return graph.degree(a) < graph.degree(b); });
  sets.small.assign(by_degree.begin(), by_degree.begin() + static_cast<std::ptrdiff_t>(take));

  // Unreachable nodes count as farthest.
  auto far = pool;
  auto key = [&](NodeId v) { return dist[v] < 0 ? std::numeric_limits<int>::max() : dist[v]; };
  std::stable_sort(far.begin(), far.end(), [&](NodeId a, NodeId b) { return key(a) > key(b); });
  sets.distant.assign(far.begin(), far.begin() + static_cast<std::ptrdiff_t>(take));
  return sets;
}

DegreeAccuracy eval_degree_inference(const std::vector<AgentState>& agents,
                                     const AttributedGraph& graph, int set_size, int num_agents,
                                     std::uint64_t seed) {
  if (agents.size() != graph.num_nodes()) throw ShapeError("one agent per node expected");
  DegreeAccuracy out;
  out.inference_agents = draw_nodes(graph.num_nodes(), num_agents, seed);

  std::vector<double> large, small, distant;
  auto score = [&](const AgentState& a, const std::vector<NodeId>& nodes, std::vector<double>& acc) {
    if (nodes.empty()) return;
    std::size_t hit = 0;
    for (NodeId v : nodes) {
      if (predicted_degree(a, graph.feature(v)) == graph.degree(v)) ++hit;
    }
    acc.push_back(static_cast<double>(hit) / static_cast<double>(nodes.size()));
  };
  for (NodeId id : out.inference_agents) {
    const DegreeTestSets sets = degree_test_sets(graph, id, set_size);
    if (sets.distant.empty()) {
      out.warnings.push_back("agent " + std::to_string(id) +
                             ": every node is within 2 hops, degree test sets are empty");
    }
    score(agents[id], sets.large, large);
    score(agents[id], sets.small, small);
    score(agents[id], sets.distant, distant);
  }
  if (!large.empty()) out.large = stats::mean(large);
  if (!small.empty()) out.small = stats::mean(small);
  if (!distant.empty()) out.distant = stats::mean(distant);
  return out;
}

double pair_accuracy(const Vector& theta_N, std::span<const LabeledPair> pairs,
                     const Matrix& features, double threshold) {
  if (pairs.empty()) return 0.0;
  const auto dz = features.cols();
  if (theta_N.size() != 2 * dz) throw ShapeError("theta_N does not match the feature dimension");
  // Concat(a, b) . theta = a . head + b . tail, so score every node once.
  const Vector head = features * theta_N.head(dz);
  const Vector tail = features * theta_N.tail(dz);
  std::size_t correct = 0;
  for (const LabeledPair& p : pairs) {
    const double c = 0.5 * (sigmoid(head[p.pair.u] + tail[p.pair.v]) +
                            sigmoid(head[p.pair.v] + tail[p.pair.u]));
    if ((c >= threshold ? 1 : 0) == p.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

ConfidenceAccuracy eval_neighbor_confidence(const std::vector<AgentState>& agents,
                                            const TestGraphs& tests, const Matrix& features,
                                            int num_evaluators, std::uint64_t seed) {
  ConfidenceAccuracy out;
  out.evaluators = draw_nodes(agents.size(), num_evaluators, seed);
  auto score = [&](const std::vector<LabeledPair>& pairs) -> std::optional<double> {
    if (pairs.empty() || out.evaluators.empty()) return std::nullopt;
    double sum = 0.0;
    for (NodeId id : out.evaluators) sum += pair_accuracy(agents[id].theta_N, pairs, features);
    return sum / static_cast<double>(out.evaluators.size());
  };
  out.original = score(tests.original);
  out.random = score(tests.random);
  out.rewired = score(tests.rewired);
  out.adversarial = score(tests.adversarial);
  return out;
}

SymmetryStats eval_attention_symmetry(std::span<const AttentionPair> pairs) {
  SymmetryStats out;
  out.edges = pairs.size();
  std::vector<double> fwd, bwd;
  fwd.reserve(pairs.size());
  bwd.reserve(pairs.size());
  double total = 0.0;
  for (const AttentionPair& p : pairs) {
    fwd.push_back(p.forward);
    bwd.push_back(p.backward);
    const double delta = std::abs(p.forward - p.backward);
    total += delta;
    out.max_abs_delta = std::max(out.max_abs_delta, delta);
  }
  if (!pairs.empty()) out.mean_abs_delta = total / static_cast<double>(pairs.size());
  if (pairs.size() >= 2) out.pearson = stats::pearson(fwd, bwd);

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pairs[a].forward < pairs[b].forward; });
  out.curve.reserve(order.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const AttentionPair& p = pairs[order[rank]];
    out.curve.push_back({rank, p.edge, p.forward, p.backward});
  }
  return out;
}

std::vector<AttentionPair> labeled_pairs(std::span<const AttentionPair> pairs,
                                         const std::vector<AgentState>& agents) {
  std::vector<AttentionPair> out;
  for (const AttentionPair& p : pairs) {
    if (agents.at(p.edge.u).has_label && agents.at(p.edge.v).has_label) out.push_back(p);
  }
  return out;
}

void write_symmetry_curve(const std::filesystem::path& path, const SymmetryStats& stats) {
  std::ofstream out = open_out(path);
  out << "index,i,j,forward,backward\n";
  for (const SymmetryPoint& p : stats.curve) {
    out << p.index << ',' << p.edge.u << ',' << p.edge.v << ',' << fmt(p.forward) << ','
        << fmt(p.backward) << '\n';
  }
}

std::optional<AttentionSeparation> eval_attention_separation(const std::vector<AgentState>& agents,
                                                             const AttributedGraph& graph,
                                                             const PerturbationRecord& record) {
  std::vector<double> injected, original;
  for (const Edge& e : graph.edges()) {
    if (auto w = edge_attention(agents, e)) (record.is_added(e) ? injected : original).push_back(*w);
  }
  if (injected.empty() || original.empty()) return std::nullopt;
  AttentionSeparation out;
  out.injected = injected.size();
  out.original = original.size();
  out.mean_injected = stats::mean(injected);
  out.mean_original = stats::mean(original);
  out.test = stats::mann_whitney_less(injected, original);
  return out;
}

Matrix embedding_matrix(const std::vector<AgentState>& agents, const AttributedGraph& graph) {
  if (agents.size() != graph.num_nodes()) throw ShapeError("one agent per node expected");
  const int classes = agents.empty() ? 0 : agents.front().num_classes();
  Matrix out(static_cast<Eigen::Index>(agents.size()), classes);
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const AgentState& a = agents[i];
    out.row(static_cast<Eigen::Index>(i)) = embed(a, aggregate(a, direct_view(a, graph))).transpose();
  }
  return out;
}

void export_embeddings(const std::filesystem::path& path, const std::vector<AgentState>& agents,
                       const AttributedGraph& graph) {
  const Matrix emb = embedding_matrix(agents, graph);
  std::ofstream out = open_out(path);
  out << "node,label";
  for (Eigen::Index k = 0; k < emb.cols(); ++k) out << ",p" << k;
  out << '\n';
  for (Eigen::Index i = 0; i < emb.rows(); ++i) {
    out << i << ',' << graph.label(static_cast<NodeId>(i));
    for (Eigen::Index k = 0; k < emb.cols(); ++k) out << ',' << fmt(emb(i, k));
    out << '\n';
  }
}

std::vector<RocPoint> roc_sweep(const std::vector<AgentState>& agents, const AttributedGraph& graph,
                                const PerturbationRecord& record, std::span<const double> thresholds) {
  std::vector<double> injected, original;
  for (const Edge& e : graph.edges()) {
    if (auto w = edge_attention(agents, e)) (record.is_added(e) ? injected : original).push_back(*w);
  }
  std::sort(injected.begin(), injected.end());
  std::sort(original.begin(), original.end());
  auto below = [](const std::vector<double>& sorted, double tau) {
    if (sorted.empty()) return 0.0;
    const auto n = std::lower_bound(sorted.begin(), sorted.end(), tau) - sorted.begin();
    return static_cast<double>(n) / static_cast<double>(sorted.size());
  };
  std::vector<RocPoint> out;
  out.reserve(thresholds.size());
  for (double tau : thresholds) out.push_back({tau, below(original, tau), below(injected, tau)});
  return out;
}

std::vector<double> roc_thresholds(const std::vector<AgentState>& agents,
                                   const AttributedGraph& graph, int points) {
  if (points < 2) throw ConfigError("an ROC sweep needs at least two points");
  std::vector<double> mins;
  mins.reserve(graph.num_edges());
  for (const Edge& e : graph.edges()) {
    if (auto w = edge_attention(agents, e)) mins.push_back(*w);
  }
  if (mins.empty()) return {};
  std::vector<double> out;
  for (int k = 0; k < points - 1; ++k) {
    out.push_back(stats::percentile(mins, 100.0 * k / (points - 1)));
  }
  out.push_back(std::nextafter(*std::max_element(mins.begin(), mins.end()),
                               std::numeric_limits<double>::infinity()));
  return out;
}

void write_roc(const std::filesystem::path& path, std::span<const RocPoint> points) {
  std::ofstream out = open_out(path);
  out << "threshold,fpr,tpr\n";
  for (const RocPoint& p : points) out << fmt(p.threshold) << ',' << fmt(p.fpr) << ',' << fmt(p.tpr) << '\n';
}

}  // namespace gagn
