#pragma once

#include "gagn/types.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace gagn {

// Undirected, unweighted attributed graph with dense node ids 0..n-1.
//
// Immutable once built: every edge mutation goes through with_edges(), which
// returns a fresh graph and recomputes degrees, deg_max and the connectivity
// warning. Safe to share read-only across threads.
class AttributedGraph {
 public:
  AttributedGraph() = default;

  // `labels` holds one class index per node in [0, num_classes).
  // Throws SchemaError on self-loops, out-of-range endpoints, bad label
  // indices or a feature row count that does not match num_nodes.
  AttributedGraph(std::size_t num_nodes, std::vector<Edge> edges, Matrix features,
                  std::vector<int> labels, int num_classes, std::vector<bool> label_mask,
                  std::vector<std::string> original_ids = {});

  std::size_t num_nodes() const noexcept { return num_nodes_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  int feature_dim() const noexcept { return static_cast<int>(features_.cols()); }
  int num_classes() const noexcept { return num_classes_; }

  // Sorted, duplicate-free list of canonical (u < v) edges.
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  // Neighbors of `node` in ascending id order.
  std::span<const NodeId> neighbors(NodeId node) const;
  int degree(NodeId node) const;
  int deg_max() const noexcept { return deg_max_; }
  bool has_edge(NodeId a, NodeId b) const;

  const Matrix& features() const noexcept { return features_; }
  Vector feature(NodeId node) const { return features_.row(node).transpose(); }

  const std::vector<int>& labels() const noexcept { return labels_; }
  int label(NodeId node) const { return labels_.at(node); }
  // num_nodes x num_classes one-hot matrix built from the class indices.
  Matrix labels_one_hot() const;

  const std::vector<bool>& label_mask() const noexcept { return label_mask_; }
  bool label_visible(NodeId node) const { return label_mask_.at(node); }

  const std::vector<std::string>& original_ids() const noexcept { return original_ids_; }

  bool connected() const noexcept { return connected_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  // Same nodes, features and labels over a different edge set.
  AttributedGraph with_edges(std::vector<Edge> edges) const;
  AttributedGraph with_features(Matrix features) const;
  AttributedGraph with_label_mask(std::vector<bool> mask) const;

  // Hop distance from `source` to every node; -1 for unreachable nodes.
  std::vector<int> bfs_distances(NodeId source) const;

 private:
  void build_adjacency();

  std::size_t num_nodes_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_;
  std::vector<NodeId> adjacency_;
  int deg_max_ = 0;
  Matrix features_;
  std::vector<int> labels_;
  int num_classes_ = 0;
  std::vector<bool> label_mask_;
  std::vector<std::string> original_ids_;
  bool connected_ = true;
  std::vector<std::string> warnings_;
};

// ---------------------------------------------------------------------------
// Dataset ingestion

enum class DatasetFormat {
  EdgeListCsv,      // <dir>/edges.txt + <dir>/features.csv + <dir>/labels.csv
  Linqs,            // <dir>/<name>.content + <dir>/<name>.cites (raw Cora/Citeseer)
  PlanetoidBinary,  // ind.<name>.* pickles; not supported, convert to CSV first
};

enum class AttributeFreeFeatures { DegreeBuckets, Identity };

struct LoadOptions {
  // Used when the dataset ships no features (Polblogs).
  AttributeFreeFeatures missing_features = AttributeFreeFeatures::DegreeBuckets;
  int degree_buckets = 16;
};

DatasetFormat parse_dataset_format(const std::string& name);

AttributedGraph load_dataset(const std::filesystem::path& path, DatasetFormat format,
                             const LoadOptions& options = {});

// One-hot degree-bucket features: bucket b covers degrees in a log-spaced
// range over [1, deg_max].
Matrix degree_bucket_features(const AttributedGraph& graph, int buckets);

// Seeded Gaussian random projection of the feature matrix down to `dim`
// columns (entries N(0, 1/dim)). Keeps pairwise geometry approximately.
AttributedGraph project_features(const AttributedGraph& graph, int dim, std::uint64_t seed);

// Seeded split: each node's label stays visible with probability
// `labeled_fraction`; the rest become evaluation nodes.
AttributedGraph split_labels(const AttributedGraph& graph, double labeled_fraction,
                             std::uint64_t seed);

// ---------------------------------------------------------------------------
// Perturbation

enum class PerturbStrategy { RandomAdd, RandomRewire, DegreeTargetedAdd };

PerturbStrategy parse_perturb_strategy(const std::string& name);
std::string to_string(PerturbStrategy strategy);

struct PerturbationRecord {
  std::vector<Edge> added_edges;    // sorted
  std::vector<Edge> removed_edges;  // sorted
  double rate = 0.0;

  bool empty() const noexcept { return added_edges.empty() && removed_edges.empty(); }
  bool is_added(const Edge& e) const;
};

struct PerturbResult {
  AttributedGraph graph;
  PerturbationRecord record;
};

// Deterministic in (graph, rate, strategy, seed). Throws CapacityError when
// the graph cannot absorb round(rate * |E|) changes.
PerturbResult perturb(const AttributedGraph& graph, double rate, PerturbStrategy strategy,
                      std::uint64_t seed);

// Degree-preserving double-edge swaps until at least `target_changes` edges
// differ from the input. Gives up after 100 * |E| attempted swaps.
std::vector<Edge> rewire_edges(const std::vector<Edge>& edges, std::size_t num_nodes,
                               std::size_t target_changes, std::uint64_t seed);

// Applies a record to the edge set it was generated from.
std::vector<Edge> apply_record(const std::vector<Edge>& edges, const PerturbationRecord& record);

// ---------------------------------------------------------------------------
// Neighbor-confidence test graphs

struct LabeledPair {
  Edge pair;
  int label = 0;  // 1 = original edge, 0 = not an original edge
};

struct TestGraphs {
  std::vector<LabeledPair> original;     // every original edge, label 1
  std::vector<LabeledPair> random;       // uniformly random pairs, labelled by membership
  std::vector<LabeledPair> rewired;      // edges of a degree-preserving rewiring, label 0
  std::vector<LabeledPair> adversarial;  // injected edges from the record, label 0
};

enum TestGraphSelection : unsigned {
  kTestOriginal = 1u,
  kTestRandom = 2u,
  kTestRewired = 4u,
  kTestAdversarial = 8u,
  kTestAll = 15u,
};

// `graph` is the clean graph the record was produced from. Requesting the
// adversarial set with an empty record throws PreconditionError.
TestGraphs build_test_graphs(const AttributedGraph& graph, const PerturbationRecord& record,
                             std::uint64_t seed, unsigned selection = kTestAll);

// ---------------------------------------------------------------------------
// Synthetic graphs

// Degree-corrected planted-partition graph with bag-of-words features.
// cora_like() fills this with the public Cora statistics.
struct SyntheticSpec {
  std::vector<int> class_sizes;
  std::size_t num_edges = 0;
  double homophily = 0.8;        // fraction of edges inside a class
  double degree_exponent = 2.5;  // Pareto tail of the degree propensities
  int max_propensity_degree = 168;
  int vocabulary = 64;           // feature dimension
  int words_per_node = 12;
  int topic_words = 8;           // class-specific words per class
  double topic_weight = 0.35;    // probability a word is drawn from the class topic
  double labeled_fraction = 1.0;
};

SyntheticSpec cora_like_spec();

// Connected by construction: isolated nodes and stray components are
// attached to the giant component through a same-class edge.
AttributedGraph make_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace gagn
