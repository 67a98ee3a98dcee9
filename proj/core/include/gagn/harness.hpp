#pragma once

#include "gagn/agent.hpp"
#include "gagn/comms.hpp"
#include "gagn/config.hpp"
#include "gagn/defense.hpp"
#include "gagn/graph.hpp"
#include "gagn/stats.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gagn {

// ---------------------------------------------------------------------------
// Evaluation

struct DegreeAccuracy {
  // Highest-degree, lowest-degree and farthest nodes outside each inference
  // agent's 2-hop ball, averaged over the inference agents. nullopt when a
  // set came out empty for every agent.
  std::optional<double> large, small, distant;
  std::vector<NodeId> inference_agents;
  std::vector<std::string> warnings;
};

// `num_agents` inference agents are drawn without replacement from `seed`.
// Accuracy counts exact matches of predicted_degree against the degree in
// `graph`.
DegreeAccuracy eval_degree_inference(const std::vector<AgentState>& agents,
                                     const AttributedGraph& graph, int set_size, int num_agents,
                                     std::uint64_t seed);

// Nodes outside `source`'s 2-hop ball, ordered for the three test sets.
struct DegreeTestSets {
  std::vector<NodeId> large, small, distant;
};
DegreeTestSets degree_test_sets(const AttributedGraph& graph, NodeId source, int set_size);

struct ConfidenceAccuracy {
  std::optional<double> original, random, rewired, adversarial;
  std::vector<NodeId> evaluators;
};

// A pair counts as predicted-neighbor when the mean of both orders reaches
// 0.5. Each evaluator scores every pair; per-set accuracies are averaged
// over evaluators. Empty sets give nullopt.
ConfidenceAccuracy eval_neighbor_confidence(const std::vector<AgentState>& agents,
                                            const TestGraphs& tests, const Matrix& features,
                                            int num_evaluators, std::uint64_t seed);
double pair_accuracy(const Vector& theta_N, std::span<const LabeledPair> pairs,
                     const Matrix& features, double threshold = 0.5);

struct SymmetryPoint {
  std::size_t index = 0;  // rank by forward attention
  Edge edge;
  double forward = 0.0;
  double backward = 0.0;
};

struct SymmetryStats {
  std::optional<double> pearson;
  std::size_t edges = 0;
  double mean_abs_delta = 0.0;
  double max_abs_delta = 0.0;
  std::vector<SymmetryPoint> curve;  // sorted by forward attention, ascending
};

SymmetryStats eval_attention_symmetry(std::span<const AttentionPair> pairs);
// Pairs whose endpoints both train their attention.
std::vector<AttentionPair> labeled_pairs(std::span<const AttentionPair> pairs,
                                         const std::vector<AgentState>& agents);
void write_symmetry_curve(const std::filesystem::path& path, const SymmetryStats& stats);

struct AttentionSeparation {
  double mean_injected = 0.0;
  double mean_original = 0.0;
  std::size_t injected = 0;
  std::size_t original = 0;
  stats::MannWhitney test;
};

// Screening scores (edge_attention) of injected versus original edges of `graph`.
// nullopt when either group is empty.
std::optional<AttentionSeparation> eval_attention_separation(const std::vector<AgentState>& agents,
                                                             const AttributedGraph& graph,
                                                             const PerturbationRecord& record);

// num_nodes rows: node,label,p_0..p_{L-1} with p = embed(aggregate(direct view)).
Matrix embedding_matrix(const std::vector<AgentState>& agents, const AttributedGraph& graph);
void export_embeddings(const std::filesystem::path& path, const std::vector<AgentState>& agents,
                       const AttributedGraph& graph);

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

// Screening only. Thresholds are used as given, in order.
std::vector<RocPoint> roc_sweep(const std::vector<AgentState>& agents, const AttributedGraph& graph,
                                const PerturbationRecord& record, std::span<const double> thresholds);
// `points` thresholds from the edge score quantiles, starting at
// the minimum (nothing flagged) and ending just above the maximum.
std::vector<double> roc_thresholds(const std::vector<AgentState>& agents,
                                   const AttributedGraph& graph, int points);
void write_roc(const std::filesystem::path& path, std::span<const RocPoint> points);

// ---------------------------------------------------------------------------
// Scenario orchestration

struct Scenario {
  AttributedGraph clean;  // after projection and label split
  AttributedGraph graph;  // what the agents train on
  PerturbationRecord record;
  std::vector<NodeId> eval_nodes;
  std::uint64_t seed = 0;  // repeat seed
};

std::uint64_t repeat_seed(std::uint64_t base, int repeat);
AttributedGraph load_base_graph(const DatasetConfig& cfg);
std::vector<NodeId> select_eval_nodes(const AttributedGraph& graph, EvalSplit split);

// The base graph is built once per experiment; repeats differ in the model
// seed and the perturbation seed.
Scenario prepare_scenario(const ExperimentConfig& cfg, const AttributedGraph& base, int repeat);
Scenario prepare_scenario(const ExperimentConfig& cfg, int repeat);

RoundEngine make_engine(const Scenario& scenario, const ExperimentConfig& cfg);
// Throws PreconditionError when the checkpoint does not match the scenario graph.
RoundEngine engine_from_checkpoint(const Scenario& scenario, const ExperimentConfig& cfg,
                                   Checkpoint checkpoint);

// Runs the schedule, honoring the embedding and checkpoint cadence when
// `out_dir` is non-empty.
ConvergenceResult train(RoundEngine& engine, const ExperimentConfig& cfg,
                        const std::filesystem::path& out_dir = {});

struct RepeatMetrics {
  int repeat = 0;
  std::uint64_t seed = 0;
  int rounds = 0;
  bool converged = false;
  LossReport final_loss;
  double accuracy = 0.0;  // trained agents, before any filtering
  std::optional<double> accuracy_no_filter;
  std::optional<double> accuracy_filtered;
  std::optional<double> tpr, fpr, screening_tpr, screening_fpr;
  std::size_t suspicious = 0;
  std::size_t flagged = 0;
  SymmetryStats symmetry;
  DegreeAccuracy degree;
  ConfidenceAccuracy confidence;
  std::optional<AttentionSeparation> separation;
  std::vector<LossReport> history;
  std::vector<std::string> warnings;
  double train_seconds = 0.0;  // not exported
};

struct MetricsBundle {
  std::size_t num_nodes = 0;
  std::size_t num_edges = 0;
  int num_classes = 0;
  int feature_dim = 0;
  std::size_t eval_nodes = 0;
  std::vector<RepeatMetrics> repeats;
};

// Metrics computed from trained agents, without filtering.
RepeatMetrics evaluate(const RoundEngine& engine, const Scenario& scenario,
                       const ExperimentConfig& cfg);

// Trains, evaluates, filters and writes the per-repeat exports under `out_dir`.
// Progress lines go to `log` when given.
RepeatMetrics run_repeat(const ExperimentConfig& cfg, const AttributedGraph& base, int repeat,
                         const std::filesystem::path& out_dir, std::ostream* log = nullptr);

// Every repeat, then metrics.json, metrics.csv and the resolved config in
// cfg.run.output_dir. Repeats run concurrently up to the hardware thread count.
MetricsBundle run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr);

// Values of one metric across repeats, skipping repeats where it is absent.
std::vector<double> collect(const MetricsBundle& bundle,
                            const std::function<std::optional<double>(const RepeatMetrics&)>& get);
// "85.41±0.16" style: mean and half-range scaled by 100.
std::string format_percent(const stats::Summary& s);

void write_metrics_json(const std::filesystem::path& path, const MetricsBundle& bundle);
void write_metrics_csv(const std::filesystem::path& path, const MetricsBundle& bundle);

}  // namespace gagn
