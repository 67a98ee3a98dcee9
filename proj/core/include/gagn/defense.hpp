#pragma once

#include "gagn/agent.hpp"
#include "gagn/comms.hpp"
#include "gagn/graph.hpp"
#include "gagn/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace gagn {

struct FilterConfig {
  // Fixed screening threshold. When unset, the threshold is the
  // `attention_percentile`-th percentile of edge scores.
  std::optional<double> attention_threshold;
  double attention_percentile = 10.0;
  double confidence_threshold = 0.5;
  int detectors_per_suspect = 3;
  int degree_tolerance = 1;
  // Detector votes needed to flag an edge; 0 means a strict majority of k.
  int votes_required = 0;
  int refinement_rounds = 20;
  // Screening passes; each pass re-screens the graph left by the previous one.
  int iterations = 1;
  std::uint64_t seed = 0;

  void validate() const;
  int required_votes() const { return votes_required > 0 ? votes_required : detectors_per_suspect / 2 + 1; }
};

// Who read what during detection. Parameter reads must always be
// reader == owner; data reads travel over proxy channels.
struct AccessLog {
  enum class Kind { OwnParameters, Parameters, Feature, Attention };
  struct Entry {
    NodeId reader;
    NodeId owner;
    Kind kind;
  };
  std::vector<Entry> entries;

  void record(NodeId reader, NodeId owner, Kind kind) { entries.push_back({reader, owner, kind}); }
  // Count of entries where a node read another node's parameters.
  std::size_t foreign_parameter_reads() const;
};

struct EdgeEvidence {
  Edge edge;
  double attention = 0.0;      // edge_attention score
  int detectors = 0;           // detectors that inspected the edge
  int escalations = 0;         // detectors whose degree check escalated
  double max_degree_deviation = 0.0;
  double mean_confidence = -1.0;  // over escalated detectors; -1 when none
  int votes = 0;
  bool flagged = false;
  std::optional<bool> injected;
};

struct DetectionReport {
  double attention_threshold = 0.0;
  double confidence_threshold = 0.5;
  std::vector<Edge> suspicious_edges;
  std::vector<Edge> flagged_edges;
  std::vector<EdgeEvidence> evidence;
  std::size_t suspects = 0;
  std::size_t proxy_channels = 0;
  // Present when a perturbation record was supplied. The screening rates
  // treat every suspicious edge as flagged.
  std::optional<double> tpr, fpr;
  std::optional<double> screening_tpr, screening_fpr;
  std::vector<std::string> warnings;
};

// Screening score of an edge: min(w_ij, w_ji) over the endpoints that train
// their attention. Agents without a label keep their initial weights and
// have no opinion; nullopt when neither endpoint trains.
std::optional<double> edge_attention(const std::vector<AgentState>& agents, const Edge& e);

// Edge (i,j) is suspicious iff its score is < tau (strict).
std::vector<Edge> screen_attention(const std::vector<AgentState>& agents,
                                   const AttributedGraph& graph, double tau);
// Default threshold: the smallest edge score above the given percentile, so
// the screened set is every edge scoring at or below the percentile.
double default_attention_threshold(const std::vector<AgentState>& agents,
                                   const AttributedGraph& graph, double percentile);

// What a detector learns about a suspect over a proxy channel: the same
// feature data the suspect would send its own neighbors. No parameters.
struct ProxyView {
  NodeId detector = 0;
  NodeId suspect = 0;
  Vector feature;
  int degree = 0;
  std::vector<NodeId> neighbor_ids;
  Matrix neighbor_features;
};

// Throws PreconditionError when the detector is the suspect or adjacent to it.
ProxyView open_proxy_channel(const AttributedGraph& graph, NodeId detector, NodeId suspect,
                             AccessLog* log = nullptr);

// Up to k distinct detectors drawn uniformly from nodes outside
// N(suspect) and the suspect itself. Empty when no node is eligible.
std::vector<NodeId> choose_detectors(const AttributedGraph& graph, NodeId suspect, int k,
                                     std::mt19937_64& rng);

// |argmax D(z_x) + 1 - deg_x| > tol
bool check_degree(const AgentState& detector, const Vector& suspect_feature, int actual_degree,
                  int tol, AccessLog* log = nullptr);

// Mean of both pair orders for each listed neighbor of the suspect.
std::vector<double> pair_confidences(const AgentState& detector, const ProxyView& view,
                                     std::span<const int> neighbor_positions,
                                     AccessLog* log = nullptr);
// Positions (into view.neighbor_ids) whose confidence falls below tau.
std::vector<int> check_confidence(const AgentState& detector, const ProxyView& view,
                                  std::span<const int> neighbor_positions, double tau,
                                  AccessLog* log = nullptr);

// Screening plus proxy-channel checks over the current engine graph.
DetectionReport detect(const std::vector<AgentState>& agents, const AttributedGraph& graph,
                       const FilterConfig& cfg, const PerturbationRecord* record = nullptr,
                       AccessLog* log = nullptr, std::uint64_t pass = 0);

struct FilterResult {
  AttributedGraph filtered;
  DetectionReport report;
  double accuracy_before = 0.0;
  double accuracy_after = 0.0;
};

// Fraction of `nodes` whose agent classifies itself correctly on `graph`.
double classification_accuracy(const std::vector<AgentState>& agents, const AttributedGraph& graph,
                               std::span<const NodeId> nodes);

// Detects, removes flagged edges in one commit, refines for
// cfg.refinement_rounds rounds and reports accuracy on `eval_nodes`.
FilterResult filter_and_classify(RoundEngine& engine, const FilterConfig& cfg,
                                 std::span<const NodeId> eval_nodes,
                                 const PerturbationRecord* record = nullptr,
                                 AccessLog* log = nullptr);

void write_detection_json(const std::filesystem::path& path, const DetectionReport& report);
void write_detection_summary(const std::filesystem::path& path, const DetectionReport& report);

}  // namespace gagn
