#include "gagn/defense.hpp"

#include "gagn/errors.hpp"
#include "gagn/stats.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <unordered_map>
#include <unordered_set>

namespace gagn {
namespace {

constexpr std::uint64_t kDetectorStream = 0x6465746563746f72ULL;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Rates {
  double tpr = 0.0;
  double fpr = 0.0;
};

Rates rates(const std::vector<Edge>& chosen, const AttributedGraph& graph,
            const PerturbationRecord& record) {
  std::size_t injected_present = 0;
  for (const Edge& e : graph.edges()) {
    if (record.is_added(e)) ++injected_present;
  }
  const std::size_t original = graph.num_edges() - injected_present;
  std::size_t tp = 0, fp = 0;
  for (const Edge& e : chosen) {
    if (record.is_added(e)) {
      ++tp;
    } else {
      ++fp;
    }
  }
  Rates r;
  r.tpr = injected_present ? static_cast<double>(tp) / static_cast<double>(injected_present) : 0.0;
  r.fpr = original ? static_cast<double>(fp) / static_cast<double>(original) : 0.0;
  return r;
}

void fill_rates(DetectionReport& report, const AttributedGraph& graph,
                const PerturbationRecord* record) {
  if (!record) return;
  const Rates combined = rates(report.flagged_edges, graph, *record);
  const Rates screening = rates(report.suspicious_edges, graph, *record);
  report.tpr = combined.tpr;
  report.fpr = combined.fpr;
  report.screening_tpr = screening.tpr;
  report.screening_fpr = screening.fpr;
  for (EdgeEvidence& ev : report.evidence) ev.injected = record->is_added(ev.edge);
}

}  // namespace

void FilterConfig::validate() const {
  if (attention_threshold && !std::isfinite(*attention_threshold)) {
    throw ConfigError("attention_threshold must be finite");
  }
  if (!(attention_percentile >= 0.0 && attention_percentile <= 100.0)) {
    throw ConfigError("attention_percentile must be in [0, 100]");
  }
  if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
    throw ConfigError("confidence_threshold must be in [0, 1]");
  }
  if (detectors_per_suspect < 1) throw ConfigError("detectors_per_suspect must be >= 1");
  if (degree_tolerance < 0) throw ConfigError("degree_tolerance must be >= 0");
  if (votes_required < 0 || votes_required > detectors_per_suspect) {
    throw ConfigError("votes_required must be in [0, detectors_per_suspect]");
  }
  if (refinement_rounds < 0) throw ConfigError("refinement_rounds must be >= 0");
  if (iterations < 1) throw ConfigError("filter iterations must be >= 1");
}

std::size_t AccessLog::foreign_parameter_reads() const {
  return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](const Entry& e) {
    return (e.kind == Kind::Parameters || e.kind == Kind::OwnParameters) && e.reader != e.owner;
  }));
}

std::optional<double> edge_attention(const std::vector<AgentState>& agents, const Edge& e) {
  const AgentState& a = agents.at(e.u);
  const AgentState& b = agents.at(e.v);
  const int sa = a.slot_of(e.v);
  const int sb = b.slot_of(e.u);
  if (sa < 0 || sb < 0) throw PreconditionError("agents do not match graph topology");
  if (a.has_label && b.has_label) return std::min(a.attention[sa], b.attention[sb]);
  if (a.has_label) return a.attention[sa];
  if (b.has_label) return b.attention[sb];
  return std::nullopt;
}

std::vector<Edge> screen_attention(const std::vector<AgentState>& agents,
                                   const AttributedGraph& graph, double tau) {
  std::vector<Edge> out;
  for (const Edge& e : graph.edges()) {
    const auto w = edge_attention(agents, e);
    if (w && *w < tau) out.push_back(e);
  }
  return out;
}

double default_attention_threshold(const std::vector<AgentState>& agents,
                                   const AttributedGraph& graph, double percentile) {
  if (graph.num_edges() == 0) throw UnsupportedGraphError("graph has no edges to screen");
  std::vector<double> mins;
  mins.reserve(graph.num_edges());
  for (const Edge& e : graph.edges()) {
    if (auto w = edge_attention(agents, e)) mins.push_back(*w);
  }
  if (mins.empty()) return 0.0;
  // Return the smallest score above the percentile so that, under the strict
  // comparison, edges tied at the percentile (clamped zeros) still screen.
  const double q = stats::percentile(mins, percentile);
  double above = std::numeric_limits<double>::infinity();
  for (double w : mins) {
    if (w > q) above = std::min(above, w);
  }
  return std::isinf(above) ? std::nextafter(q, above) : above;
}

ProxyView open_proxy_channel(const AttributedGraph& graph, NodeId detector, NodeId suspect,
                             AccessLog* log) {
  if (detector == suspect || graph.has_edge(detector, suspect)) {
    throw PreconditionError("detector " + std::to_string(detector) + " is not foreign to suspect " +
                            std::to_string(suspect));
  }
  ProxyView view;
  view.detector = detector;
  view.suspect = suspect;
  view.feature = graph.feature(suspect);
  view.degree = graph.degree(suspect);
  auto nb = graph.neighbors(suspect);
  view.neighbor_ids.assign(nb.begin(), nb.end());
  view.neighbor_features.resize(static_cast<Eigen::Index>(nb.size()), graph.feature_dim());
  for (std::size_t k = 0; k < nb.size(); ++k) {
    view.neighbor_features.row(static_cast<Eigen::Index>(k)) = graph.features().row(nb[k]);
  }
  if (log) {
    log->record(detector, suspect, AccessLog::Kind::Feature);
    for (NodeId u : nb) log->record(detector, u, AccessLog::Kind::Feature);
  }
  return view;
}

std::vector<NodeId> choose_detectors(const AttributedGraph& graph, NodeId suspect, int k,
                                     std::mt19937_64& rng) {
  const std::size_t n = graph.num_nodes();
  const std::size_t eligible = n - static_cast<std::size_t>(graph.degree(suspect)) - 1;
  std::vector<NodeId> out;
  if (eligible == 0) return out;
  const auto want = std::min<std::size_t>(static_cast<std::size_t>(k), eligible);
  if (eligible <= 4 * want) {
    std::vector<NodeId> pool;
    for (NodeId c = 0; c < n; ++c) {
      if (c != suspect && !graph.has_edge(c, suspect)) pool.push_back(c);
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(want);
    return pool;
  }
  std::uniform_int_distribution<NodeId> node(0, static_cast<NodeId>(n - 1));
  while (out.size() < want) {
    const NodeId c = node(rng);
    if (c == suspect || graph.has_edge(c, suspect)) continue;
    if (std::find(out.begin(), out.end(), c) != out.end()) continue;
    out.push_back(c);
  }
  return out;
}

bool check_degree(const AgentState& detector, const Vector& suspect_feature, int actual_degree,
                  int tol, AccessLog* log) {
  if (log) log->record(detector.node_id, detector.node_id, AccessLog::Kind::OwnParameters);
  return std::abs(predicted_degree(detector, suspect_feature) - actual_degree) > tol;
}

std::vector<double> pair_confidences(const AgentState& detector, const ProxyView& view,
                                     std::span<const int> neighbor_positions, AccessLog* log) {
  if (log) log->record(detector.node_id, detector.node_id, AccessLog::Kind::OwnParameters);
  std::vector<double> out;
  out.reserve(neighbor_positions.size());
  for (int pos : neighbor_positions) {
    const Vector zu = view.neighbor_features.row(pos).transpose();
    out.push_back(0.5 * (neighbor_confidence(detector, view.feature, zu) +
                         neighbor_confidence(detector, zu, view.feature)));
  }
  return out;
}

std::vector<int> check_confidence(const AgentState& detector, const ProxyView& view,
                                  std::span<const int> neighbor_positions, double tau,
                                  AccessLog* log) {
  const std::vector<double> conf = pair_confidences(detector, view, neighbor_positions, log);
  std::vector<int> out;
  for (std::size_t k = 0; k < conf.size(); ++k) {
    if (conf[k] < tau) out.push_back(neighbor_positions[k]);
  }
  return out;
}

DetectionReport detect(const std::vector<AgentState>& agents, const AttributedGraph& graph,
                       const FilterConfig& cfg, const PerturbationRecord* record, AccessLog* log,
                       std::uint64_t pass) {
  cfg.validate();
  if (graph.num_edges() == 0) throw UnsupportedGraphError("graph has no edges to filter");
  DetectionReport report;
  report.confidence_threshold = cfg.confidence_threshold;
  report.attention_threshold = cfg.attention_threshold
                                   ? *cfg.attention_threshold
                                   : default_attention_threshold(agents, graph, cfg.attention_percentile);
  report.suspicious_edges = screen_attention(agents, graph, report.attention_threshold);

  std::unordered_map<Edge, std::size_t, EdgeHash> index;
  for (const Edge& e : report.suspicious_edges) {
    index.emplace(e, report.evidence.size());
    EdgeEvidence ev;
    ev.edge = e;
    ev.attention = *edge_attention(agents, e);
    report.evidence.push_back(ev);
  }

  // Every endpoint of a suspicious edge is a suspect; its detectors inspect
  // the suspicious edges it holds.
  std::map<NodeId, std::vector<int>> suspects;
  for (const Edge& e : report.suspicious_edges) {
    const auto nu = graph.neighbors(e.u);
    const auto nv = graph.neighbors(e.v);
    suspects[e.u].push_back(static_cast<int>(std::lower_bound(nu.begin(), nu.end(), e.v) - nu.begin()));
    suspects[e.v].push_back(static_cast<int>(std::lower_bound(nv.begin(), nv.end(), e.u) - nv.begin()));
  }
  report.suspects = suspects.size();

  const int needed = cfg.required_votes();
  std::vector<double> confidence_sum(report.evidence.size(), 0.0);
  for (const auto& [x, positions] : suspects) {
    std::mt19937_64 rng(agent_round_seed(cfg.seed ^ kDetectorStream, pass, x));
    const std::vector<NodeId> detectors = choose_detectors(graph, x, cfg.detectors_per_suspect, rng);
    if (detectors.empty()) {
      report.warnings.push_back("no eligible detector for node " + std::to_string(x));
      continue;
    }
    std::vector<int> votes(positions.size(), 0);
    for (NodeId c : detectors) {
      const ProxyView view = open_proxy_channel(graph, c, x, log);
      ++report.proxy_channels;
      const AgentState& detector = agents.at(c);
      const int deviation = std::abs(predicted_degree(detector, view.feature) - view.degree);
      const bool escalate = check_degree(detector, view.feature, view.degree, cfg.degree_tolerance, log);
      std::vector<double> conf;
      if (escalate) conf = pair_confidences(detector, view, positions, log);
      for (std::size_t k = 0; k < positions.size(); ++k) {
        EdgeEvidence& ev = report.evidence[index.at(Edge(x, view.neighbor_ids[positions[k]]))];
        ++ev.detectors;
        ev.max_degree_deviation = std::max(ev.max_degree_deviation, static_cast<double>(deviation));
        if (!escalate) continue;
        ++ev.escalations;
        confidence_sum[&ev - report.evidence.data()] += conf[k];
        if (conf[k] < cfg.confidence_threshold) ++votes[k];
      }
    }
    for (std::size_t k = 0; k < positions.size(); ++k) {
      EdgeEvidence& ev = report.evidence[index.at(Edge(x, graph.neighbors(x)[positions[k]]))];
      ev.votes = std::max(ev.votes, votes[k]);
      if (votes[k] >= needed) ev.flagged = true;
    }
  }
  for (std::size_t k = 0; k < report.evidence.size(); ++k) {
    EdgeEvidence& ev = report.evidence[k];
    if (ev.escalations > 0) ev.mean_confidence = confidence_sum[k] / ev.escalations;
    if (ev.flagged) report.flagged_edges.push_back(ev.edge);
  }
  fill_rates(report, graph, record);
  return report;
}

double classification_accuracy(const std::vector<AgentState>& agents, const AttributedGraph& graph,
                               std::span<const NodeId> nodes) {
  if (nodes.empty()) return 0.0;
  std::size_t correct = 0;
  for (NodeId i : nodes) {
    const AgentState& a = agents.at(i);
    if (classify(a, direct_view(a, graph)) == graph.label(i)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(nodes.size());
}

FilterResult filter_and_classify(RoundEngine& engine, const FilterConfig& cfg,
                                 std::span<const NodeId> eval_nodes,
                                 const PerturbationRecord* record, AccessLog* log) {
  cfg.validate();
  const AttributedGraph start = engine.graph();
  if (start.num_edges() == 0) throw UnsupportedGraphError("graph has no edges to filter");
  FilterResult result;
  result.accuracy_before = classification_accuracy(engine.agents(), start, eval_nodes);

  DetectionReport merged;
  std::unordered_set<Edge, EdgeHash> suspicious, flagged;
  for (int pass = 0; pass < cfg.iterations; ++pass) {
    DetectionReport report =
        detect(engine.agents(), engine.graph(), cfg, nullptr, log, static_cast<std::uint64_t>(pass));
    if (pass == 0) {
      merged.attention_threshold = report.attention_threshold;
      merged.confidence_threshold = report.confidence_threshold;
    }
    merged.suspects += report.suspects;
    merged.proxy_channels += report.proxy_channels;
    merged.warnings.insert(merged.warnings.end(), report.warnings.begin(), report.warnings.end());
    suspicious.insert(report.suspicious_edges.begin(), report.suspicious_edges.end());
    flagged.insert(report.flagged_edges.begin(), report.flagged_edges.end());
    merged.evidence.insert(merged.evidence.end(), report.evidence.begin(), report.evidence.end());
    if (report.flagged_edges.empty()) break;

    // Single serialized commit of this pass's removals.
    std::vector<Edge> kept;
    std::set_difference(engine.graph().edges().begin(), engine.graph().edges().end(),
                        report.flagged_edges.begin(), report.flagged_edges.end(),
                        std::back_inserter(kept));
    engine.set_graph(engine.graph().with_edges(std::move(kept)));
  }
  merged.suspicious_edges.assign(suspicious.begin(), suspicious.end());
  merged.flagged_edges.assign(flagged.begin(), flagged.end());
  std::sort(merged.suspicious_edges.begin(), merged.suspicious_edges.end());
  std::sort(merged.flagged_edges.begin(), merged.flagged_edges.end());
  fill_rates(merged, start, record);

  for (int r = 0; r < cfg.refinement_rounds; ++r) engine.run_round();
  result.accuracy_after = classification_accuracy(engine.agents(), engine.graph(), eval_nodes);
  result.filtered = engine.graph();
  result.report = std::move(merged);
  return result;
}

void write_detection_json(const std::filesystem::path& path, const DetectionReport& report) {
  nlohmann::ordered_json j;
  j["attention_threshold"] = report.attention_threshold;
  j["confidence_threshold"] = report.confidence_threshold;
  j["suspects"] = report.suspects;
  j["proxy_channels"] = report.proxy_channels;
  j["suspicious"] = report.suspicious_edges.size();
  j["flagged"] = report.flagged_edges.size();
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
  j["tpr"] = opt(report.tpr);
  j["fpr"] = opt(report.fpr);
  j["screening_tpr"] = opt(report.screening_tpr);
  j["screening_fpr"] = opt(report.screening_fpr);
  auto& edges = j["edges"] = nlohmann::ordered_json::array();
  for (const EdgeEvidence& ev : report.evidence) {
    nlohmann::ordered_json e;
    e["u"] = ev.edge.u;
    e["v"] = ev.edge.v;
    e["attention"] = ev.attention;
    e["detectors"] = ev.detectors;
    e["escalations"] = ev.escalations;
    e["max_degree_deviation"] = ev.max_degree_deviation;
    e["mean_confidence"] = ev.escalations > 0 ? nlohmann::ordered_json(ev.mean_confidence) : nlohmann::ordered_json();
    e["votes"] = ev.votes;
    e["flagged"] = ev.flagged;
    if (ev.injected) e["injected"] = *ev.injected;
    edges.push_back(std::move(e));
  }
  j["warnings"] = report.warnings;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_detection_summary(const std::filesystem::path& path, const DetectionReport& report) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string(); };
  out << "attention_threshold,confidence_threshold,suspicious,flagged,suspects,proxy_channels,tpr,"
         "fpr,screening_tpr,screening_fpr\n";
  out << fmt(report.attention_threshold) << ',' << fmt(report.confidence_threshold) << ','
      << report.suspicious_edges.size() << ',' << report.flagged_edges.size() << ','
      << report.suspects << ',' << report.proxy_channels << ',' << opt(report.tpr) << ','
      << opt(report.fpr) << ',' << opt(report.screening_tpr) << ',' << opt(report.screening_fpr)
      << '\n';
}

}  // namespace gagn
