#include "fixtures.hpp"

#include "gagn/defense.hpp"
#include "gagn/errors.hpp"

#include <set>

using namespace gagn;

namespace {

struct Net {
  AttributedGraph graph;
  std::vector<AgentState> agents;
};

Net network(std::uint64_t seed = 1) {
  Net n;
  n.graph = fx::small_synthetic(seed);
  n.agents = make_agents(n.graph, {}, seed);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> w(0.0, 1.0);
  for (auto& a : n.agents) {
    for (Eigen::Index k = 0; k < a.attention.size(); ++k) a.attention[k] = w(rng);
  }
  return n;
}

// Detectors that predict degree 1 for everything and give every pair 0.5.
void flatten(std::vector<AgentState>& agents) {
  for (auto& a : agents) {
    a.theta_D.setZero();
    a.theta_N.setZero();
  }
}

}  // namespace

TEST_CASE("edge score uses trained endpoints only") {
  const AttributedGraph g = fx::path_graph(3).with_label_mask({true, true, false});
  auto agents = make_agents(g, {}, 1);
  agents[0].attention << 1.0, 0.3;
  agents[1].attention << 1.0, 0.7, 0.2;
  agents[2].attention << 1.0, 0.05;
  CHECK(*edge_attention(agents, {0, 1}) == doctest::Approx(0.3));
  CHECK(*edge_attention(agents, {1, 2}) == doctest::Approx(0.2));
  auto unlabeled = make_agents(g.with_label_mask({false, false, false}), {}, 1);
  CHECK_FALSE(edge_attention(unlabeled, {0, 1}).has_value());
  CHECK_THROWS_AS(edge_attention(agents, {0, 2}), PreconditionError);
}

TEST_CASE("screening thresholds") {
  const Net n = network();
  CHECK(screen_attention(n.agents, n.graph, 0.0).empty());
  CHECK(screen_attention(n.agents, n.graph, 10.0).size() == n.graph.num_edges());
  const auto some = screen_attention(n.agents, n.graph, 0.2);
  for (const Edge& e : some) CHECK(*edge_attention(n.agents, e) < 0.2);
  for (const Edge& e : n.graph.edges()) {
    if (*edge_attention(n.agents, e) < 0.2) CHECK(std::binary_search(some.begin(), some.end(), e));
  }
}

TEST_CASE("default threshold screens everything at or below the percentile") {
  Net n = network();
  const double tau = default_attention_threshold(n.agents, n.graph, 10.0);
  const auto s = screen_attention(n.agents, n.graph, tau);
  const double frac = static_cast<double>(s.size()) / static_cast<double>(n.graph.num_edges());
  CHECK(frac == doctest::Approx(0.1).epsilon(0.5));

  // Clamped zeros tie at the percentile and must all be screened.
  for (std::size_t i = 0; i < n.agents.size(); i += 3) n.agents[i].attention.setZero();
  const double t0 = default_attention_threshold(n.agents, n.graph, 10.0);
  CHECK(t0 > 0.0);
  std::size_t zeros = 0;
  for (const Edge& e : n.graph.edges()) zeros += *edge_attention(n.agents, e) == 0.0;
  CHECK(zeros > n.graph.num_edges() / 10);
  CHECK(screen_attention(n.agents, n.graph, t0).size() >= zeros);
}

TEST_CASE("proxy channels need a foreign detector") {
  const AttributedGraph g = fx::path_graph(5);
  AccessLog log;
  const ProxyView v = open_proxy_channel(g, 4, 1, &log);
  CHECK(v.degree == 2);
  CHECK(v.neighbor_ids == std::vector<NodeId>{0, 2});
  CHECK(v.feature == g.feature(1));
  CHECK(log.entries.size() == 3);
  CHECK(log.foreign_parameter_reads() == 0);
  CHECK_THROWS_AS(open_proxy_channel(g, 2, 1), PreconditionError);
  CHECK_THROWS_AS(open_proxy_channel(g, 1, 1), PreconditionError);
}

TEST_CASE("detector choice avoids the suspect's neighborhood") {
  const AttributedGraph g = fx::small_synthetic();
  std::mt19937_64 rng(2);
  for (NodeId x = 0; x < 20; ++x) {
    const auto d = choose_detectors(g, x, 3, rng);
    CHECK(d.size() == 3);
    CHECK(std::set<NodeId>(d.begin(), d.end()).size() == 3);
    for (NodeId c : d) {
      CHECK(c != x);
      CHECK_FALSE(g.has_edge(c, x));
    }
  }
  const AttributedGraph pair = fx::make_graph(2, {{0, 1}});
  CHECK(choose_detectors(pair, 0, 3, rng).empty());
}

TEST_CASE("a two-node graph has no detectors") {
  const AttributedGraph g = fx::make_graph(2, {{0, 1}});
  auto agents = make_agents(g, {}, 1);
  FilterConfig cfg;
  cfg.attention_threshold = 10.0;
  const DetectionReport r = detect(agents, g, cfg);
  CHECK(r.suspicious_edges.size() == 1);
  CHECK(r.flagged_edges.empty());
  CHECK(r.warnings.size() == 2);
  CHECK(r.proxy_channels == 0);
}

TEST_CASE("degree check tolerance") {
  AgentState d;
  d.node_id = 0;
  d.theta_D = Matrix::Zero(2, 6);
  d.theta_D(0, 3) = 5.0;  // feature e0 -> degree 4
  const Vector z = Vector::Unit(2, 0);
  CHECK_FALSE(check_degree(d, z, 4, 0));
  CHECK(check_degree(d, z, 5, 0));
  CHECK_FALSE(check_degree(d, z, 5, 1));
  CHECK(check_degree(d, z, 6, 1));
  CHECK_FALSE(check_degree(d, z, 2, 2));
}

TEST_CASE("confidence threshold bounds") {
  const AttributedGraph g = fx::path_graph(6);
  auto agents = make_agents(g, {}, 1);
  agents[5].theta_N.setZero();
  const ProxyView v = open_proxy_channel(g, 5, 2);
  const std::vector<int> pos{0, 1};
  CHECK(check_confidence(agents[5], v, pos, 0.0).empty());
  CHECK(check_confidence(agents[5], v, pos, 1.0).size() == 2);
  CHECK(check_confidence(agents[5], v, pos, 0.5).empty());
  for (double c : pair_confidences(agents[5], v, pos)) CHECK(c == 0.5);
}

TEST_CASE("votes decide flagging") {
  Net n = network(3);
  flatten(n.agents);
  FilterConfig cfg;
  cfg.attention_threshold = 10.0;
  cfg.degree_tolerance = 0;
  cfg.confidence_threshold = 1.0;
  const DetectionReport all = detect(n.agents, n.graph, cfg);
  CHECK(all.flagged_edges.size() == n.graph.num_edges());
  cfg.confidence_threshold = 0.0;
  CHECK(detect(n.agents, n.graph, cfg).flagged_edges.empty());
  cfg.confidence_threshold = 1.0;
  cfg.degree_tolerance = 1000;
  CHECK(detect(n.agents, n.graph, cfg).flagged_edges.empty());
}

TEST_CASE("flagged edges are suspicious and evidence is consistent") {
  PerturbResult p = perturb(fx::small_synthetic(4), 0.2, PerturbStrategy::RandomAdd, 4);
  auto agents = make_agents(p.graph, {}, 4);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> w(0.0, 1.0);
  for (auto& a : agents)
    for (Eigen::Index k = 0; k < a.attention.size(); ++k) a.attention[k] = w(rng);
  FilterConfig cfg;
  cfg.attention_percentile = 30.0;
  cfg.degree_tolerance = 0;
  AccessLog log;
  const DetectionReport r = detect(agents, p.graph, cfg, &p.record, &log);
  CHECK_FALSE(r.suspicious_edges.empty());
  for (const Edge& e : r.flagged_edges) {
    CHECK(std::binary_search(r.suspicious_edges.begin(), r.suspicious_edges.end(), e));
  }
  CHECK(r.evidence.size() == r.suspicious_edges.size());
  for (const auto& ev : r.evidence) {
    CHECK(ev.injected.has_value());
    CHECK(ev.votes <= ev.escalations);
    CHECK(ev.escalations <= ev.detectors);
    CHECK(ev.attention < r.attention_threshold);
  }
  REQUIRE(r.tpr.has_value());
  CHECK(*r.tpr <= *r.screening_tpr);
  CHECK(*r.fpr <= *r.screening_fpr);
  CHECK(log.foreign_parameter_reads() == 0);
  for (const auto& entry : log.entries) {
    if (entry.reader != entry.owner) CHECK(entry.kind == AccessLog::Kind::Feature);
  }
}

TEST_CASE("detection is deterministic in its seed") {
  const Net n = network(5);
  FilterConfig cfg;
  cfg.attention_percentile = 40.0;
  cfg.degree_tolerance = 0;
  cfg.seed = 7;
  const auto a = detect(n.agents, n.graph, cfg);
  const auto b = detect(n.agents, n.graph, cfg);
  CHECK(a.flagged_edges == b.flagged_edges);
  CHECK(a.proxy_channels == b.proxy_channels);
  REQUIRE(a.evidence.size() == b.evidence.size());
  for (std::size_t k = 0; k < a.evidence.size(); ++k) CHECK(a.evidence[k].votes == b.evidence[k].votes);
}

TEST_CASE("filtering a clean graph with nothing flagged changes nothing") {
  AttributedGraph g = split_labels(fx::small_synthetic(6), 0.8, 6);
  EngineConfig ec;
  ec.comms.middleware_steps = 2;
  RoundEngine engine(g, make_agents(g, {}, 6), ec);
  FilterConfig cfg;
  cfg.attention_threshold = 0.0;
  cfg.refinement_rounds = 0;
  std::vector<NodeId> eval;
  for (NodeId v = 0; v < g.num_nodes(); ++v) eval.push_back(v);
  const FilterResult r = filter_and_classify(engine, cfg, eval);
  CHECK(r.report.flagged_edges.empty());
  CHECK(r.filtered.edges() == g.edges());
  CHECK(r.accuracy_before == r.accuracy_after);
}

TEST_CASE("filter removes flagged edges and refines") {
  PerturbResult p = perturb(split_labels(fx::small_synthetic(7), 0.8, 7), 0.2,
                            PerturbStrategy::RandomAdd, 7);
  EngineConfig ec;
  ec.comms.middleware_steps = 2;
  auto agents = make_agents(p.graph, {}, 7);
  flatten(agents);
  RoundEngine engine(p.graph, agents, ec);
  FilterConfig cfg;
  cfg.attention_threshold = 10.0;
  cfg.confidence_threshold = 1.0;
  cfg.degree_tolerance = 0;
  cfg.refinement_rounds = 2;
  const std::vector<NodeId> eval{0, 1, 2};
  const FilterResult r = filter_and_classify(engine, cfg, eval, &p.record);
  CHECK(r.filtered.num_edges() == p.graph.num_edges() - r.report.flagged_edges.size());
  for (const Edge& e : r.report.flagged_edges) CHECK_FALSE(r.filtered.has_edge(e.u, e.v));
  CHECK(engine.round() == 2);
  CHECK(r.report.tpr.has_value());

  const auto dir = fx::temp_dir("detection");
  write_detection_json(dir / "d.json", r.report);
  write_detection_summary(dir / "d.csv", r.report);
  CHECK(fx::read_file(dir / "d.json").find("\"flagged\"") != std::string::npos);
  CHECK(fx::read_file(dir / "d.csv").rfind("attention_threshold,", 0) == 0);
}

TEST_CASE("filter config validation") {
  FilterConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.required_votes() == 2);
  c.votes_required = 4;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.confidence_threshold = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.iterations = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
