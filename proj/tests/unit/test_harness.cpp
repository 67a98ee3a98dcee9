#include "fixtures.hpp"

#include "gagn/errors.hpp"
#include "gagn/harness.hpp"

#include <nlohmann/json.hpp>

#include <sstream>

using namespace gagn;
namespace fs = std::filesystem;

namespace {

ExperimentConfig smoke_config(const fs::path& out) {
  ExperimentConfig cfg = load_config(GAGN_SOURCE_DIR "/configs/smoke.toml");
  cfg.run.output_dir = out;
  return cfg;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<double> split_doubles(const std::string& line) {
  std::vector<double> out;
  std::istringstream in(line);
  for (std::string cell; std::getline(in, cell, ',');) out.push_back(std::stod(cell));
  return out;
}

}  // namespace

TEST_CASE("an experiment run writes every export") {
  const auto dir = fx::temp_dir("harness-run");
  const ExperimentConfig cfg = smoke_config(dir);
  const MetricsBundle bundle = run_experiment(cfg);
  REQUIRE(bundle.repeats.size() == 2);
  for (const char* f : {"config.toml", "metrics.json", "metrics.csv"}) CHECK(fs::exists(dir / f));
  for (const char* r : {"repeat-00", "repeat-01"}) {
    for (const char* f : {"losses.csv", "attention.csv", "symmetry_curve.csv", "embeddings.csv",
                          "checkpoint.bin", "roc.csv", "detection.json", "detection_summary.csv"}) {
      CHECK_MESSAGE(fs::exists(dir / r / f), r, "/", f);
    }
  }
  CHECK(load_config(dir / "config.toml").run.repeats == 2);

  const auto losses = lines(fx::read_file(dir / "repeat-00" / "losses.csv"));
  CHECK(losses.size() == static_cast<std::size_t>(bundle.repeats[0].rounds) + 1);

  // Embedding rows are distributions, one per node.
  const auto emb = lines(fx::read_file(dir / "repeat-00" / "embeddings.csv"));
  REQUIRE(emb.size() == bundle.num_nodes + 1);
  CHECK(emb[0] == "node,label,p0,p1,p2");
  for (std::size_t i = 1; i < emb.size(); ++i) {
    const auto v = split_doubles(emb[i]);
    double s = 0.0;
    for (std::size_t k = 2; k < v.size(); ++k) s += v[k];
    CHECK(s == doctest::Approx(1.0));
  }

  const auto json = nlohmann::json::parse(fx::read_file(dir / "metrics.json"));
  CHECK(json["per_repeat"].size() == 2);
  CHECK(json["summary"].contains("accuracy"));
  const auto& m = bundle.repeats[0];
  CHECK(m.accuracy >= 0.0);
  CHECK(m.accuracy <= 1.0);
  CHECK(m.tpr.has_value());
  CHECK(m.accuracy_no_filter.has_value());
  CHECK(m.accuracy_filtered.has_value());
  CHECK(m.separation.has_value());
}

TEST_CASE("experiments are reproducible") {
  const auto a = fx::temp_dir("harness-rep-a");
  const auto b = fx::temp_dir("harness-rep-b");
  ExperimentConfig cfg = smoke_config(a);
  cfg.run.repeats = 1;
  run_experiment(cfg);
  cfg.run.output_dir = b;
  run_experiment(cfg);
  for (const char* f : {"metrics.json", "metrics.csv"}) CHECK(fx::read_file(a / f) == fx::read_file(b / f));
  for (const char* f : {"losses.csv", "attention.csv", "checkpoint.bin", "detection.json"}) {
    CHECK(fx::read_file(a / "repeat-00" / f) == fx::read_file(b / "repeat-00" / f));
  }
}

TEST_CASE("embedding and checkpoint cadence") {
  const auto dir = fx::temp_dir("harness-cadence");
  ExperimentConfig cfg = smoke_config(dir);
  cfg.schedule.total_rounds = 10;
  cfg.run.embedding_every = 4;
  cfg.run.checkpoint_every = 5;
  const Scenario s = prepare_scenario(cfg, 0);
  RoundEngine engine = make_engine(s, cfg);
  const ConvergenceResult r = train(engine, cfg, dir);
  CHECK(r.rounds == 10);
  CHECK(fs::exists(dir / "embeddings_round_000004.csv"));
  CHECK(fs::exists(dir / "embeddings_round_000008.csv"));
  CHECK_FALSE(fs::exists(dir / "embeddings_round_000006.csv"));
  CHECK(fs::exists(dir / "checkpoint_round_000005.bin"));
  CHECK(fs::exists(dir / "checkpoint_round_000010.bin"));
  const Checkpoint c = load_checkpoint(dir / "checkpoint_round_000010.bin");
  CHECK(c.round == 10);
  RoundEngine restored = engine_from_checkpoint(s, cfg, c);
  CHECK(restored.round() == 10);
  CHECK(restored.agents()[3].theta_M == engine.agents()[3].theta_M);
}

TEST_CASE("scenario preparation") {
  ExperimentConfig cfg = smoke_config(fx::temp_dir("harness-scn"));
  const Scenario a = prepare_scenario(cfg, 0);
  const Scenario b = prepare_scenario(cfg, 1);
  CHECK(a.clean.edges() == b.clean.edges());
  CHECK(a.graph.edges() != b.graph.edges());
  CHECK(a.seed != b.seed);
  CHECK(apply_record(a.clean.edges(), a.record) == a.graph.edges());
  for (NodeId v : a.eval_nodes) CHECK_FALSE(a.clean.label_visible(v));
  CHECK(select_eval_nodes(a.clean, EvalSplit::All).size() == a.clean.num_nodes());
  CHECK(select_eval_nodes(a.clean, EvalSplit::Labeled).size() + a.eval_nodes.size() ==
        a.clean.num_nodes());
  cfg.dataset.labeled_fraction = 1.0;
  CHECK_THROWS_AS(prepare_scenario(cfg, 0), ConfigError);
}

TEST_CASE("roc sweep runs from (0,0) to (1,1) monotonically") {
  ExperimentConfig cfg = smoke_config(fx::temp_dir("harness-roc"));
  cfg.schedule.total_rounds = 20;
  const Scenario s = prepare_scenario(cfg, 0);
  RoundEngine engine = make_engine(s, cfg);
  train(engine, cfg);
  const auto th = roc_thresholds(engine.agents(), engine.graph(), 11);
  REQUIRE(th.size() == 11);
  CHECK(std::is_sorted(th.begin(), th.end()));
  const auto roc = roc_sweep(engine.agents(), engine.graph(), s.record, th);
  CHECK(roc.front().fpr == 0.0);
  CHECK(roc.front().tpr == 0.0);
  CHECK(roc.back().fpr == 1.0);
  CHECK(roc.back().tpr == 1.0);
  for (std::size_t k = 1; k < roc.size(); ++k) {
    CHECK(roc[k].fpr >= roc[k - 1].fpr);
    CHECK(roc[k].tpr >= roc[k - 1].tpr);
  }
  CHECK_THROWS_AS(roc_thresholds(engine.agents(), engine.graph(), 1), ConfigError);
  const auto dir = fx::temp_dir("harness-roc-out");
  write_roc(dir / "roc.csv", roc);
  CHECK(lines(fx::read_file(dir / "roc.csv")).size() == 12);
}

TEST_CASE("degree test sets sit outside the 2-hop ball") {
  const AttributedGraph g = fx::path_graph(10);
  const DegreeTestSets s = degree_test_sets(g, 0, 3);
  CHECK(s.distant == std::vector<NodeId>{9, 8, 7});
  CHECK(s.small.front() == 9);
  for (NodeId v : s.large) CHECK(g.degree(v) == 2);
  for (const auto* set : {&s.large, &s.small, &s.distant})
    for (NodeId v : *set) CHECK(v > 2);
}

TEST_CASE("degree inference on a complete graph has nothing to test") {
  const AttributedGraph g = fx::complete_graph(5);
  const auto agents = make_agents(g, {}, 1);
  const DegreeAccuracy d = eval_degree_inference(agents, g, 10, 2, 1);
  CHECK_FALSE(d.large.has_value());
  CHECK_FALSE(d.distant.has_value());
  CHECK(d.warnings.size() == 2);
  CHECK(d.inference_agents.size() == 2);
}

TEST_CASE("a flat degree head always answers degree one") {
  const AttributedGraph g = fx::small_synthetic();
  auto agents = make_agents(g, {}, 1);
  for (auto& a : agents) a.theta_D.setZero();
  const DegreeAccuracy d = eval_degree_inference(agents, g, 10, 5, 3);
  REQUIRE(d.small.has_value());
  REQUIRE(d.large.has_value());
  double expected = 0.0;
  for (NodeId id : d.inference_agents) {
    const auto sets = degree_test_sets(g, id, 10);
    double hits = 0.0;
    for (NodeId v : sets.small) hits += g.degree(v) == 1;
    expected += hits / static_cast<double>(sets.small.size());
  }
  CHECK(*d.small == doctest::Approx(expected / 5.0));
  CHECK(*d.large == 0.0);
}

TEST_CASE("zero confidence parameters score half of a balanced set") {
  const AttributedGraph g = fx::small_synthetic();
  auto agents = make_agents(g, {}, 2);
  for (auto& a : agents) a.theta_N.setZero();
  std::vector<LabeledPair> balanced;
  for (std::size_t k = 0; k < 10; ++k) {
    balanced.push_back({g.edges()[k], 1});
    balanced.push_back({g.edges()[k], 0});
  }
  CHECK(pair_accuracy(agents[0].theta_N, balanced, g.features()) == 0.5);
  const TestGraphs t = build_test_graphs(g, {}, 1, kTestOriginal | kTestRewired);
  const ConfidenceAccuracy c = eval_neighbor_confidence(agents, t, g.features(), 4, 1);
  CHECK(*c.original == 1.0);
  CHECK(*c.rewired == 0.0);
  CHECK_FALSE(c.adversarial.has_value());
  CHECK(c.evaluators.size() == 4);
}

TEST_CASE("attention symmetry statistics") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<AttentionPair> sym, indep;
  for (NodeId k = 0; k < 5000; ++k) {
    const double w = u(rng);
    sym.push_back({{k, k + 1}, w, w});
    indep.push_back({{k, k + 1}, u(rng), u(rng)});
  }
  const SymmetryStats s = eval_attention_symmetry(sym);
  CHECK(*s.pearson == doctest::Approx(1.0));
  CHECK(s.max_abs_delta == 0.0);
  CHECK(s.curve.size() == 5000);
  for (std::size_t k = 1; k < s.curve.size(); ++k) CHECK(s.curve[k].forward >= s.curve[k - 1].forward);
  CHECK(std::abs(*eval_attention_symmetry(indep).pearson) < 0.05);
  CHECK_FALSE(eval_attention_symmetry(std::span<const AttentionPair>(sym).first(1)).pearson.has_value());

  const auto dir = fx::temp_dir("harness-sym");
  write_symmetry_curve(dir / "s.csv", s);
  const auto rows = lines(fx::read_file(dir / "s.csv"));
  CHECK(rows.front() == "index,i,j,forward,backward");
  CHECK(rows.size() == 5001);
}

TEST_CASE("labeled pairs keep edges between trained agents") {
  const AttributedGraph g = fx::path_graph(4).with_label_mask({true, true, false, true});
  const auto agents = make_agents(g, {}, 1);
  const auto pairs = labeled_pairs(attention_pairs(g, agents), agents);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].edge == Edge(0, 1));
}

TEST_CASE("percent formatting and collection") {
  stats::Summary s;
  s.mean = 0.8541;
  s.half_range = 0.0016;
  CHECK(format_percent(s) == "85.41±0.16");
  MetricsBundle b;
  b.repeats.resize(3);
  b.repeats[0].tpr = 0.5;
  b.repeats[2].tpr = 0.7;
  const auto xs = collect(b, [](const RepeatMetrics& m) { return m.tpr; });
  CHECK(xs == std::vector<double>{0.5, 0.7});
}
