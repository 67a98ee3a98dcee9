#include "gagn/harness.hpp"

#include "gagn/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>

namespace gagn {
namespace {

using nlohmann::ordered_json;

// Distinct streams carved out of a repeat seed.
constexpr std::uint64_t kDegreeStream = 0x64656772ULL;
constexpr std::uint64_t kConfidenceStream = 0x636f6e66ULL;
constexpr std::uint64_t kTestGraphStream = 0x74657374ULL;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string round_tag(std::uint64_t round) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06llu", static_cast<unsigned long long>(round));
  return buf;
}

ordered_json opt(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

ordered_json summary_json(const std::vector<double>& xs) {
  if (xs.empty()) return nullptr;
  const stats::Summary s = stats::summarize(xs);
  return ordered_json{{"mean", s.mean}, {"half_range", s.half_range}, {"std", s.std},
                      {"min", s.min},   {"max", s.max},               {"n", s.n},
                      {"display", format_percent(s)}};
}

struct MetricColumn {
  const char* name;
  std::function<std::optional<double>(const RepeatMetrics&)> get;
};

const std::vector<MetricColumn>& metric_columns() {
  static const std::vector<MetricColumn> cols = {
      {"accuracy", [](const RepeatMetrics& m) { return std::optional<double>(m.accuracy); }},
      {"accuracy_no_filter", [](const RepeatMetrics& m) { return m.accuracy_no_filter; }},
      {"accuracy_filtered", [](const RepeatMetrics& m) { return m.accuracy_filtered; }},
      {"tpr", [](const RepeatMetrics& m) { return m.tpr; }},
      {"fpr", [](const RepeatMetrics& m) { return m.fpr; }},
      {"screening_tpr", [](const RepeatMetrics& m) { return m.screening_tpr; }},
      {"screening_fpr", [](const RepeatMetrics& m) { return m.screening_fpr; }},
      {"symmetry_pearson", [](const RepeatMetrics& m) { return m.symmetry.pearson; }},
      {"degree_large", [](const RepeatMetrics& m) { return m.degree.large; }},
      {"degree_small", [](const RepeatMetrics& m) { return m.degree.small; }},
      {"degree_distant", [](const RepeatMetrics& m) { return m.degree.distant; }},
      {"confidence_original", [](const RepeatMetrics& m) { return m.confidence.original; }},
      {"confidence_random", [](const RepeatMetrics& m) { return m.confidence.random; }},
      {"confidence_rewired", [](const RepeatMetrics& m) { return m.confidence.rewired; }},
      {"confidence_adversarial", [](const RepeatMetrics& m) { return m.confidence.adversarial; }},
      {"separation_p",
       [](const RepeatMetrics& m) {
         return m.separation ? std::optional<double>(m.separation->test.p) : std::nullopt;
       }},
  };
  return cols;
}

void say(std::ostream* log, const std::string& line) {
  static std::mutex mu;
  if (!log) return;
  std::lock_guard lock(mu);
  *log << line << std::endl;
}

}  // namespace

std::uint64_t repeat_seed(std::uint64_t base, int repeat) {
  return agent_round_seed(base, static_cast<std::uint64_t>(repeat), 0);
}

AttributedGraph load_base_graph(const DatasetConfig& cfg) {
  AttributedGraph g;
  if (cfg.source == DatasetSource::Files) {
    if (cfg.path.empty()) throw ConfigError("dataset.path is required for file datasets");
    LoadOptions opts;
    opts.missing_features = cfg.attribute_free;
    opts.degree_buckets = cfg.degree_buckets;
    g = load_dataset(cfg.path, cfg.format, opts);
  } else {
    g = make_synthetic(cfg.synthetic, cfg.seed);
  }
  if (cfg.project_dim > 0 && cfg.project_dim < g.feature_dim()) {
    g = project_features(g, cfg.project_dim, cfg.seed);
  }
  if (cfg.labeled_fraction < 1.0) g = split_labels(g, cfg.labeled_fraction, cfg.seed);
  return g;
}

std::vector<NodeId> select_eval_nodes(const AttributedGraph& graph, EvalSplit split) {
  std::vector<NodeId> out;
  for (NodeId v = 0; v < graph.num_nodes(); ++v) {
    const bool visible = graph.label_visible(v);
    if (split == EvalSplit::All || (split == EvalSplit::Labeled) == visible) out.push_back(v);
  }
  return out;
}

Scenario prepare_scenario(const ExperimentConfig& cfg, const AttributedGraph& base, int repeat) {
  Scenario s;
  s.seed = repeat_seed(cfg.run.seed, repeat);
  s.clean = base;
  if (cfg.perturbation.rate > 0.0) {
    PerturbResult p = perturb(base, cfg.perturbation.rate, cfg.perturbation.strategy,
                              cfg.perturbation.seed + static_cast<std::uint64_t>(repeat));
    s.graph = std::move(p.graph);
    s.record = std::move(p.record);
  } else {
    s.graph = base;
  }
  s.eval_nodes = select_eval_nodes(s.graph, cfg.run.eval_split);
  if (s.eval_nodes.empty()) {
    throw ConfigError("experiment.eval_split \"" + to_string(cfg.run.eval_split) + "\" selects no nodes");
  }
  return s;
}

Scenario prepare_scenario(const ExperimentConfig& cfg, int repeat) {
  return prepare_scenario(cfg, load_base_graph(cfg.dataset), repeat);
}

RoundEngine make_engine(const Scenario& scenario, const ExperimentConfig& cfg) {
  EngineConfig ec{cfg.sgd, cfg.comms, scenario.seed};
  return RoundEngine(scenario.graph, make_agents(scenario.graph, cfg.agent, scenario.seed), ec);
}

RoundEngine engine_from_checkpoint(const Scenario& scenario, const ExperimentConfig& cfg,
                                   Checkpoint checkpoint) {
  EngineConfig ec{cfg.sgd, cfg.comms, scenario.seed};
  for (const AgentState& a : checkpoint.agents) {
    if (a.node_id < scenario.graph.num_nodes() &&
        a.feature_dim() != scenario.graph.feature_dim()) {
      throw PreconditionError("checkpoint feature dimension does not match the dataset");
    }
  }
  RoundEngine engine(scenario.graph, std::move(checkpoint.agents), ec);
  engine.set_round(checkpoint.round);
  return engine;
}

ConvergenceResult train(RoundEngine& engine, const ExperimentConfig& cfg,
                        const std::filesystem::path& out_dir) {
  const bool exports = !out_dir.empty();
  RoundCallback cb = [&](const RoundEngine& e, const LossReport&) {
    if (!exports) return;
    const std::uint64_t r = e.round();
    if (cfg.run.embedding_every > 0 && r % static_cast<std::uint64_t>(cfg.run.embedding_every) == 0) {
      export_embeddings(out_dir / ("embeddings_round_" + round_tag(r) + ".csv"), e.agents(), e.graph());
    }
    if (cfg.run.checkpoint_every > 0 && r % static_cast<std::uint64_t>(cfg.run.checkpoint_every) == 0) {
      save_checkpoint(out_dir / ("checkpoint_round_" + round_tag(r) + ".bin"), {r, e.agents()});
    }
  };
  return run_until_converged(engine, cfg.schedule, cb);
}

RepeatMetrics evaluate(const RoundEngine& engine, const Scenario& scenario,
                       const ExperimentConfig& cfg) {
  RepeatMetrics m;
  m.seed = scenario.seed;
  const auto& agents = engine.agents();
  const AttributedGraph& g = engine.graph();
  m.accuracy = classification_accuracy(agents, g, scenario.eval_nodes);

  const std::vector<AttentionPair> pairs = labeled_pairs(attention_pairs(g, agents), agents);
  m.symmetry = eval_attention_symmetry(pairs);

  m.degree = eval_degree_inference(agents, g, cfg.run.degree_eval_size, cfg.run.degree_eval_agents,
                                   scenario.seed ^ kDegreeStream);
  m.warnings.insert(m.warnings.end(), m.degree.warnings.begin(), m.degree.warnings.end());

  unsigned selection = kTestOriginal | kTestRandom | kTestRewired;
  if (!scenario.record.added_edges.empty()) selection |= kTestAdversarial;
  const TestGraphs tests =
      build_test_graphs(scenario.clean, scenario.record, scenario.seed ^ kTestGraphStream, selection);
  m.confidence = eval_neighbor_confidence(agents, tests, scenario.clean.features(),
                                          cfg.run.confidence_eval_agents,
                                          scenario.seed ^ kConfidenceStream);

  if (!scenario.record.added_edges.empty()) {
    m.separation = eval_attention_separation(agents, g, scenario.record);
  }
  return m;
}

RepeatMetrics run_repeat(const ExperimentConfig& cfg, const AttributedGraph& base, int repeat,
                         const std::filesystem::path& out_dir, std::ostream* log) {
  std::filesystem::create_directories(out_dir);
  const Scenario scenario = prepare_scenario(cfg, base, repeat);
  RoundEngine engine = make_engine(scenario, cfg);

  const auto t0 = std::chrono::steady_clock::now();
  const ConvergenceResult conv = train(engine, cfg, out_dir);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  say(log, "repeat " + std::to_string(repeat) + ": " + std::to_string(conv.rounds) + " rounds in " +
               std::to_string(seconds) + " s" + (conv.converged ? " (converged)" : ""));

  RepeatMetrics m = evaluate(engine, scenario, cfg);
  m.repeat = repeat;
  m.rounds = conv.rounds;
  m.converged = conv.converged;
  m.history = conv.history;
  if (!m.history.empty()) m.final_loss = m.history.back();
  m.train_seconds = seconds;
  m.warnings.insert(m.warnings.begin(), scenario.graph.warnings().begin(), scenario.graph.warnings().end());

  write_loss_log(out_dir / "losses.csv", m.history);
  write_attention_dump(out_dir / "attention.csv", engine.round(), attention_pairs(engine.graph(), engine.agents()));
  write_symmetry_curve(out_dir / "symmetry_curve.csv", m.symmetry);
  export_embeddings(out_dir / "embeddings.csv", engine.agents(), engine.graph());
  save_checkpoint(out_dir / "checkpoint.bin", {engine.round(), engine.agents()});
  if (!scenario.record.empty()) {
    const auto thresholds = roc_thresholds(engine.agents(), engine.graph(), cfg.run.roc_points);
    write_roc(out_dir / "roc.csv", roc_sweep(engine.agents(), engine.graph(), scenario.record, thresholds));
  }

  if (cfg.run.baseline && cfg.filter.refinement_rounds > 0) {
    RoundEngine copy = engine;
    for (int r = 0; r < cfg.filter.refinement_rounds; ++r) copy.run_round();
    m.accuracy_no_filter = classification_accuracy(copy.agents(), copy.graph(), scenario.eval_nodes);
  } else if (cfg.run.baseline) {
    m.accuracy_no_filter = m.accuracy;
  }

  if (cfg.run.filter) {
    FilterConfig fc = cfg.filter;
    fc.seed = cfg.filter.seed + static_cast<std::uint64_t>(repeat);
    const PerturbationRecord* record = scenario.record.empty() ? nullptr : &scenario.record;
    const FilterResult fr = filter_and_classify(engine, fc, scenario.eval_nodes, record);
    m.accuracy_filtered = fr.accuracy_after;
    m.tpr = fr.report.tpr;
    m.fpr = fr.report.fpr;
    m.screening_tpr = fr.report.screening_tpr;
    m.screening_fpr = fr.report.screening_fpr;
    m.suspicious = fr.report.suspicious_edges.size();
    m.flagged = fr.report.flagged_edges.size();
    m.warnings.insert(m.warnings.end(), fr.report.warnings.begin(), fr.report.warnings.end());
    write_detection_json(out_dir / "detection.json", fr.report);
    write_detection_summary(out_dir / "detection_summary.csv", fr.report);
  }
  say(log, "repeat " + std::to_string(repeat) + ": accuracy " + fmt(m.accuracy) +
               (m.accuracy_filtered ? ", filtered " + fmt(*m.accuracy_filtered) : std::string()));
  return m;
}

MetricsBundle run_experiment(const ExperimentConfig& cfg, std::ostream* log) {
  cfg.validate();
  const AttributedGraph base = load_base_graph(cfg.dataset);
  const std::filesystem::path out = cfg.run.output_dir;
  std::filesystem::create_directories(out);
  {
    std::ofstream resolved(out / "config.toml");
    if (!resolved) throw DataError("cannot write " + (out / "config.toml").string());
    resolved << to_toml(cfg);
  }

  MetricsBundle bundle;
  bundle.num_nodes = base.num_nodes();
  bundle.num_edges = base.num_edges();
  bundle.num_classes = base.num_classes();
  bundle.feature_dim = base.feature_dim();
  bundle.eval_nodes = select_eval_nodes(base, cfg.run.eval_split).size();
  bundle.repeats.resize(static_cast<std::size_t>(cfg.run.repeats));

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers = std::min<unsigned>(hw, static_cast<unsigned>(cfg.run.repeats));
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(bundle.repeats.size());
  auto work = [&] {
    for (int r = next++; r < cfg.run.repeats; r = next++) {
      try {
        char dir[32];
        std::snprintf(dir, sizeof dir, "repeat-%02d", r);
        bundle.repeats[static_cast<std::size_t>(r)] = run_repeat(cfg, base, r, out / dir, log);
      } catch (...) {
        errors[static_cast<std::size_t>(r)] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  write_metrics_json(out / "metrics.json", bundle);
  write_metrics_csv(out / "metrics.csv", bundle);
  return bundle;
}

std::vector<double> collect(const MetricsBundle& bundle,
                            const std::function<std::optional<double>(const RepeatMetrics&)>& get) {
  std::vector<double> out;
  for (const RepeatMetrics& m : bundle.repeats) {
    if (auto v = get(m)) out.push_back(*v);
  }
  return out;
}

std::string format_percent(const stats::Summary& s) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f±%.2f", 100.0 * s.mean, 100.0 * s.half_range);
  return buf;
}

void write_metrics_json(const std::filesystem::path& path, const MetricsBundle& bundle) {
  ordered_json j;
  j["dataset"] = {{"nodes", bundle.num_nodes},
                  {"edges", bundle.num_edges},
                  {"classes", bundle.num_classes},
                  {"feature_dim", bundle.feature_dim},
                  {"eval_nodes", bundle.eval_nodes}};
  j["repeats"] = bundle.repeats.size();

  ordered_json summary = ordered_json::object();
  for (const MetricColumn& c : metric_columns()) summary[c.name] = summary_json(collect(bundle, c.get));
  j["summary"] = summary;

  ordered_json per = ordered_json::array();
  for (const RepeatMetrics& m : bundle.repeats) {
    ordered_json r;
    r["repeat"] = m.repeat;
    r["seed"] = m.seed;
    r["rounds"] = m.rounds;
    r["converged"] = m.converged;
    r["final_loss"] = {{"j_A", m.final_loss.j_A}, {"j_D", m.final_loss.j_D}, {"j_N", m.final_loss.j_N}};
    for (const MetricColumn& c : metric_columns()) r[c.name] = opt(c.get(m));
    r["suspicious_edges"] = m.suspicious;
    r["flagged_edges"] = m.flagged;
    r["symmetry"] = {{"edges", m.symmetry.edges},
                     {"pearson", opt(m.symmetry.pearson)},
                     {"mean_abs_delta", m.symmetry.mean_abs_delta},
                     {"max_abs_delta", m.symmetry.max_abs_delta}};
    r["degree_inference_agents"] = m.degree.inference_agents;
    if (m.separation) {
      r["separation"] = {{"mean_injected", m.separation->mean_injected},
                         {"mean_original", m.separation->mean_original},
                         {"injected", m.separation->injected},
                         {"original", m.separation->original},
                         {"u", m.separation->test.u},
                         {"z", m.separation->test.z},
                         {"p", m.separation->test.p}};
    } else {
      r["separation"] = nullptr;
    }
    r["warnings"] = m.warnings;
    per.push_back(std::move(r));
  }
  j["per_repeat"] = std::move(per);

  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_metrics_csv(const std::filesystem::path& path, const MetricsBundle& bundle) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  const auto& cols = metric_columns();
  out << "row,seed,rounds,converged";
  for (const MetricColumn& c : cols) out << ',' << c.name;
  out << '\n';
  for (const RepeatMetrics& m : bundle.repeats) {
    out << m.repeat << ',' << m.seed << ',' << m.rounds << ',' << (m.converged ? 1 : 0);
    for (const MetricColumn& c : cols) {
      out << ',';
      if (auto v = c.get(m)) out << fmt(*v);
    }
    out << '\n';
  }
  for (const char* stat : {"mean", "half_range", "std"}) {
    out << stat << ",,,";
    for (const MetricColumn& c : cols) {
      out << ',';
      const auto xs = collect(bundle, c.get);
      if (xs.empty()) continue;
      const stats::Summary s = stats::summarize(xs);
      const std::string name = stat;
      out << fmt(name == "mean" ? s.mean : name == "half_range" ? s.half_range : s.std);
    }
    out << '\n';
  }
}

}  // namespace gagn
