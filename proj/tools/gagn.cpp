#include "gagn/errors.hpp"
#include "gagn/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> repeats;
  std::string checkpoint;
  int repeat = 0;
  bool quiet = false;
};

gagn::ExperimentConfig resolve(const Common& c) {
  gagn::ExperimentConfig cfg = gagn::load_config(c.config);
  if (c.seed) cfg.run.seed = *c.seed;
  if (!c.out.empty()) cfg.run.output_dir = c.out;
  if (c.repeats) cfg.run.repeats = *c.repeats;
  cfg.validate();
  return cfg;
}

void archive_config(const gagn::ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.run.output_dir);
  std::ofstream out(cfg.run.output_dir / "config.toml");
  out << gagn::to_toml(cfg);
}

gagn::MetricsBundle single(const gagn::AttributedGraph& base, gagn::RepeatMetrics m) {
  gagn::MetricsBundle b;
  b.num_nodes = base.num_nodes();
  b.num_edges = base.num_edges();
  b.num_classes = base.num_classes();
  b.feature_dim = base.feature_dim();
  b.repeats.push_back(std::move(m));
  return b;
}

void print_summary(const gagn::MetricsBundle& bundle) {
  auto line = [&](const char* name, auto get) {
    const auto xs = gagn::collect(bundle, get);
    if (xs.empty()) return;
    std::printf("%-22s %s\n", name, gagn::format_percent(gagn::stats::summarize(xs)).c_str());
  };
  using M = gagn::RepeatMetrics;
  line("accuracy", [](const M& m) { return std::optional<double>(m.accuracy); });
  line("accuracy (no filter)", [](const M& m) { return m.accuracy_no_filter; });
  line("accuracy (filtered)", [](const M& m) { return m.accuracy_filtered; });
  line("TPR", [](const M& m) { return m.tpr; });
  line("FPR", [](const M& m) { return m.fpr; });
  line("attention symmetry", [](const M& m) { return m.symmetry.pearson; });
  line("degree L-nodes", [](const M& m) { return m.degree.large; });
  line("degree S-nodes", [](const M& m) { return m.degree.small; });
  line("degree D-nodes", [](const M& m) { return m.degree.distant; });
}

int cmd_run(const Common& c) {
  const gagn::ExperimentConfig cfg = resolve(c);
  const gagn::MetricsBundle bundle = gagn::run_experiment(cfg, c.quiet ? nullptr : &std::cerr);
  print_summary(bundle);
  return 0;
}

int cmd_train(const Common& c) {
  gagn::ExperimentConfig cfg = resolve(c);
  archive_config(cfg);
  const gagn::Scenario scenario = gagn::prepare_scenario(cfg, c.repeat);
  gagn::RoundEngine engine = gagn::make_engine(scenario, cfg);
  const auto& out = cfg.run.output_dir;
  const gagn::ConvergenceResult conv = gagn::train(engine, cfg, out);
  gagn::write_loss_log(out / "losses.csv", conv.history);
  gagn::write_attention_dump(out / "attention.csv", engine.round(),
                             gagn::attention_pairs(engine.graph(), engine.agents()));
  gagn::export_embeddings(out / "embeddings.csv", engine.agents(), engine.graph());
  gagn::save_checkpoint(out / "checkpoint.bin", {engine.round(), engine.agents()});
  std::printf("%d rounds%s, accuracy %.4f\n", conv.rounds, conv.converged ? " (converged)" : "",
              gagn::classification_accuracy(engine.agents(), engine.graph(), scenario.eval_nodes));
  return 0;
}

gagn::RoundEngine restore(const gagn::ExperimentConfig& cfg, const Common& c, gagn::Scenario& scenario) {
  if (c.checkpoint.empty()) throw gagn::ConfigError("--checkpoint is required");
  scenario = gagn::prepare_scenario(cfg, c.repeat);
  return gagn::engine_from_checkpoint(scenario, cfg, gagn::load_checkpoint(c.checkpoint));
}

int cmd_filter(const Common& c) {
  gagn::ExperimentConfig cfg = resolve(c);
  archive_config(cfg);
  gagn::Scenario scenario;
  gagn::RoundEngine engine = restore(cfg, c, scenario);
  const gagn::PerturbationRecord* record = scenario.record.empty() ? nullptr : &scenario.record;
  const gagn::FilterResult fr = gagn::filter_and_classify(engine, cfg.filter, scenario.eval_nodes, record);
  const auto& out = cfg.run.output_dir;
  gagn::write_detection_json(out / "detection.json", fr.report);
  gagn::write_detection_summary(out / "detection_summary.csv", fr.report);
  gagn::save_checkpoint(out / "checkpoint_filtered.bin", {engine.round(), engine.agents()});
  std::printf("flagged %zu of %zu suspicious edges\n", fr.report.flagged_edges.size(),
              fr.report.suspicious_edges.size());
  if (fr.report.tpr) std::printf("TPR %.4f FPR %.4f\n", *fr.report.tpr, *fr.report.fpr);
  std::printf("accuracy %.4f -> %.4f\n", fr.accuracy_before, fr.accuracy_after);
  return 0;
}

int cmd_eval(const Common& c) {
  gagn::ExperimentConfig cfg = resolve(c);
  archive_config(cfg);
  gagn::Scenario scenario;
  gagn::RoundEngine engine = restore(cfg, c, scenario);
  gagn::RepeatMetrics m = gagn::evaluate(engine, scenario, cfg);
  m.repeat = c.repeat;
  const auto& out = cfg.run.output_dir;
  gagn::write_symmetry_curve(out / "symmetry_curve.csv", m.symmetry);
  gagn::export_embeddings(out / "embeddings.csv", engine.agents(), engine.graph());
  gagn::MetricsBundle bundle = single(scenario.clean, std::move(m));
  bundle.eval_nodes = scenario.eval_nodes.size();
  gagn::write_metrics_json(out / "metrics.json", bundle);
  gagn::write_metrics_csv(out / "metrics.csv", bundle);
  print_summary(bundle);
  return 0;
}

int cmd_sweep_roc(const Common& c) {
  gagn::ExperimentConfig cfg = resolve(c);
  archive_config(cfg);
  gagn::Scenario scenario;
  gagn::RoundEngine engine = restore(cfg, c, scenario);
  if (scenario.record.empty()) throw gagn::ConfigError("an ROC sweep needs perturbation.rate > 0");
  const auto thresholds = gagn::roc_thresholds(engine.agents(), engine.graph(), cfg.run.roc_points);
  const auto points = gagn::roc_sweep(engine.agents(), engine.graph(), scenario.record, thresholds);
  gagn::write_roc(cfg.run.output_dir / "roc.csv", points);
  for (const auto& p : points) std::printf("%.6g %.4f %.4f\n", p.threshold, p.fpr, p.tpr);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph agent network experiments"};
  app.require_subcommand(1);
  Common c;
  auto add_common = [&](CLI::App* sub, bool needs_checkpoint) {
    sub->add_option("--config", c.config, "experiment config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "global seed");
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--repeat", c.repeat, "repeat index that selects the scenario seeds");
    sub->add_flag("--quiet", c.quiet, "no progress output");
    if (needs_checkpoint) {
      sub->add_option("--checkpoint", c.checkpoint, "agent checkpoint")->required()->check(CLI::ExistingFile);
    }
  };
  auto* run = app.add_subcommand("run", "train, filter and evaluate every repeat");
  add_common(run, false);
  run->add_option("--repeats", c.repeats, "number of repeats");
  add_common(app.add_subcommand("train", "train without filtering"), false);
  add_common(app.add_subcommand("filter", "filter and refine from a checkpoint"), true);
  add_common(app.add_subcommand("eval", "metrics from a checkpoint"), true);
  add_common(app.add_subcommand("sweep-roc", "screening ROC from a checkpoint"), true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string verb = app.get_subcommands().front()->get_name();
  try {
    if (verb == "run") return cmd_run(c);
    if (verb == "train") return cmd_train(c);
    if (verb == "filter") return cmd_filter(c);
    if (verb == "eval") return cmd_eval(c);
    return cmd_sweep_roc(c);
  } catch (const gagn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const gagn::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const gagn::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
