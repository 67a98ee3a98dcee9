#include "gagn/config.hpp"

#include "gagn/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <variant>

namespace gagn {
namespace {

struct Value {
  std::variant<bool, std::int64_t, double, std::string, std::vector<double>> data;
  std::size_t line = 0;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Drops a trailing comment that is not inside a string.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

bool parse_number(const std::string& text, Value& out) {
  std::int64_t iv = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), iv);
  if (ec == std::errc() && p == text.data() + text.size()) {
    out.data = iv;
    return true;
  }
  char* end = nullptr;
  const double dv = std::strtod(text.c_str(), &end);
  if (end == text.c_str() + text.size() && !text.empty()) {
    out.data = dv;
    return true;
  }
  return false;
}

Value parse_value(const std::string& raw, std::size_t line) {
  Value v;
  v.line = line;
  const std::string text = trim(raw);
  auto fail = [&](const std::string& why) {
    throw ConfigError("config line " + std::to_string(line) + ": " + why);
  };
  if (text.empty()) fail("missing value");
  if (text.front() == '"') {
    if (text.size() < 2 || text.back() != '"') fail("unterminated string");
    v.data = text.substr(1, text.size() - 2);
    return v;
  }
  if (text == "true" || text == "false") {
    v.data = text == "true";
    return v;
  }
  if (text.front() == '[') {
    if (text.back() != ']') fail("unterminated array");
    std::vector<double> items;
    std::stringstream ss(text.substr(1, text.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      Value n;
      if (!parse_number(item, n)) fail("arrays may only hold numbers");
      items.push_back(std::holds_alternative<std::int64_t>(n.data)
                          ? static_cast<double>(std::get<std::int64_t>(n.data))
                          : std::get<double>(n.data));
    }
    v.data = std::move(items);
    return v;
  }
  if (!parse_number(text, v)) fail("cannot parse value '" + text + "'");
  return v;
}

class Table {
 public:
  explicit Table(const std::string& text) {
    std::stringstream in(text);
    std::string raw, section;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
      ++line;
      const std::string s = trim(strip_comment(raw));
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']') throw ConfigError("config line " + std::to_string(line) + ": bad section header");
        section = trim(s.substr(1, s.size() - 2));
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("config line " + std::to_string(line) + ": expected key = value");
      }
      const std::string key = (section.empty() ? "" : section + ".") + trim(s.substr(0, eq));
      if (values_.count(key)) throw ConfigError("config line " + std::to_string(line) + ": duplicate key " + key);
      values_[key] = parse_value(s.substr(eq + 1), line);
    }
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  template <class T>
  void get(const std::string& key, T& out) {
    auto it = values_.find(key);
    if (it == values_.end()) return;
    used_.insert(key);
    assign(key, it->second, out);
  }

  void check_unused() const {
    for (const auto& [key, value] : values_) {
      if (!used_.count(key)) {
        throw ConfigError("config line " + std::to_string(value.line) + ": unknown key " + key);
      }
    }
  }

 private:
  [[noreturn]] static void type_error(const std::string& key, const Value& v, const char* want) {
    throw ConfigError("config line " + std::to_string(v.line) + ": " + key + " must be " + want);
  }
  static void assign(const std::string& key, const Value& v, bool& out) {
    if (!std::holds_alternative<bool>(v.data)) type_error(key, v, "true or false");
    out = std::get<bool>(v.data);
  }
  static void assign(const std::string& key, const Value& v, std::string& out) {
    if (!std::holds_alternative<std::string>(v.data)) type_error(key, v, "a string");
    out = std::get<std::string>(v.data);
  }
  static void assign(const std::string& key, const Value& v, double& out) {
    if (std::holds_alternative<std::int64_t>(v.data)) {
      out = static_cast<double>(std::get<std::int64_t>(v.data));
    } else if (std::holds_alternative<double>(v.data)) {
      out = std::get<double>(v.data);
    } else {
      type_error(key, v, "a number");
    }
  }
  static void assign(const std::string& key, const Value& v, int& out) {
    if (!std::holds_alternative<std::int64_t>(v.data)) type_error(key, v, "an integer");
    out = static_cast<int>(std::get<std::int64_t>(v.data));
  }
  static void assign(const std::string& key, const Value& v, std::uint64_t& out) {
    if (!std::holds_alternative<std::int64_t>(v.data) || std::get<std::int64_t>(v.data) < 0) {
      type_error(key, v, "a non-negative integer");
    }
    out = static_cast<std::uint64_t>(std::get<std::int64_t>(v.data));
  }
  static void assign(const std::string& key, const Value& v, std::vector<int>& out) {
    if (!std::holds_alternative<std::vector<double>>(v.data)) type_error(key, v, "an array");
    out.clear();
    for (double d : std::get<std::vector<double>>(v.data)) out.push_back(static_cast<int>(d));
  }

  std::map<std::string, Value> values_;
  std::set<std::string> used_;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  // Keep floats recognisable as floats when read back.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) { return "\"" + s + "\""; }

EvalSplit parse_split(const std::string& s) {
  if (s == "labeled") return EvalSplit::Labeled;
  if (s == "unlabeled") return EvalSplit::Unlabeled;
  if (s == "all") return EvalSplit::All;
  throw ConfigError("unknown eval_split '" + s + "'");
}

}  // namespace

SyntheticSpec small_synthetic_spec() {
  SyntheticSpec spec;
  spec.class_sizes = {20, 20, 20};
  spec.num_edges = 120;
  spec.homophily = 0.85;
  spec.degree_exponent = 2.5;
  spec.max_propensity_degree = 12;
  spec.vocabulary = 16;
  spec.words_per_node = 6;
  spec.topic_words = 4;
  spec.topic_weight = 0.5;
  return spec;
}

std::string to_string(EvalSplit split) {
  switch (split) {
    case EvalSplit::Labeled:
      return "labeled";
    case EvalSplit::Unlabeled:
      return "unlabeled";
    case EvalSplit::All:
      return "all";
  }
  return "labeled";
}

std::string to_string(DatasetFormat format) {
  switch (format) {
    case DatasetFormat::EdgeListCsv:
      return "edge-list+csv";
    case DatasetFormat::Linqs:
      return "linqs";
    case DatasetFormat::PlanetoidBinary:
      return "planetoid-binary";
  }
  return "edge-list+csv";
}

void ExperimentConfig::validate() const {
  if (dataset.source == DatasetSource::Files && dataset.path.empty()) {
    throw ConfigError("dataset.path is required when dataset.source = \"files\"");
  }
  if (dataset.labeled_fraction < 0.0 || dataset.labeled_fraction > 1.0) {
    throw ConfigError("dataset.labeled_fraction must be in [0, 1]");
  }
  if (dataset.degree_buckets < 1) throw ConfigError("dataset.degree_buckets must be >= 1");
  if (dataset.project_dim < 0) throw ConfigError("dataset.project_dim must be >= 0");
  if (!(perturbation.rate >= 0.0 && perturbation.rate <= 1.0)) {
    throw ConfigError("perturbation.rate must be in [0, 1]");
  }
  sgd.validate();
  schedule.validate();
  comms.validate();
  filter.validate();
  if (!(agent.attention_init >= 0.0) || !(agent.unlabeled_attention >= 0.0)) {
    throw ConfigError("attention initial values must be >= 0");
  }
  if (run.repeats < 1) throw ConfigError("experiment.repeats must be >= 1");
  if (run.embedding_every < 0 || run.checkpoint_every < 0) {
    throw ConfigError("export cadence must be >= 0");
  }
  if (run.degree_eval_agents < 1 || run.degree_eval_size < 1 || run.confidence_eval_agents < 1) {
    throw ConfigError("evaluation agent and set counts must be >= 1");
  }
  if (run.roc_points < 2) throw ConfigError("experiment.roc_points must be >= 2");
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  Table t(text);
  ExperimentConfig c;

  std::string source = "synthetic", format = to_string(c.dataset.format), attr_free = "degree-buckets";
  t.get("dataset.source", source);
  if (source == "synthetic") {
    c.dataset.source = DatasetSource::Synthetic;
  } else if (source == "files") {
    c.dataset.source = DatasetSource::Files;
  } else {
    throw ConfigError("dataset.source must be \"synthetic\" or \"files\"");
  }
  std::string path;
  t.get("dataset.path", path);
  if (!path.empty()) {
    std::filesystem::path p(path);
    c.dataset.path = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  }
  t.get("dataset.format", format);
  c.dataset.format = parse_dataset_format(format);
  t.get("dataset.attribute_free", attr_free);
  if (attr_free == "degree-buckets") {
    c.dataset.attribute_free = AttributeFreeFeatures::DegreeBuckets;
  } else if (attr_free == "identity") {
    c.dataset.attribute_free = AttributeFreeFeatures::Identity;
  } else {
    throw ConfigError("dataset.attribute_free must be \"degree-buckets\" or \"identity\"");
  }
  t.get("dataset.degree_buckets", c.dataset.degree_buckets);
  t.get("dataset.preset", c.dataset.preset);
  if (c.dataset.preset == "cora-like") {
    c.dataset.synthetic = cora_like_spec();
  } else if (c.dataset.preset == "small") {
    c.dataset.synthetic = small_synthetic_spec();
  } else {
    throw ConfigError("unknown dataset.preset '" + c.dataset.preset + "'");
  }
  SyntheticSpec& s = c.dataset.synthetic;
  t.get("dataset.class_sizes", s.class_sizes);
  t.get("dataset.num_edges", s.num_edges);
  t.get("dataset.homophily", s.homophily);
  t.get("dataset.degree_exponent", s.degree_exponent);
  t.get("dataset.max_propensity_degree", s.max_propensity_degree);
  t.get("dataset.vocabulary", s.vocabulary);
  t.get("dataset.words_per_node", s.words_per_node);
  t.get("dataset.topic_words", s.topic_words);
  t.get("dataset.topic_weight", s.topic_weight);
  t.get("dataset.labeled_fraction", c.dataset.labeled_fraction);
  t.get("dataset.project_dim", c.dataset.project_dim);
  t.get("dataset.seed", c.dataset.seed);

  std::string strategy = to_string(c.perturbation.strategy);
  t.get("perturbation.strategy", strategy);
  c.perturbation.strategy = parse_perturb_strategy(strategy);
  t.get("perturbation.rate", c.perturbation.rate);
  t.get("perturbation.seed", c.perturbation.seed);

  t.get("sgd.lr_A", c.sgd.lr_A);
  t.get("sgd.lr_M", c.sgd.lr_M);
  t.get("sgd.lr_D", c.sgd.lr_D);
  t.get("sgd.lr_N", c.sgd.lr_N);
  t.get("sgd.steps_per_round", c.sgd.steps_per_round);
  if (t.has("sgd.grad_clip")) {
    double clip = 0.0;
    t.get("sgd.grad_clip", clip);
    c.sgd.grad_clip = clip;
  }

  t.get("schedule.total_rounds", c.schedule.total_rounds);
  t.get("schedule.convergence_window", c.schedule.convergence_window);
  t.get("schedule.convergence_tol", c.schedule.convergence_tol);

  t.get("comms.rho", c.comms.rho);
  t.get("comms.Q", c.comms.Q);
  t.get("comms.xi", c.comms.xi);
  t.get("comms.middleware_steps", c.comms.middleware_steps);
  t.get("comms.middleware_lr", c.comms.middleware_lr);
  std::string init = c.comms.middleware_init == MiddlewareInit::Own ? "own" : "random";
  t.get("comms.middleware_init", init);
  if (init == "own") {
    c.comms.middleware_init = MiddlewareInit::Own;
  } else if (init == "random") {
    c.comms.middleware_init = MiddlewareInit::Random;
  } else {
    throw ConfigError("comms.middleware_init must be \"own\" or \"random\"");
  }
  t.get("comms.middleware_max_2hop", c.comms.middleware_max_2hop);
  t.get("comms.fuse_D_direction", c.comms.fuse_D_direction);
  t.get("comms.fuse_every", c.comms.fuse_every);
  t.get("comms.fuse_D_every", c.comms.fuse_D_every);

  t.get("agent.attention_init", c.agent.attention_init);
  t.get("agent.unlabeled_attention", c.agent.unlabeled_attention);

  if (t.has("filter.attention_threshold")) {
    double tau = 0.0;
    t.get("filter.attention_threshold", tau);
    c.filter.attention_threshold = tau;
  }
  t.get("filter.attention_percentile", c.filter.attention_percentile);
  t.get("filter.confidence_threshold", c.filter.confidence_threshold);
  t.get("filter.detectors_per_suspect", c.filter.detectors_per_suspect);
  t.get("filter.degree_tolerance", c.filter.degree_tolerance);
  t.get("filter.votes_required", c.filter.votes_required);
  t.get("filter.refinement_rounds", c.filter.refinement_rounds);
  t.get("filter.iterations", c.filter.iterations);
  t.get("filter.seed", c.filter.seed);

  t.get("experiment.seed", c.run.seed);
  t.get("experiment.repeats", c.run.repeats);
  std::string out;
  t.get("experiment.output_dir", out);
  if (!out.empty()) c.run.output_dir = out;
  std::string split = to_string(c.run.eval_split);
  t.get("experiment.eval_split", split);
  c.run.eval_split = parse_split(split);
  t.get("experiment.filter", c.run.filter);
  t.get("experiment.baseline", c.run.baseline);
  t.get("experiment.embedding_every", c.run.embedding_every);
  t.get("experiment.checkpoint_every", c.run.checkpoint_every);
  t.get("experiment.degree_eval_agents", c.run.degree_eval_agents);
  t.get("experiment.degree_eval_size", c.run.degree_eval_size);
  t.get("experiment.confidence_eval_agents", c.run.confidence_eval_agents);
  t.get("experiment.roc_points", c.run.roc_points);

  t.check_unused();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string to_toml(const ExperimentConfig& c) {
  std::ostringstream o;
  const SyntheticSpec& s = c.dataset.synthetic;
  o << "[dataset]\n";
  o << "source = " << quote(c.dataset.source == DatasetSource::Synthetic ? "synthetic" : "files") << "\n";
  if (!c.dataset.path.empty()) o << "path = " << quote(c.dataset.path.string()) << "\n";
  o << "format = " << quote(to_string(c.dataset.format)) << "\n";
  o << "attribute_free = "
    << quote(c.dataset.attribute_free == AttributeFreeFeatures::DegreeBuckets ? "degree-buckets" : "identity")
    << "\n";
  o << "degree_buckets = " << c.dataset.degree_buckets << "\n";
  o << "preset = " << quote(c.dataset.preset) << "\n";
  o << "class_sizes = [";
  for (std::size_t k = 0; k < s.class_sizes.size(); ++k) o << (k ? ", " : "") << s.class_sizes[k];
  o << "]\n";
  o << "num_edges = " << s.num_edges << "\n";
  o << "homophily = " << num(s.homophily) << "\n";
  o << "degree_exponent = " << num(s.degree_exponent) << "\n";
  o << "max_propensity_degree = " << s.max_propensity_degree << "\n";
  o << "vocabulary = " << s.vocabulary << "\n";
  o << "words_per_node = " << s.words_per_node << "\n";
  o << "topic_words = " << s.topic_words << "\n";
  o << "topic_weight = " << num(s.topic_weight) << "\n";
  o << "labeled_fraction = " << num(c.dataset.labeled_fraction) << "\n";
  o << "project_dim = " << c.dataset.project_dim << "\n";
  o << "seed = " << c.dataset.seed << "\n\n";

  o << "[perturbation]\n";
  o << "strategy = " << quote(to_string(c.perturbation.strategy)) << "\n";
  o << "rate = " << num(c.perturbation.rate) << "\n";
  o << "seed = " << c.perturbation.seed << "\n\n";

  o << "[sgd]\n";
  o << "lr_A = " << num(c.sgd.lr_A) << "\nlr_M = " << num(c.sgd.lr_M) << "\nlr_D = " << num(c.sgd.lr_D)
    << "\nlr_N = " << num(c.sgd.lr_N) << "\n";
  o << "steps_per_round = " << c.sgd.steps_per_round << "\n";
  if (c.sgd.grad_clip) o << "grad_clip = " << num(*c.sgd.grad_clip) << "\n";
  o << "\n[schedule]\n";
  o << "total_rounds = " << c.schedule.total_rounds << "\n";
  o << "convergence_window = " << c.schedule.convergence_window << "\n";
  o << "convergence_tol = " << num(c.schedule.convergence_tol) << "\n\n";

  o << "[comms]\n";
  o << "rho = " << c.comms.rho << "\nQ = " << c.comms.Q << "\nxi = " << num(c.comms.xi) << "\n";
  o << "middleware_steps = " << c.comms.middleware_steps << "\n";
  o << "middleware_lr = " << num(c.comms.middleware_lr) << "\n";
  o << "middleware_init = " << quote(c.comms.middleware_init == MiddlewareInit::Own ? "own" : "random") << "\n";
  o << "middleware_max_2hop = " << c.comms.middleware_max_2hop << "\n";
  o << "fuse_D_direction = " << num(c.comms.fuse_D_direction) << "\n";
  o << "fuse_every = " << c.comms.fuse_every << "\nfuse_D_every = " << c.comms.fuse_D_every << "\n\n";

  o << "[agent]\n";
  o << "attention_init = " << num(c.agent.attention_init) << "\n";
  o << "unlabeled_attention = " << num(c.agent.unlabeled_attention) << "\n\n";

  o << "[filter]\n";
  if (c.filter.attention_threshold) o << "attention_threshold = " << num(*c.filter.attention_threshold) << "\n";
  o << "attention_percentile = " << num(c.filter.attention_percentile) << "\n";
  o << "confidence_threshold = " << num(c.filter.confidence_threshold) << "\n";
  o << "detectors_per_suspect = " << c.filter.detectors_per_suspect << "\n";
  o << "degree_tolerance = " << c.filter.degree_tolerance << "\n";
  o << "votes_required = " << c.filter.votes_required << "\n";
  o << "refinement_rounds = " << c.filter.refinement_rounds << "\n";
  o << "iterations = " << c.filter.iterations << "\n";
  o << "seed = " << c.filter.seed << "\n\n";

  o << "[experiment]\n";
  o << "seed = " << c.run.seed << "\nrepeats = " << c.run.repeats << "\n";
  o << "output_dir = " << quote(c.run.output_dir.string()) << "\n";
  o << "eval_split = " << quote(to_string(c.run.eval_split)) << "\n";
  o << "filter = " << (c.run.filter ? "true" : "false") << "\n";
  o << "baseline = " << (c.run.baseline ? "true" : "false") << "\n";
  o << "embedding_every = " << c.run.embedding_every << "\n";
  o << "checkpoint_every = " << c.run.checkpoint_every << "\n";
  o << "degree_eval_agents = " << c.run.degree_eval_agents << "\n";
  o << "degree_eval_size = " << c.run.degree_eval_size << "\n";
  o << "confidence_eval_agents = " << c.run.confidence_eval_agents << "\n";
  o << "roc_points = " << c.run.roc_points << "\n";
  return o.str();
}

}  // namespace gagn
