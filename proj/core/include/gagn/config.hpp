#pragma once

#include "gagn/comms.hpp"
#include "gagn/defense.hpp"
#include "gagn/graph.hpp"
#include "gagn/learning.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gagn {

enum class DatasetSource { Synthetic, Files };
enum class EvalSplit { Labeled, Unlabeled, All };

struct DatasetConfig {
  DatasetSource source = DatasetSource::Synthetic;
  std::filesystem::path path;
  DatasetFormat format = DatasetFormat::EdgeListCsv;
  AttributeFreeFeatures attribute_free = AttributeFreeFeatures::DegreeBuckets;
  int degree_buckets = 16;
  // Synthetic generator; "cora-like" starts from cora_like_spec(), "small"
  // from a 60-node three-class graph. Explicit keys override the preset.
  std::string preset = "cora-like";
  SyntheticSpec synthetic;
  double labeled_fraction = 1.0;
  // Random Gaussian projection of the features to this dimension; 0 keeps them.
  int project_dim = 0;
  std::uint64_t seed = 1;
};

struct PerturbationConfig {
  PerturbStrategy strategy = PerturbStrategy::RandomAdd;
  double rate = 0.0;
  std::uint64_t seed = 7;
};

struct RunConfig {
  std::uint64_t seed = 42;
  int repeats = 1;
  std::filesystem::path output_dir = "gagn-out";
  EvalSplit eval_split = EvalSplit::Labeled;
  bool filter = true;
  // Refine an unfiltered copy for as many rounds as the filter does, to
  // compare accuracy with and without filtering.
  bool baseline = true;
  int embedding_every = 0;
  int checkpoint_every = 0;
  int degree_eval_agents = 1;
  int degree_eval_size = 50;
  int confidence_eval_agents = 50;
  int roc_points = 21;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  PerturbationConfig perturbation;
  SgdConfig sgd;
  RoundSchedule schedule;
  CommsConfig comms;
  FilterConfig filter;
  AgentInit agent;
  RunConfig run;

  // Throws ConfigError.
  void validate() const;
};

// TOML subset: [section] headers, key = value lines, '#' comments. Values
// are quoted strings, integers, floats, true/false, or flat arrays of
// numbers. Unknown sections or keys are errors. Relative dataset paths are
// resolved against `base_dir`.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

// Canonical text form; parse_config(to_toml(c)) reproduces c.
std::string to_toml(const ExperimentConfig& cfg);

SyntheticSpec small_synthetic_spec();
std::string to_string(EvalSplit split);
std::string to_string(DatasetFormat format);

}  // namespace gagn
