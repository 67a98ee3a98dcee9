#pragma once

#include <optional>
#include <span>
#include <vector>

namespace gagn::stats {

double mean(std::span<const double> xs);
// Sample standard deviation (n - 1); 0 for fewer than two values.
double stddev(std::span<const double> xs);
// (max - min) / 2
double half_range(std::span<const double> xs);
// Linear interpolation between closest ranks, q in [0, 100].
double percentile(std::vector<double> xs, double q);

// nullopt when either side has zero variance or the sizes differ.
std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys);

struct MannWhitney {
  double u = 0.0;  // U statistic of the first sample
  double z = 0.0;
  double p = 1.0;  // one-sided: first sample tends to be smaller
};

// Normal approximation with tie correction and continuity correction.
MannWhitney mann_whitney_less(std::span<const double> xs, std::span<const double> ys);

struct Summary {
  double mean = 0.0;
  double half_range = 0.0;
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t n = 0;
};

Summary summarize(std::span<const double> xs);

}  // namespace gagn::stats
