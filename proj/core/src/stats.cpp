#include "gagn/stats.hpp"

#include "gagn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gagn::stats {

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double stddev(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double half_range(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  return (*hi - *lo) / 2.0;
}

double percentile(std::vector<double> xs, double q) {
  if (xs.empty()) throw PreconditionError("percentile of an empty sample");
  if (!(q >= 0.0 && q <= 100.0)) throw PreconditionError("percentile must be in [0, 100]");
  std::sort(xs.begin(), xs.end());
  const double pos = q / 100.0 * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) return std::nullopt;
  const double mx = mean(xs), my = mean(ys);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxy += (xs[k] - mx) * (ys[k] - my);
    sxx += (xs[k] - mx) * (xs[k] - mx);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

MannWhitney mann_whitney_less(std::span<const double> xs, std::span<const double> ys) {
  const std::size_t n1 = xs.size(), n2 = ys.size();
  if (n1 == 0 || n2 == 0) throw PreconditionError("Mann-Whitney needs two non-empty samples");
  struct Item {
    double value;
    bool first;
  };
  std::vector<Item> all;
  all.reserve(n1 + n2);
  for (double x : xs) all.push_back({x, true});
  for (double y : ys) all.push_back({y, false});
  std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.value < b.value; });

  const double n = static_cast<double>(n1 + n2);
  double rank_sum = 0.0, tie_term = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].value == all[i].value) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].first) rank_sum += avg_rank;
    }
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  MannWhitney out;
  const double a = static_cast<double>(n1), b = static_cast<double>(n2);
  out.u = rank_sum - a * (a + 1.0) / 2.0;
  const double mu = a * b / 2.0;
  const double var = a * b / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (var <= 0.0) {
    out.z = 0.0;
    out.p = 1.0;
    return out;
  }
  out.z = (out.u - mu + 0.5) / std::sqrt(var);
  out.p = 0.5 * std::erfc(-out.z / std::sqrt(2.0));
  return out;
}

Summary summarize(std::span<const double> xs) {
  Summary s;
  s.n = xs.size();
  if (xs.empty()) return s;
  s.mean = mean(xs);
  s.half_range = half_range(xs);
  s.std = stddev(xs);
  auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  s.min = *lo;
  s.max = *hi;
  return s;
}

}  // namespace gagn::stats
