#include "gagn/errors.hpp"
#include "gagn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <unordered_set>

namespace gagn {
namespace {

using EdgeSet = std::unordered_set<Edge, EdgeHash>;

std::size_t change_budget(double rate, std::size_t num_edges) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw PreconditionError("perturbation rate must be in [0, 1]");
  return static_cast<std::size_t>(std::llround(rate * static_cast<double>(num_edges)));
}

std::size_t pair_count(std::size_t n) { return n < 2 ? 0 : n * (n - 1) / 2; }

std::vector<Edge> sorted(const EdgeSet& set) {
  std::vector<Edge> out(set.begin(), set.end());
  std::sort(out.begin(), out.end());
  return out;
}

// Uniformly random non-edges. Draws by rejection while the graph is sparse,
// enumerates the complement when it is dense.
std::vector<Edge> random_non_edges(const AttributedGraph& graph, std::size_t count,
                                   std::mt19937_64& rng) {
  const std::size_t n = graph.num_nodes();
  const std::size_t free_pairs = pair_count(n) - graph.num_edges();
  if (count > free_pairs) {
    throw CapacityError("cannot add " + std::to_string(count) + " edges: only " +
                        std::to_string(free_pairs) + " non-edges exist");
  }
  std::vector<Edge> out;
  if (count == 0) return out;
  if (count * 4 > free_pairs) {
    std::vector<Edge> complement;
    complement.reserve(free_pairs);
    for (NodeId u = 0; u < n; ++u) {
      for (NodeId v = u + 1; v < n; ++v) {
        if (!graph.has_edge(u, v)) complement.emplace_back(u, v);
      }
    }
    std::shuffle(complement.begin(), complement.end(), rng);
    complement.resize(count);
    std::sort(complement.begin(), complement.end());
    return complement;
  }
  std::uniform_int_distribution<NodeId> node(0, static_cast<NodeId>(n - 1));
  EdgeSet chosen;
  while (chosen.size() < count) {
    NodeId a = node(rng), b = node(rng);
    if (a == b || graph.has_edge(a, b)) continue;
    chosen.emplace(a, b);
  }
  return sorted(chosen);
}

// Low-degree nodes are the cheapest to flip, so each injected edge picks one
// endpoint with probability proportional to 1 / (deg + 1) and the other
// uniformly.
std::vector<Edge> degree_targeted_non_edges(const AttributedGraph& graph, std::size_t count,
                                            std::mt19937_64& rng) {
  const std::size_t n = graph.num_nodes();
  const std::size_t free_pairs = pair_count(n) - graph.num_edges();
  if (count > free_pairs) {
    throw CapacityError("cannot add " + std::to_string(count) + " edges: only " +
                        std::to_string(free_pairs) + " non-edges exist");
  }
  std::vector<double> weight(n);
  for (std::size_t i = 0; i < n; ++i) weight[i] = 1.0 / (graph.degree(static_cast<NodeId>(i)) + 1.0);
  std::discrete_distribution<NodeId> target(weight.begin(), weight.end());
  std::uniform_int_distribution<NodeId> node(0, static_cast<NodeId>(n - 1));
  EdgeSet chosen;
  std::size_t attempts = 0;
  const std::size_t max_attempts = 100 * std::max<std::size_t>(count, 1) + 1000;
  while (chosen.size() < count) {
    if (++attempts > max_attempts) {
      // Targets saturated; fill the rest uniformly.
      for (const Edge& e : random_non_edges(graph, free_pairs, rng)) {
        if (chosen.size() == count) break;
        chosen.insert(e);
      }
      break;
    }
    NodeId a = target(rng), b = node(rng);
    if (a == b || graph.has_edge(a, b)) continue;
    chosen.emplace(a, b);
  }
  return sorted(chosen);
}

}  // namespace

PerturbStrategy parse_perturb_strategy(const std::string& name) {
  if (name == "random-add") return PerturbStrategy::RandomAdd;
  if (name == "random-rewire") return PerturbStrategy::RandomRewire;
  if (name == "degree-targeted-add") return PerturbStrategy::DegreeTargetedAdd;
  throw ConfigError("unknown perturbation strategy '" + name + "'");
}

std::string to_string(PerturbStrategy strategy) {
  switch (strategy) {
    case PerturbStrategy::RandomAdd:
      return "random-add";
    case PerturbStrategy::RandomRewire:
      return "random-rewire";
    case PerturbStrategy::DegreeTargetedAdd:
      return "degree-targeted-add";
  }
  return "unknown";
}

bool PerturbationRecord::is_added(const Edge& e) const {
  return std::binary_search(added_edges.begin(), added_edges.end(), e);
}

std::vector<Edge> rewire_edges(const std::vector<Edge>& edges, std::size_t num_nodes,
                               std::size_t target_changes, std::uint64_t seed) {
  (void)num_nodes;
  std::vector<Edge> current = edges;
  if (target_changes == 0) return current;
  if (current.size() < 2) throw CapacityError("rewiring needs at least two edges");

  const EdgeSet original(edges.begin(), edges.end());
  EdgeSet present(edges.begin(), edges.end());
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, current.size() - 1);
  std::bernoulli_distribution coin(0.5);

  // |E xor E'| counts removed originals plus added non-originals.
  std::int64_t changes = 0;
  const auto target = static_cast<std::int64_t>(target_changes);
  const std::size_t max_attempts = 100 * current.size();
  for (std::size_t attempt = 0; attempt < max_attempts && changes < target; ++attempt) {
    const std::size_t i = pick(rng), j = pick(rng);
    if (i == j) continue;
    const Edge e1 = current[i], e2 = current[j];
    NodeId a = e1.u, b = e1.v, c = e2.u, d = e2.v;
    if (coin(rng)) std::swap(c, d);
    // (a,b),(c,d) -> (a,d),(c,b)
    if (a == d || c == b || a == c || b == d) continue;
    const Edge n1(a, d), n2(c, b);
    if (present.count(n1) || present.count(n2)) continue;

    for (const Edge& gone : {e1, e2}) {
      present.erase(gone);
      changes += original.count(gone) ? 1 : -1;
    }
    for (const Edge& made : {n1, n2}) {
      present.insert(made);
      changes += original.count(made) ? -1 : 1;
    }
    current[i] = n1;
    current[j] = n2;
  }
  if (changes < target) {
    throw CapacityError("rewiring reached " + std::to_string(changes) + " of " +
                        std::to_string(target_changes) + " changes within " +
                        std::to_string(max_attempts) + " swap attempts");
  }
  std::sort(current.begin(), current.end());
  return current;
}

std::vector<Edge> apply_record(const std::vector<Edge>& edges, const PerturbationRecord& record) {
  std::vector<Edge> kept;
  kept.reserve(edges.size() + record.added_edges.size());
  std::set_difference(edges.begin(), edges.end(), record.removed_edges.begin(),
                      record.removed_edges.end(), std::back_inserter(kept));
  std::vector<Edge> out;
  out.reserve(kept.size() + record.added_edges.size());
  std::set_union(kept.begin(), kept.end(), record.added_edges.begin(), record.added_edges.end(),
                 std::back_inserter(out));
  return out;
}

PerturbResult perturb(const AttributedGraph& graph, double rate, PerturbStrategy strategy,
                      std::uint64_t seed) {
  const std::size_t budget = change_budget(rate, graph.num_edges());
  PerturbationRecord record;
  record.rate = rate;
  if (budget == 0) return {graph, record};

  std::mt19937_64 rng(seed);
  switch (strategy) {
    case PerturbStrategy::RandomAdd:
      record.added_edges = random_non_edges(graph, budget, rng);
      break;
    case PerturbStrategy::DegreeTargetedAdd:
      record.added_edges = degree_targeted_non_edges(graph, budget, rng);
      break;
    case PerturbStrategy::RandomRewire: {
      auto rewired = rewire_edges(graph.edges(), graph.num_nodes(), budget, rng());
      std::set_difference(graph.edges().begin(), graph.edges().end(), rewired.begin(),
                          rewired.end(), std::back_inserter(record.removed_edges));
      std::set_difference(rewired.begin(), rewired.end(), graph.edges().begin(),
                          graph.edges().end(), std::back_inserter(record.added_edges));
      break;
    }
  }
  auto edges = apply_record(graph.edges(), record);
  return {graph.with_edges(std::move(edges)), std::move(record)};
}

TestGraphs build_test_graphs(const AttributedGraph& graph, const PerturbationRecord& record,
                             std::uint64_t seed, unsigned selection) {
  if ((selection & kTestAdversarial) && record.added_edges.empty()) {
    throw PreconditionError("adversarial test graph needs a record with injected edges");
  }
  TestGraphs out;
  std::mt19937_64 rng(seed);
  if (selection & kTestOriginal) {
    for (const Edge& e : graph.edges()) out.original.push_back({e, 1});
  }
  if ((selection & kTestRandom) && graph.num_nodes() >= 2) {
    std::uniform_int_distribution<NodeId> node(0, static_cast<NodeId>(graph.num_nodes() - 1));
    const std::size_t count = std::min(graph.num_edges(), pair_count(graph.num_nodes()));
    std::set<Edge> drawn;
    while (drawn.size() < count) {
      NodeId a = node(rng), b = node(rng);
      if (a != b) drawn.emplace(a, b);
    }
    for (const Edge& e : drawn) out.random.push_back({e, graph.has_edge(e.u, e.v) ? 1 : 0});
  }
  if ((selection & kTestRewired) && graph.num_edges() >= 2) {
    // Fully shuffled degree-preserving rewiring. Swaps that happen to recreate
    // an original edge are left out so every remaining label-0 pair is true.
    std::vector<Edge> rewired;
    try {
      rewired = rewire_edges(graph.edges(), graph.num_nodes(), graph.num_edges(), rng());
    } catch (const CapacityError&) {
      rewired.clear();
    }
    for (const Edge& e : rewired) {
      if (!graph.has_edge(e.u, e.v)) out.rewired.push_back({e, 0});
    }
  }
  if (selection & kTestAdversarial) {
    for (const Edge& e : record.added_edges) out.adversarial.push_back({e, 0});
  }
  return out;
}

}  // namespace gagn
