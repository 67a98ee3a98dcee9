#include "gagn/errors.hpp"
#include "gagn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

namespace gagn {

SyntheticSpec cora_like_spec() {
  SyntheticSpec spec;
  // Case_Based, Genetic_Algorithms, Neural_Networks, Probabilistic_Methods,
  // Reinforcement_Learning, Rule_Learning, Theory.
  spec.class_sizes = {298, 418, 818, 426, 217, 180, 351};
  spec.num_edges = 5278;
  spec.homophily = 0.81;
  spec.degree_exponent = 2.5;
  spec.max_propensity_degree = 168;
  spec.vocabulary = 64;
  spec.words_per_node = 12;
  spec.topic_words = 8;
  spec.topic_weight = 0.3;
  return spec;
}

AttributedGraph make_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  const auto num_classes = static_cast<int>(spec.class_sizes.size());
  if (num_classes < 1) throw ConfigError("synthetic graph needs at least one class");
  const std::size_t n =
      static_cast<std::size_t>(std::accumulate(spec.class_sizes.begin(), spec.class_sizes.end(), 0));
  if (n < 2) throw ConfigError("synthetic graph needs at least two nodes");
  if (spec.vocabulary < 1 || spec.words_per_node < 1) throw ConfigError("bad synthetic feature spec");
  if (spec.num_edges > n * (n - 1) / 4) throw ConfigError("synthetic edge count too dense");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<int> labels;
  labels.reserve(n);
  for (int c = 0; c < num_classes; ++c) labels.insert(labels.end(), spec.class_sizes[c], c);
  std::shuffle(labels.begin(), labels.end(), rng);

  // Pareto propensities, capped so the expected top degree stays near the target.
  std::vector<double> propensity(n);
  const double shape = std::max(spec.degree_exponent - 1.0, 0.1);
  for (auto& p : propensity) p = std::pow(1.0 - unit(rng), -1.0 / shape);
  const double mean_degree = 2.0 * static_cast<double>(spec.num_edges) / static_cast<double>(n);
  for (int pass = 0; pass < 5; ++pass) {
    const double mean_p = std::accumulate(propensity.begin(), propensity.end(), 0.0) / static_cast<double>(n);
    const double cap = mean_p * spec.max_propensity_degree / mean_degree;
    for (auto& p : propensity) p = std::min(p, cap);
  }

  std::vector<std::vector<NodeId>> members(num_classes);
  std::vector<std::vector<double>> member_weight(num_classes);
  for (NodeId i = 0; i < n; ++i) {
    members[labels[i]].push_back(i);
    member_weight[labels[i]].push_back(propensity[i]);
  }
  std::discrete_distribution<NodeId> any_node(propensity.begin(), propensity.end());
  std::vector<std::discrete_distribution<std::size_t>> class_node;
  for (int c = 0; c < num_classes; ++c) {
    class_node.emplace_back(member_weight[c].begin(), member_weight[c].end());
  }

  // Each isolated node later costs one attachment edge, so sampling stops
  // early enough for the total to land on num_edges.
  std::unordered_set<Edge, EdgeHash> edges;
  std::vector<int> degree(n, 0);
  std::size_t isolated = n;
  while (edges.size() + isolated < spec.num_edges) {
    const NodeId u = any_node(rng);
    NodeId v;
    if (unit(rng) < spec.homophily || num_classes == 1) {
      v = members[labels[u]][class_node[labels[u]](rng)];
    } else {
      do {
        v = any_node(rng);
      } while (labels[v] == labels[u]);
    }
    if (u == v || !edges.emplace(u, v).second) continue;
    for (NodeId end : {u, v}) {
      if (degree[end]++ == 0) --isolated;
    }
  }

  // Attach isolated nodes, then stray components, to same-class partners.
  for (NodeId i = 0; i < n; ++i) {
    if (degree[i] > 0) continue;
    const auto& pool = members[labels[i]];
    NodeId v = i;
    while (v == i && pool.size() > 1) v = pool[class_node[labels[i]](rng)];
    if (v == i) v = static_cast<NodeId>((i + 1) % n);
    edges.emplace(i, v);
    ++degree[i];
    ++degree[v];
  }
  std::vector<Edge> edge_list(edges.begin(), edges.end());
  std::sort(edge_list.begin(), edge_list.end());

  Matrix features = Matrix::Zero(static_cast<Eigen::Index>(n), spec.vocabulary);
  std::vector<std::vector<int>> topics(num_classes);
  {
    std::vector<int> words(spec.vocabulary);
    std::iota(words.begin(), words.end(), 0);
    std::shuffle(words.begin(), words.end(), rng);
    const int per_class = std::max(1, std::min(spec.topic_words, spec.vocabulary));
    for (int c = 0; c < num_classes; ++c) {
      for (int k = 0; k < per_class; ++k) {
        topics[c].push_back(words[static_cast<std::size_t>(c * per_class + k) % words.size()]);
      }
    }
  }
  std::uniform_int_distribution<int> any_word(0, spec.vocabulary - 1);
  for (NodeId i = 0; i < n; ++i) {
    const auto& topic = topics[labels[i]];
    std::uniform_int_distribution<std::size_t> topic_word(0, topic.size() - 1);
    for (int w = 0; w < spec.words_per_node; ++w) {
      const int word = unit(rng) < spec.topic_weight ? topic[topic_word(rng)] : any_word(rng);
      features(i, word) = 1.0;
    }
  }

  std::vector<bool> mask(n, true);
  if (spec.labeled_fraction < 1.0) {
    for (std::size_t i = 0; i < n; ++i) mask[i] = unit(rng) < spec.labeled_fraction;
  }
  AttributedGraph graph(n, edge_list, features, labels, num_classes, mask);
  if (graph.connected()) return graph;

  // Link every non-giant component to the giant one.
  std::vector<int> component(n, -1);
  int count = 0;
  std::vector<std::size_t> sizes;
  for (NodeId s = 0; s < n; ++s) {
    if (component[s] >= 0) continue;
    const auto dist = graph.bfs_distances(s);
    std::size_t size = 0;
    for (NodeId i = 0; i < n; ++i) {
      if (dist[i] >= 0) {
        component[i] = count;
        ++size;
      }
    }
    sizes.push_back(size);
    ++count;
  }
  const int giant = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  std::vector<bool> linked(count, false);
  linked[giant] = true;
  for (NodeId i = 0; i < n; ++i) {
    if (linked[component[i]]) continue;
    linked[component[i]] = true;
    NodeId partner = i;
    for (int tries = 0; tries < 1000 && component[partner] != giant; ++tries) {
      partner = members[labels[i]][class_node[labels[i]](rng)];
    }
    while (component[partner] != giant) partner = any_node(rng);
    edge_list.emplace_back(i, partner);
  }
  return graph.with_edges(std::move(edge_list));
}

}  // namespace gagn
