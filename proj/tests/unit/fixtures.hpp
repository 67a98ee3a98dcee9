#pragma once

#include "gagn/agent.hpp"
#include "gagn/config.hpp"
#include "gagn/graph.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace fx {

using gagn::AgentState;
using gagn::AttributedGraph;
using gagn::Edge;
using gagn::Matrix;
using gagn::NeighborView;
using gagn::NodeId;
using gagn::Vector;

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                            double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  return random_matrix(rng, n, 1, scale).col(0);
}

inline AttributedGraph make_graph(std::size_t n, std::vector<Edge> edges, int dz = 2, int classes = 2,
                                  std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % static_cast<std::size_t>(classes));
  return AttributedGraph(n, std::move(edges), random_matrix(rng, static_cast<Eigen::Index>(n), dz),
                         labels, classes, std::vector<bool>(n, true));
}

inline AttributedGraph path_graph(std::size_t n, int dz = 2) {
  std::vector<Edge> e;
  for (NodeId i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return make_graph(n, e, dz);
}

inline AttributedGraph complete_graph(std::size_t n, int dz = 2) {
  std::vector<Edge> e;
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = i + 1; j < n; ++j) e.emplace_back(i, j);
  return make_graph(n, e, dz);
}

inline AttributedGraph small_synthetic(std::uint64_t seed = 3) {
  return gagn::make_synthetic(gagn::small_synthetic_spec(), seed);
}

// A standalone agent with `deg` neighbors and a matching view.
struct AgentFixture {
  AgentState agent;
  NeighborView view;
};

inline AgentFixture random_fixture(std::mt19937_64& rng, int dz, int dL, int deg, int deg_max,
                                   int two_hop = 3, bool labeled = true) {
  AgentFixture f;
  AgentState& a = f.agent;
  a.node_id = 0;
  a.feature = random_vector(rng, dz);
  std::uniform_int_distribution<int> cls(0, dL - 1);
  a.label = cls(rng);
  a.has_label = labeled;
  for (int k = 0; k < deg; ++k) a.neighbors.push_back(static_cast<NodeId>(k + 1));
  std::uniform_real_distribution<double> att(0.2, 2.0);
  a.attention.resize(deg + 1);
  for (int k = 0; k <= deg; ++k) a.attention[k] = att(rng);
  a.theta_M = random_matrix(rng, dz, dL, 0.5);
  a.theta_D = random_matrix(rng, dz, deg_max, 0.5);
  a.theta_N = random_vector(rng, 2 * dz, 0.5);

  NeighborView& v = f.view;
  v.ids = a.neighbors;
  v.features = random_matrix(rng, deg, dz);
  std::uniform_int_distribution<int> d(1, deg_max);
  for (int k = 0; k < deg; ++k) v.degrees.push_back(d(rng));
  v.self_degree = std::min(std::max(deg, 1), deg_max);
  for (int k = 0; k < two_hop; ++k) v.two_hop_ids.push_back(static_cast<NodeId>(deg + 1 + k));
  v.two_hop = random_matrix(rng, two_hop, dz);
  return f;
}

// Central differences of f at every entry of x.
template <class Mat>
Mat numeric_gradient(Mat x, const std::function<double(const Mat&)>& f, double h = 1e-5) {
  Mat g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double keep = x(i, j);
      x(i, j) = keep + h;
      const double up = f(x);
      x(i, j) = keep - h;
      const double down = f(x);
      x(i, j) = keep;
      g(i, j) = (up - down) / (2 * h);
    }
  }
  return g;
}

template <class A, class B>
double relative_error(const A& analytic, const B& numeric) {
  const double scale = std::max({analytic.norm(), numeric.norm(), 1e-8});
  return (analytic - numeric).norm() / scale;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("gagn-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace fx
