#pragma once

#include <Eigen/Dense>

#include <compare>
#include <cstdint>
#include <functional>
#include <utility>

namespace gagn {

using NodeId = std::uint32_t;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Undirected edge, always stored with u < v.
struct Edge {
  NodeId u = 0;
  NodeId v = 0;

  Edge() = default;
  Edge(NodeId a, NodeId b) : u(a < b ? a : b), v(a < b ? b : a) {}

  auto operator<=>(const Edge&) const = default;
};

struct EdgeHash {
  std::size_t operator()(const Edge& e) const noexcept {
    return std::hash<std::uint64_t>{}((static_cast<std::uint64_t>(e.u) << 32) | e.v);
  }
};

}  // namespace gagn
