#include "gagn/agent.hpp"
#include "gagn/errors.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace gagn {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

constexpr std::array<char, 8> kMagic = {'G', 'A', 'G', 'N', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw DataError("cannot write " + path.string());
  }
  template <class T>
  void put(T value) {
    out_.write(reinterpret_cast<const char*>(&value), sizeof value);
  }
  void put_block(const double* data, std::size_t count) {
    out_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
  }
  void put_row_major(const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) put(m(r, c));
    }
  }
  void raw(const char* data, std::size_t n) { out_.write(data, static_cast<std::streamsize>(n)); }
  void finish(const std::filesystem::path& path) {
    out_.flush();
    if (!out_) throw DataError("write failed for " + path.string());
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw DataError("cannot open checkpoint " + path.string());
  }
  template <class T>
  T get() {
    T value{};
    in_.read(reinterpret_cast<char*>(&value), sizeof value);
    if (!in_) throw DataError("truncated checkpoint " + path_.string());
    return value;
  }
  Matrix get_row_major(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = get<double>();
    }
    return m;
  }
  void raw(char* data, std::size_t n) {
    in_.read(data, static_cast<std::streamsize>(n));
    if (!in_) throw DataError("truncated checkpoint " + path_.string());
  }

 private:
  std::ifstream in_;
  std::filesystem::path path_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::uint32_t dz = 0, dl = 0, dmax = 0;
  if (!checkpoint.agents.empty()) {
    const AgentState& a = checkpoint.agents.front();
    dz = static_cast<std::uint32_t>(a.feature_dim());
    dl = static_cast<std::uint32_t>(a.num_classes());
    dmax = static_cast<std::uint32_t>(a.deg_max());
  }
  Writer w(path);
  w.raw(kMagic.data(), kMagic.size());
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint64_t>(checkpoint.round);
  w.put<std::uint64_t>(checkpoint.agents.size());
  w.put(dz);
  w.put(dl);
  w.put(dmax);
  for (const AgentState& a : checkpoint.agents) {
    if (static_cast<std::uint32_t>(a.feature_dim()) != dz ||
        static_cast<std::uint32_t>(a.num_classes()) != dl ||
        static_cast<std::uint32_t>(a.deg_max()) != dmax) {
      throw ShapeError("agents in one checkpoint must share parameter shapes");
    }
    w.put<std::uint32_t>(a.node_id);
    w.put<std::uint8_t>(a.has_label ? 1 : 0);
    w.put<std::int32_t>(a.label);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(a.degree()));
    for (NodeId j : a.neighbors) w.put<std::uint32_t>(j);
    w.put_block(a.attention.data(), static_cast<std::size_t>(a.attention.size()));
    w.put_row_major(a.theta_M);
    w.put_row_major(a.theta_D);
    w.put_block(a.theta_N.data(), static_cast<std::size_t>(a.theta_N.size()));
    w.put_block(a.feature.data(), static_cast<std::size_t>(a.feature.size()));
  }
  w.finish(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  std::array<char, 8> magic{};
  r.raw(magic.data(), magic.size());
  if (magic != kMagic) throw DataError(path.string() + " is not a checkpoint");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint cp;
  cp.round = r.get<std::uint64_t>();
  const auto count = r.get<std::uint64_t>();
  const auto dz = static_cast<Eigen::Index>(r.get<std::uint32_t>());
  const auto dl = static_cast<Eigen::Index>(r.get<std::uint32_t>());
  const auto dmax = static_cast<Eigen::Index>(r.get<std::uint32_t>());
  cp.agents.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    AgentState a;
    a.node_id = r.get<std::uint32_t>();
    a.has_label = r.get<std::uint8_t>() != 0;
    a.label = r.get<std::int32_t>();
    const auto degree = r.get<std::uint32_t>();
    a.neighbors.resize(degree);
    for (auto& j : a.neighbors) j = r.get<std::uint32_t>();
    a.attention.resize(degree + 1);
    for (Eigen::Index s = 0; s <= static_cast<Eigen::Index>(degree); ++s) a.attention[s] = r.get<double>();
    a.theta_M = r.get_row_major(dz, dl);
    a.theta_D = r.get_row_major(dz, dmax);
    a.theta_N.resize(2 * dz);
    for (Eigen::Index s = 0; s < 2 * dz; ++s) a.theta_N[s] = r.get<double>();
    a.feature.resize(dz);
    for (Eigen::Index s = 0; s < dz; ++s) a.feature[s] = r.get<double>();
    cp.agents.push_back(std::move(a));
  }
  return cp;
}

}  // namespace gagn
