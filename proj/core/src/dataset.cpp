#include "gagn/errors.hpp"
#include "gagn/graph.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <unordered_map>

namespace gagn {
namespace {

namespace fs = std::filesystem;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_fields(const std::string& line, bool comma) {
  std::vector<std::string> out;
  if (comma) {
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
  } else {
    std::istringstream ss(line);
    std::string field;
    while (ss >> field) out.push_back(field);
  }
  return out;
}

std::optional<double> to_number(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return v;
}

// Reads non-empty, non-comment lines with their 1-based line numbers.
std::vector<std::pair<std::size_t, std::string>> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (!line.empty()) lines.emplace_back(number, line);
  }
  return lines;
}

class IdTable {
 public:
  NodeId intern(const std::string& id) {
    auto [it, inserted] = index_.try_emplace(id, static_cast<NodeId>(ids_.size()));
    if (inserted) ids_.push_back(id);
    return it->second;
  }
  std::optional<NodeId> find(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t size() const { return ids_.size(); }
  std::vector<std::string> release() { return std::move(ids_); }

 private:
  std::unordered_map<std::string, NodeId> index_;
  std::vector<std::string> ids_;
};

bool is_header(const std::string& first_field, bool unknown_id) {
  std::string lower = first_field;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  return unknown_id || lower == "id" || lower == "node" || lower == "node_id";
}

struct LabelColumn {
  std::vector<int> labels;
  int num_classes = 0;
};

// Class names are mapped to indices in sorted order so the mapping does not
// depend on row order.
LabelColumn encode_class_names(const std::vector<std::string>& names) {
  std::map<std::string, int> classes;
  for (const auto& n : names) classes.emplace(n, 0);
  int next = 0;
  bool all_integers = true;
  for (auto& [name, idx] : classes) {
    idx = next++;
    auto v = to_number(name);
    if (!v || *v != std::floor(*v) || *v < 0) all_integers = false;
  }
  LabelColumn out;
  if (all_integers) {
    int max_label = 0;
    for (const auto& n : names) {
      const int c = static_cast<int>(*to_number(n));
      out.labels.push_back(c);
      max_label = std::max(max_label, c);
    }
    out.num_classes = max_label + 1;
  } else {
    for (const auto& n : names) out.labels.push_back(classes.at(n));
    out.num_classes = static_cast<int>(classes.size());
  }
  return out;
}

std::vector<Edge> read_edge_list(const fs::path& path, IdTable& ids, bool skip_unknown,
                                 bool reject_self_loops) {
  std::vector<Edge> edges;
  for (const auto& [number, line] : read_lines(path)) {
    auto fields = split_fields(line, line.find(',') != std::string::npos);
    if (fields.size() < 2) throw ParseError(path.string(), number, "expected 'u v'");
    auto a = ids.find(fields[0]);
    auto b = ids.find(fields[1]);
    if (!a || !b) {
      if (skip_unknown) continue;
      throw ParseError(path.string(), number, "edge references unknown node");
    }
    if (*a == *b) {
      if (reject_self_loops) throw ParseError(path.string(), number, "self-loop");
      continue;
    }
    edges.emplace_back(*a, *b);
  }
  return edges;
}

AttributedGraph finish(std::size_t n, std::vector<Edge> edges, std::optional<Matrix> features,
                       LabelColumn labels, std::vector<std::string> ids,
                       const LoadOptions& options) {
  if (features) {
    return AttributedGraph(n, std::move(edges), std::move(*features), std::move(labels.labels),
                           labels.num_classes, {}, std::move(ids));
  }
  // Attribute-free dataset: build the topology first, then derive features.
  AttributedGraph bare(n, std::move(edges), Matrix::Zero(static_cast<Eigen::Index>(n), 1),
                       std::move(labels.labels), labels.num_classes, {}, std::move(ids));
  if (options.missing_features == AttributeFreeFeatures::Identity) {
    return bare.with_features(Matrix::Identity(static_cast<Eigen::Index>(n),
                                               static_cast<Eigen::Index>(n)));
  }
  return bare.with_features(degree_bucket_features(bare, options.degree_buckets));
}

AttributedGraph load_edge_list_csv(const fs::path& dir, const LoadOptions& options) {
  const fs::path edges_path = dir / "edges.txt";
  const fs::path features_path = dir / "features.csv";
  const fs::path labels_path = dir / "labels.csv";
  if (!fs::exists(edges_path)) throw DataError("missing " + edges_path.string());
  if (!fs::exists(labels_path)) throw DataError("missing " + labels_path.string());

  IdTable ids;
  std::optional<Matrix> features;
  if (fs::exists(features_path)) {
    auto lines = read_lines(features_path);
    std::vector<std::vector<double>> rows;
    int dim = -1;
    for (std::size_t k = 0; k < lines.size(); ++k) {
      const auto& [number, line] = lines[k];
      auto fields = split_fields(line, true);
      if (fields.size() < 2) throw ParseError(features_path.string(), number, "no feature values");
      std::vector<double> values;
      bool numeric = true;
      for (std::size_t f = 1; f < fields.size(); ++f) {
        auto v = to_number(fields[f]);
        if (!v) {
          numeric = false;
          break;
        }
        values.push_back(*v);
      }
      if (!numeric) {
        if (k == 0) continue;  // header
        throw ParseError(features_path.string(), number, "non-numeric feature value");
      }
      if (dim < 0) dim = static_cast<int>(values.size());
      if (static_cast<int>(values.size()) != dim) {
        throw SchemaError(features_path.string() + ":" + std::to_string(number) +
                          ": feature dimension " + std::to_string(values.size()) +
                          " != " + std::to_string(dim));
      }
      if (ids.find(fields[0])) {
        throw ParseError(features_path.string(), number, "duplicate node id " + fields[0]);
      }
      ids.intern(fields[0]);
      rows.push_back(std::move(values));
    }
    Matrix m(static_cast<Eigen::Index>(rows.size()), std::max(dim, 0));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (int c = 0; c < dim; ++c) m(static_cast<Eigen::Index>(r), c) = rows[r][c];
    }
    features = std::move(m);
  }

  // Labels: "id,class" or "id,onehot_0,...,onehot_k".
  auto label_lines = read_lines(labels_path);
  std::vector<std::string> names;
  std::vector<NodeId> owner;
  std::vector<std::vector<double>> one_hot;
  int width = -1;
  for (std::size_t k = 0; k < label_lines.size(); ++k) {
    const auto& [number, line] = label_lines[k];
    auto fields = split_fields(line, true);
    if (fields.size() < 2) throw ParseError(labels_path.string(), number, "expected 'id,label'");
    if (k == 0 && is_header(fields[0], features.has_value() && !ids.find(fields[0]))) continue;
    if (width < 0) width = static_cast<int>(fields.size()) - 1;
    if (static_cast<int>(fields.size()) - 1 != width) {
      throw SchemaError(labels_path.string() + ":" + std::to_string(number) +
                        ": inconsistent label columns");
    }
    NodeId id;
    if (features) {
      auto found = ids.find(fields[0]);
      if (!found) throw ParseError(labels_path.string(), number, "label for unknown node " + fields[0]);
      id = *found;
    } else {
      if (ids.find(fields[0])) throw ParseError(labels_path.string(), number, "duplicate node id");
      id = ids.intern(fields[0]);
    }
    owner.push_back(id);
    if (width == 1) {
      names.push_back(fields[1]);
    } else {
      std::vector<double> row;
      for (std::size_t f = 1; f < fields.size(); ++f) {
        auto v = to_number(fields[f]);
        if (!v) throw ParseError(labels_path.string(), number, "non-numeric one-hot entry");
        row.push_back(*v);
      }
      const auto ones = std::count(row.begin(), row.end(), 1.0);
      const auto zeros = std::count(row.begin(), row.end(), 0.0);
      if (ones != 1 || ones + zeros != static_cast<long>(row.size())) {
        throw ParseError(labels_path.string(), number, "label row is not one-hot");
      }
      one_hot.push_back(std::move(row));
    }
  }

  const std::size_t n = ids.size();
  if (owner.size() != n) {
    throw SchemaError("labels.csv covers " + std::to_string(owner.size()) + " of " +
                      std::to_string(n) + " nodes; every node needs a label");
  }
  LabelColumn labels;
  labels.labels.assign(n, 0);
  if (width == 1) {
    auto encoded = encode_class_names(names);
    labels.num_classes = encoded.num_classes;
    for (std::size_t k = 0; k < owner.size(); ++k) labels.labels[owner[k]] = encoded.labels[k];
  } else {
    labels.num_classes = width;
    for (std::size_t k = 0; k < owner.size(); ++k) {
      labels.labels[owner[k]] = static_cast<int>(
          std::find(one_hot[k].begin(), one_hot[k].end(), 1.0) - one_hot[k].begin());
    }
  }

  auto edges = read_edge_list(edges_path, ids, false, true);
  return finish(n, std::move(edges), std::move(features), std::move(labels), ids.release(), options);
}

AttributedGraph load_linqs(const fs::path& dir, const LoadOptions& options) {
  fs::path content, cites;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".content") content = entry.path();
    if (entry.path().extension() == ".cites") cites = entry.path();
  }
  if (content.empty() || cites.empty()) {
    throw DataError("expected <name>.content and <name>.cites in " + dir.string());
  }
  IdTable ids;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> names;
  int dim = -1;
  for (const auto& [number, line] : read_lines(content)) {
    auto fields = split_fields(line, false);
    if (fields.size() < 3) throw ParseError(content.string(), number, "expected id, features, class");
    std::vector<double> values;
    for (std::size_t f = 1; f + 1 < fields.size(); ++f) {
      auto v = to_number(fields[f]);
      if (!v) throw ParseError(content.string(), number, "non-numeric feature value");
      values.push_back(*v);
    }
    if (dim < 0) dim = static_cast<int>(values.size());
    if (static_cast<int>(values.size()) != dim) {
      throw SchemaError(content.string() + ":" + std::to_string(number) + ": feature dimension mismatch");
    }
    if (ids.find(fields[0])) throw ParseError(content.string(), number, "duplicate node id");
    ids.intern(fields[0]);
    rows.push_back(std::move(values));
    names.push_back(fields.back());
  }
  Matrix m(static_cast<Eigen::Index>(rows.size()), std::max(dim, 0));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int c = 0; c < dim; ++c) m(static_cast<Eigen::Index>(r), c) = rows[r][c];
  }
  // Citation dumps reference papers missing from the content file and contain
  // self-citations; both are dropped.
  auto edges = read_edge_list(cites, ids, true, false);
  const std::size_t n = ids.size();
  return finish(n, std::move(edges), std::move(m), encode_class_names(names), ids.release(), options);
}

}  // namespace

DatasetFormat parse_dataset_format(const std::string& name) {
  if (name == "edge-list+csv" || name == "edgelist" || name == "csv") return DatasetFormat::EdgeListCsv;
  if (name == "linqs" || name == "content+cites") return DatasetFormat::Linqs;
  if (name == "planetoid-binary" || name == "planetoid") return DatasetFormat::PlanetoidBinary;
  throw ConfigError("unknown dataset format '" + name + "'");
}

AttributedGraph load_dataset(const std::filesystem::path& path, DatasetFormat format,
                             const LoadOptions& options) {
  if (!fs::exists(path)) throw DataError("dataset path does not exist: " + path.string());
  switch (format) {
    case DatasetFormat::EdgeListCsv:
      return load_edge_list_csv(path, options);
    case DatasetFormat::Linqs:
      return load_linqs(path, options);
    case DatasetFormat::PlanetoidBinary:
      break;
  }
  throw DataError(
      "planetoid-binary (pickled ind.* files) is not supported; convert to edges.txt + "
      "features.csv + labels.csv");
}

}  // namespace gagn
