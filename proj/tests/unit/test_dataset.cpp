#include "fixtures.hpp"

#include "gagn/errors.hpp"

using namespace gagn;

namespace {

std::filesystem::path path_dataset(const std::string& name) {
  auto dir = fx::temp_dir(name);
  fx::write_file(dir / "edges.txt", "# path\n0 1\n1 2\n2 3\n");
  fx::write_file(dir / "features.csv", "id,f0,f1\n0,1,0\n1,0,1\n2,1,1\n3,0.5,2\n");
  fx::write_file(dir / "labels.csv", "id,label\n0,0\n1,1\n2,1\n3,0\n");
  return dir;
}

}  // namespace

TEST_CASE("edge list + csv loads a path graph") {
  const auto dir = path_dataset("path");
  const AttributedGraph g = load_dataset(dir, DatasetFormat::EdgeListCsv);
  CHECK(g.num_nodes() == 4);
  CHECK(g.num_edges() == 3);
  CHECK(g.deg_max() == 2);
  CHECK(g.degree(0) == 1);
  CHECK(g.degree(3) == 1);
  CHECK(g.feature_dim() == 2);
  CHECK(g.features()(3, 1) == 2.0);
  CHECK(g.num_classes() == 2);
  CHECK(g.labels() == std::vector<int>{0, 1, 1, 0});
  CHECK(g.original_ids() == std::vector<std::string>{"0", "1", "2", "3"});
}

TEST_CASE("one-hot label columns are detected") {
  auto dir = path_dataset("onehot");
  fx::write_file(dir / "labels.csv", "0,1,0,0\n1,0,0,1\n2,0,1,0\n3,1,0,0\n");
  const AttributedGraph g = load_dataset(dir, DatasetFormat::EdgeListCsv);
  CHECK(g.num_classes() == 3);
  CHECK(g.labels() == std::vector<int>{0, 2, 1, 0});
}

TEST_CASE("non-dense ids are remapped and kept in a side table") {
  auto dir = fx::temp_dir("sparse-ids");
  fx::write_file(dir / "edges.txt", "p10 p30\np30 p20\n");
  fx::write_file(dir / "features.csv", "p10,1\np20,2\np30,3\n");
  fx::write_file(dir / "labels.csv", "p10,a\np20,b\np30,a\n");
  const AttributedGraph g = load_dataset(dir, DatasetFormat::EdgeListCsv);
  CHECK(g.original_ids() == std::vector<std::string>{"p10", "p20", "p30"});
  CHECK(g.has_edge(0, 2));
  CHECK(g.has_edge(1, 2));
  CHECK(g.num_classes() == 2);
}

TEST_CASE("malformed edge line reports its line number") {
  auto dir = path_dataset("bad-edge");
  fx::write_file(dir / "edges.txt", "0 1\n1\n");
  try {
    load_dataset(dir, DatasetFormat::EdgeListCsv);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("inconsistent feature dimension is a schema error") {
  auto dir = path_dataset("bad-dim");
  fx::write_file(dir / "features.csv", "0,1,0\n1,0\n2,1,1\n3,0,2\n");
  CHECK_THROWS_AS(load_dataset(dir, DatasetFormat::EdgeListCsv), SchemaError);
}

TEST_CASE("every node needs a label") {
  auto dir = path_dataset("missing-label");
  fx::write_file(dir / "labels.csv", "0,0\n1,1\n2,1\n");
  CHECK_THROWS_AS(load_dataset(dir, DatasetFormat::EdgeListCsv), SchemaError);
}

TEST_CASE("single node with empty edge file") {
  auto dir = fx::temp_dir("single");
  fx::write_file(dir / "edges.txt", "");
  fx::write_file(dir / "features.csv", "0,1,2\n");
  fx::write_file(dir / "labels.csv", "0,0\n");
  const AttributedGraph g = load_dataset(dir, DatasetFormat::EdgeListCsv);
  CHECK(g.num_nodes() == 1);
  CHECK(g.deg_max() == 0);
  CHECK_FALSE(g.warnings().empty());
}

TEST_CASE("attribute-free datasets get degree-bucket or identity features") {
  auto dir = fx::temp_dir("no-features");
  fx::write_file(dir / "edges.txt", "0 1\n0 2\n0 3\n");
  fx::write_file(dir / "labels.csv", "0,0\n1,1\n2,1\n3,0\n");
  LoadOptions opts;
  opts.degree_buckets = 4;
  const AttributedGraph g = load_dataset(dir, DatasetFormat::EdgeListCsv, opts);
  CHECK(g.feature_dim() == 4);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(g.features().row(i).sum() == 1.0);
  CHECK(g.features().row(1) == g.features().row(2));
  CHECK(g.features().row(0) != g.features().row(1));

  opts.missing_features = AttributeFreeFeatures::Identity;
  const AttributedGraph h = load_dataset(dir, DatasetFormat::EdgeListCsv, opts);
  CHECK(h.features() == Matrix::Identity(4, 4));
}

TEST_CASE("default degree buckets") {
  const AttributedGraph g = fx::complete_graph(5);
  const Matrix f = degree_bucket_features(g, 16);
  CHECK(f.cols() == 16);
  CHECK(f.rowwise().sum().isOnes());
}

TEST_CASE("linqs content and cites files") {
  auto dir = fx::temp_dir("linqs");
  fx::write_file(dir / "toy.content", "31 1 0 1 Neural\n7 0 1 1 Theory\n99 1 1 0 Neural\n");
  fx::write_file(dir / "toy.cites", "31 7\n7 99\n99 12345\n");
  const AttributedGraph g = load_dataset(dir, DatasetFormat::Linqs);
  CHECK(g.num_nodes() == 3);
  CHECK(g.num_edges() == 2);  // the citation to an unknown paper is dropped
  CHECK(g.feature_dim() == 3);
  CHECK(g.num_classes() == 2);
}

TEST_CASE("format names") {
  CHECK(parse_dataset_format("edge-list+csv") == DatasetFormat::EdgeListCsv);
  CHECK(parse_dataset_format("linqs") == DatasetFormat::Linqs);
  CHECK(parse_dataset_format("planetoid-binary") == DatasetFormat::PlanetoidBinary);
  CHECK_THROWS_AS(parse_dataset_format("graphml"), ConfigError);
}

TEST_CASE("planetoid binary is reported as unsupported") {
  auto dir = fx::temp_dir("planetoid");
  CHECK_THROWS_AS(load_dataset(dir, DatasetFormat::PlanetoidBinary), DataError);
}

TEST_CASE("missing dataset path") {
  CHECK_THROWS_AS(load_dataset("/nonexistent/gagn", DatasetFormat::EdgeListCsv), DataError);
}
