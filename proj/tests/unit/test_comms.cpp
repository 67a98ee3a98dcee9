#include "fixtures.hpp"

#include "gagn/comms.hpp"
#include "gagn/errors.hpp"

#include <numeric>

using namespace gagn;

namespace {

RoundEngine small_engine(std::uint64_t seed, double labeled = 0.8) {
  AttributedGraph g = split_labels(fx::small_synthetic(), labeled, seed);
  EngineConfig cfg;
  cfg.seed = seed;
  cfg.comms.middleware_steps = 5;
  cfg.comms.fuse_D_every = 2;
  AgentInit init;
  init.attention_init = 0.5;
  auto agents = make_agents(g, init, seed);
  return RoundEngine(std::move(g), std::move(agents), cfg);
}

void check_same_agents(const std::vector<AgentState>& a, const std::vector<AgentState>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].attention == b[i].attention);
    CHECK(a[i].theta_M == b[i].theta_M);
    CHECK(a[i].theta_D == b[i].theta_D);
    CHECK(a[i].theta_N == b[i].theta_N);
  }
}

}  // namespace

TEST_CASE("sample_out keeps the farthest rho neighbors") {
  AgentState a;
  a.feature = Vector::Zero(1);
  a.neighbors = {10, 20, 30, 40};
  Matrix nf(4, 1);
  nf << 1.0, -3.0, 2.0, 3.0;
  CHECK(sample_out_indices(a, nf, 2) == std::vector<int>{1, 3});
  CHECK(sample_out_indices(a, nf, 4) == std::vector<int>{0, 1, 2, 3});
  CHECK(sample_out_indices(a, nf, 9).size() == 4);
  CHECK_THROWS_AS(sample_out_indices(a, nf, 0), PreconditionError);

  NeighborView v;
  v.ids = a.neighbors;
  v.features = nf;
  const auto s = sample_out(a, v, 1);
  REQUIRE(s.size() == 1);
  CHECK(s[0].first == 20);
  CHECK(s[0].second[0] == -3.0);
}

TEST_CASE("fuse_M moves toward the attention-weighted neighbor mean") {
  Matrix theta = Matrix::Zero(2, 2);
  const Matrix one = Matrix::Ones(2, 2), three = Matrix::Constant(2, 2, 3.0);
  const std::vector<const Matrix*> recv{&one, &three};
  Vector omega(2);
  omega << 1.0, 1.0;
  fuse_M(theta, recv, omega, 1.0);
  CHECK(theta.isApprox(Matrix::Constant(2, 2, 2.0)));

  theta.setZero();
  omega << 1.0, 0.0;
  fuse_M(theta, recv, omega, 1.0);
  CHECK(theta.isApprox(Matrix::Constant(2, 2, 0.5)));

  theta.setZero();
  omega << 2.0, 2.0;
  fuse_M(theta, recv, omega, 0.25);
  CHECK(theta.isApprox(Matrix::Constant(2, 2, 1.0)));

  theta = one;
  fuse_M(theta, {}, Vector(), 1.0);
  CHECK(theta == one);
  CHECK_THROWS_AS(fuse_M(theta, recv, Vector::Ones(3), 1.0), ShapeError);
}

TEST_CASE("fuse_D leaves agreement fixed and skips empty inputs") {
  std::mt19937_64 rng(3);
  const Matrix own = fx::random_matrix(rng, 4, 5);
  const Vector z = fx::random_vector(rng, 4);
  const Matrix two_hop = fx::random_matrix(rng, 3, 4);
  CommsConfig cfg;
  cfg.middleware_steps = 20;
  const std::vector<const Matrix*> same{&own, &own};
  Vector omega = Vector::Ones(2);

  Matrix theta = own;
  std::mt19937_64 r1(1);
  CHECK(fuse_D(theta, same, omega, z, two_hop, 0.5, cfg, r1));
  CHECK(fx::relative_error(theta, own) < 1e-12);

  const Matrix other = fx::random_matrix(rng, 4, 5);
  const std::vector<const Matrix*> diff{&other};
  theta = own;
  std::mt19937_64 r2(1);
  CHECK(fuse_D(theta, diff, Vector::Ones(1), z, two_hop, 0.0, cfg, r2));
  CHECK(theta == own);

  std::mt19937_64 r3(1);
  CHECK(fuse_D(theta, diff, Vector::Ones(1), z, two_hop, 1.0, cfg, r3));
  CHECK(theta != own);

  theta = own;
  std::mt19937_64 r4(1);
  CHECK_FALSE(fuse_D(theta, {}, Vector(), z, two_hop, 1.0, cfg, r4));
  CHECK_FALSE(fuse_D(theta, diff, Vector::Zero(1), z, two_hop, 1.0, cfg, r4));
  cfg.Q = 0;
  CHECK_FALSE(fuse_D(theta, diff, Vector::Ones(1), z, Matrix(0, 4), 1.0, cfg, r4));
  CHECK(theta == own);
}

TEST_CASE("middleware training lowers its loss and its gradient is exact") {
  std::mt19937_64 rng(4);
  const Matrix inputs = fx::random_matrix(rng, 8, 3);
  const Matrix target_theta = fx::random_matrix(rng, 3, 4);
  const std::vector<const Matrix*> recv{&target_theta};
  const Matrix targets = middleware_targets(inputs, recv, Vector::Ones(1));
  const Matrix start = fx::random_matrix(rng, 3, 4);
  const Matrix g = middleware_grad(start, inputs, targets);
  const Matrix num = fx::numeric_gradient<Matrix>(
      start, [&](const Matrix& th) { return middleware_loss(th, inputs, targets); });
  CHECK(fx::relative_error(g, num) < 1e-6);

  CommsConfig cfg;
  cfg.middleware_steps = 50;
  cfg.middleware_lr = 1.0;
  const Matrix trained = train_middleware(start, inputs, targets, cfg);
  CHECK(middleware_loss(trained, inputs, targets) < middleware_loss(start, inputs, targets));
  CHECK(targets.rowwise().sum().isOnes(1e-12));
}

TEST_CASE("middleware inputs are Q jittered copies then the relayed rows") {
  CommsConfig cfg;
  cfg.Q = 3;
  cfg.xi = 1e-3;
  std::mt19937_64 rng(5);
  Vector z(2);
  z << 1.0, -1.0;
  Matrix hop(2, 2);
  hop << 5.0, 6.0, 7.0, 8.0;
  const Matrix in = middleware_inputs(z, hop, cfg, rng);
  REQUIRE(in.rows() == 5);
  for (int q = 0; q < 3; ++q) CHECK((in.row(q).transpose() - z).cwiseAbs().maxCoeff() < 0.01);
  CHECK(in.bottomRows(2) == hop);
}

TEST_CASE("fuse_N gradient matches finite differences") {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 30; ++t) {
    const Vector theta = fx::random_vector(rng, 6);
    const Vector a = fx::random_vector(rng, 6), b = fx::random_vector(rng, 6);
    const std::vector<const Vector*> recv{&a, &b};
    Vector omega(2);
    omega << 0.7, 1.3;
    const Matrix samples = fx::random_matrix(rng, 5, 6);
    const Vector g = fuse_N_grad(theta, recv, omega, samples);
    const Matrix num = fx::numeric_gradient<Matrix>(Matrix(theta), [&](const Matrix& th) {
      return fuse_N_objective(th.col(0), recv, omega, samples);
    });
    CHECK(fx::relative_error(g, Vector(num.col(0))) < 1e-5);
  }
}

TEST_CASE("fuse_N is at rest when every neighbor agrees") {
  std::mt19937_64 rng(7);
  const Vector theta = fx::random_vector(rng, 4);
  const std::vector<const Vector*> recv{&theta, &theta};
  const Matrix samples = fx::random_matrix(rng, 6, 4);
  Vector moved = theta;
  fuse_N(moved, recv, Vector::Ones(2), samples, 1.0);
  CHECK(moved == theta);
  CHECK(fuse_N_objective(theta, recv, Vector::Ones(2), samples) == 0.0);

  const Vector other = fx::random_vector(rng, 4);
  const std::vector<const Vector*> away{&other};
  const double before = fuse_N_objective(theta, away, Vector::Ones(1), samples);
  moved = theta;
  fuse_N(moved, away, Vector::Ones(1), samples, 0.1);
  CHECK(fuse_N_objective(moved, away, Vector::Ones(1), samples) < before);
}

TEST_CASE("two-node network round") {
  const AttributedGraph g = fx::make_graph(2, {{0, 1}}, 3, 2);
  EngineConfig cfg;
  auto agents = make_agents(g, {}, 1);
  RoundEngine engine(g, agents, cfg);
  const auto outbox = engine.build_outbox();
  REQUIRE(outbox.size() == 2);
  CHECK(outbox[0].sender_degree == 1);
  CHECK(outbox[0].sampled_2hop.size() == 1);
  const NeighborView v = engine.build_view(0, outbox);
  CHECK(v.ids == std::vector<NodeId>{1});
  CHECK(v.two_hop.rows() == 0);  // the only relay is the agent itself
  const LossReport r = engine.run_round();
  CHECK(r.agents == 2);
  CHECK(r.labeled_agents == 2);
  CHECK(engine.round() == 1);
  CHECK(engine.messages_sent() == 2);
  CHECK(engine.deliveries() == 2);
  CHECK(engine.agents()[0].theta_M != agents[0].theta_M);
}

TEST_CASE("2-hop relays exclude self and direct neighbors") {
  RoundEngine engine = small_engine(1);
  const auto outbox = engine.build_outbox();
  for (NodeId id = 0; id < engine.graph().num_nodes(); ++id) {
    const NeighborView v = engine.build_view(id, outbox);
    for (NodeId h : v.two_hop_ids) {
      CHECK(h != id);
      CHECK_FALSE(engine.graph().has_edge(id, h));
    }
    CHECK(v.two_hop.rows() == static_cast<Eigen::Index>(v.two_hop_ids.size()));
  }
}

TEST_CASE("rounds are deterministic and independent of update order") {
  RoundEngine a = small_engine(2), b = small_engine(2), c = small_engine(2);
  std::vector<NodeId> reversed(a.agents().size());
  std::iota(reversed.rbegin(), reversed.rend(), 0);
  for (int r = 0; r < 4; ++r) {
    const LossReport ra = a.run_round();
    b.run_round();
    const LossReport rc = c.run_round(reversed);
    CHECK(ra.j_A == rc.j_A);
    CHECK(ra.j_D == rc.j_D);
  }
  check_same_agents(a.agents(), b.agents());
  check_same_agents(a.agents(), c.agents());
  CHECK_THROWS_AS(a.run_round(std::vector<NodeId>{0, 1}), PreconditionError);
}

TEST_CASE("message budget is one broadcast per agent") {
  RoundEngine e = small_engine(3);
  e.run_round();
  CHECK(e.messages_sent() == e.graph().num_nodes());
  CHECK(e.deliveries() == 2 * e.graph().num_edges());
}

TEST_CASE("engine rejects mismatched agents") {
  const AttributedGraph g = fx::path_graph(4);
  auto agents = make_agents(g, {}, 1);
  agents[1].neighbors = {0};
  CHECK_THROWS_AS(RoundEngine(g, agents, {}), PreconditionError);
  CHECK_THROWS_AS(RoundEngine(g, {}, {}), PreconditionError);
}

TEST_CASE("set_graph reindexes agents") {
  RoundEngine e = small_engine(4);
  const Edge gone = e.graph().edges().front();
  std::vector<Edge> rest(e.graph().edges().begin() + 1, e.graph().edges().end());
  e.set_graph(e.graph().with_edges(rest));
  CHECK(e.agents()[gone.u].slot_of(gone.v) == -1);
  CHECK(e.agents()[gone.u].attention.size() == e.graph().degree(gone.u) + 1);
  CHECK_NOTHROW(e.run_round());
}

TEST_CASE("convergence monitor and driver") {
  ConvergenceMonitor m(2, 1e-3);
  LossReport r;
  r.j_A = 1.0;
  CHECK_FALSE(m.push(r));
  CHECK_FALSE(m.push(r));
  CHECK(m.push(r));
  r.j_D = 0.5;
  CHECK_FALSE(m.push(r));

  RoundEngine e = small_engine(5);
  RoundSchedule none;
  none.total_rounds = 0;
  const ConvergenceResult z = run_until_converged(e, none);
  CHECK(z.rounds == 0);
  CHECK(z.history.empty());
  CHECK(e.round() == 0);

  RoundSchedule few;
  few.total_rounds = 3;
  int calls = 0;
  const ConvergenceResult res = run_until_converged(e, few, [&](const RoundEngine&, const LossReport&) { ++calls; });
  CHECK(res.rounds == 3);
  CHECK(calls == 3);
  CHECK(res.history.size() == 3);
}

TEST_CASE("round seeds differ per agent and round") {
  CHECK(agent_round_seed(1, 0, 0) != agent_round_seed(1, 0, 1));
  CHECK(agent_round_seed(1, 0, 0) != agent_round_seed(1, 1, 0));
  CHECK(agent_round_seed(1, 3, 4) == agent_round_seed(1, 3, 4));
}

TEST_CASE("loss log and attention dump formats") {
  RoundEngine e = small_engine(6);
  std::vector<LossReport> hist{e.run_round(), e.run_round()};
  const auto dir = fx::temp_dir("comms-logs");
  write_loss_log(dir / "losses.csv", hist);
  const std::string log = fx::read_file(dir / "losses.csv");
  CHECK(log.rfind("round,j_A,j_D,j_N\n0,", 0) == 0);
  CHECK(std::count(log.begin(), log.end(), '\n') == 3);
  const auto pairs = attention_pairs(e.graph(), e.agents());
  CHECK(pairs.size() == e.graph().num_edges());
  write_attention_dump(dir / "attention.csv", e.round(), pairs);
  const std::string dump = fx::read_file(dir / "attention.csv");
  CHECK(dump.rfind("round,i,j,w_ij,w_ji\n2,", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(dump.begin(), dump.end(), '\n')) == pairs.size() + 1);
}

TEST_CASE("comms config validation") {
  CommsConfig c;
  CHECK_NOTHROW(c.validate());
  c.fuse_D_direction = 0.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.rho = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  RoundSchedule s;
  s.convergence_window = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}
