#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include "rma/random.hpp"
#include "rma/sim/simcluster.hpp"

using namespace rma;
using namespace rma::sim;
using runtime::DropType;

namespace {

SimConfig config(std::size_t nodes, std::uint64_t seed, std::size_t leaf = 8) {
  SimConfig c;
  c.num_nodes = nodes;
  c.seed = seed;
  c.leaf_size = leaf;
  c.latency = {1, 5};
  return c;
}

std::vector<Matrix<double>> mul_inputs(std::size_t n, std::uint64_t seed) {
  MatrixGenerator g(seed);
  return {g.square<double>(n), g.square<double>(n)};
}

Matrix<double> single_node_product(const std::vector<Matrix<double>>& in, std::size_t leaf) {
  KernelConfig k;
  k.leaf_size = leaf;
  OpCounter ctr;
  return multiply(in[0], in[1], k, ctr);
}

const Matrix<double>& first(const RunReport& r) { return std::get<Matrix<double>>(r.result.at(0)); }

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("rma_test_" + name)).string();
}

// Parent links (child -> aerodrome entries) among live nodes never form a cycle.
bool parent_links_acyclic(const std::vector<runtime::NodeState<double>>& nodes) {
  std::vector<int> mark(nodes.size(), 0);
  std::function<bool(std::size_t)> visit = [&](std::size_t n) {
    if (mark[n] == 1) return false;
    if (mark[n] == 2) return true;
    mark[n] = 1;
    if (nodes[n].alive())
      for (auto p : nodes[n].aerodrome)
        if (nodes[p].alive() && !visit(p)) return false;
    mark[n] = 2;
    return true;
  };
  for (std::size_t n = 0; n < nodes.size(); ++n)
    if (!visit(n)) return false;
  return true;
}

}  // namespace

TEST(Simulation, SingleNodeLeafTaskSendsNothing) {
  auto in = mul_inputs(4, 1);
  auto r = run_simulation(DropType::Mul, in, config(1, 0, 4));
  EXPECT_EQ(r.message_count, 0u);
  EXPECT_EQ(r.leaf_drop_count, 1u);
  EXPECT_EQ(r.makespan_ticks, 1u);
  EXPECT_TRUE(bitwise_equal(first(r), single_node_product(in, 4)));
}

TEST(Simulation, ResultMatchesSingleNodeBitwise) {
  for (std::size_t p : {1, 2, 3, 4, 8})
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      auto in = mul_inputs(32, seed);
      auto r = run_simulation(DropType::Mul, in, config(p, seed));
      EXPECT_TRUE(bitwise_equal(first(r), single_node_product(in, 8))) << p << "/" << seed;
      EXPECT_EQ(r.busy_ticks.size(), p);
      EXPECT_EQ(std::accumulate(r.busy_ticks.begin(), r.busy_ticks.end(), std::uint64_t{0}), r.leaf_drop_count);
      EXPECT_EQ(r.recomputed_drop_count, 0u);
    }
}

TEST(Simulation, RationalRunsAreExact) {
  MatrixGenerator g(3);
  auto a = g.lower_triangular<Rational>(16);
  auto cfg = config(4, 2, 4);
  auto r = run_simulation(DropType::InvTri, std::vector<Matrix<Rational>>{a}, cfg);
  OpCounter ctr;
  EXPECT_TRUE(bitwise_equal(std::get<Matrix<Rational>>(r.result[0]), inv_lower_triangular(a, cfg.kernel(), ctr)));
}

TEST(Simulation, TwoOutputDrops) {
  MatrixGenerator g(6);
  auto m = g.square<double>(16);
  auto cfg = config(4, 6, 4);
  auto r = run_simulation(DropType::QRG, std::vector<Matrix<double>>{m}, cfg);
  ASSERT_EQ(r.result.size(), 2u);
  auto ref = qr_g(m, cfg.kernel());
  EXPECT_TRUE(bitwise_equal(std::get<Matrix<double>>(r.result[0]), ref.q));
  EXPECT_TRUE(bitwise_equal(std::get<Matrix<double>>(r.result[1]), ref.r));
}

TEST(Simulation, DeterministicAcrossRuns) {
  auto in = mul_inputs(32, 5);
  std::ostringstream t1, t2;
  auto cfg = config(5, 77);
  cfg.failures = {{2, 9}};
  Simulation<double> s1(cfg, DropType::Mul, in, &t1), s2(cfg, DropType::Mul, in, &t2);
  auto r1 = s1.run();
  auto r2 = s2.run();
  EXPECT_EQ(t1.str(), t2.str());
  EXPECT_EQ(report_to_text(r1), report_to_text(r2));
}

TEST(Simulation, SeedChangesTheSchedule) {
  auto in = mul_inputs(32, 5);
  std::ostringstream t1, t2;
  Simulation<double>(config(4, 1), DropType::Mul, in, &t1).run();
  Simulation<double>(config(4, 2), DropType::Mul, in, &t2).run();
  EXPECT_NE(t1.str(), t2.str());
}

TEST(Simulation, SurvivesFailures) {
  for (runtime::NodeId f = 1; f < 4; ++f)
    for (std::uint64_t tick : {1, 5, 12, 30}) {
      auto in = mul_inputs(32, tick);
      auto cfg = config(4, tick + f);
      cfg.failures = {{f, tick}};
      auto r = run_simulation(DropType::Mul, in, cfg);
      EXPECT_TRUE(bitwise_equal(first(r), single_node_product(in, 8))) << f << "@" << tick;
    }
}

TEST(Simulation, TwoFailuresAtOnce) {
  auto in = mul_inputs(32, 4);
  auto cfg = config(6, 4);
  cfg.failures = {{1, 3}, {4, 3}};
  auto r = run_simulation(DropType::Mul, in, cfg);
  EXPECT_TRUE(bitwise_equal(first(r), single_node_product(in, 8)));
}

TEST(Simulation, FailureInjectionRules) {
  auto in = mul_inputs(16, 1);
  Simulation<double> sim(config(3, 1), DropType::Mul, in);
  try {
    sim.inject_failure(0, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::RootFailureUnsupported);
  }
  try {
    sim.inject_failure(3, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidIndex);
  }
  sim.inject_failure(1, 2);
  sim.inject_failure(1, 3);
  auto r = sim.run();
  EXPECT_TRUE(bitwise_equal(first(r), single_node_product(in, 8)));
  EXPECT_EQ(sim.nodes()[1].status, runtime::NodeStatus::Failed);
}

TEST(Simulation, ParentLinksStayAcyclic) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    auto cfg = config(7, seed, 4);
    cfg.failures = {{3, 10 + seed}};
    Simulation<double> sim(cfg, DropType::Mul, mul_inputs(32, seed));
    while (sim.step()) ASSERT_TRUE(parent_links_acyclic(sim.nodes())) << "tick " << sim.now();
  }
}

TEST(Simulation, TinyBudgetStalls) {
  auto cfg = config(2, 0);
  cfg.tick_budget = 3;
  try {
    run_simulation(DropType::Mul, mul_inputs(32, 0), cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Stalled);
  }
}

TEST(Simulation, ConfigValidation) {
  auto bad = config(2, 0);
  bad.latency = {3, 2};
  EXPECT_THROW(run_simulation(DropType::Mul, mul_inputs(16, 0), bad), Error);
  bad = config(2, 0);
  bad.failures = {{0, 1}};
  try {
    run_simulation(DropType::Mul, mul_inputs(16, 0), bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::RootFailureUnsupported);
  }
}

TEST(Simulation, ConfigJsonRoundTrip) {
  auto cfg = config(5, 99, 4);
  cfg.failures = {{2, 7}, {4, 1}};
  cfg.cost_model = CostModel::Ops;
  cfg.multiply_algo = MultiplyAlgo::Strassen;
  EXPECT_EQ(config_to_json(config_from_json(config_to_json(cfg))).dump(), config_to_json(cfg).dump());
}

TEST(Trace, ReplayReproducesTheRun) {
  auto cfg = config(4, 13, 4);
  cfg.failures = {{2, 20}};
  cfg.trace_path = temp_path("replay.jsonl");
  auto r = run_simulation(DropType::Mul, mul_inputs(16, 13), cfg);
  auto again = replay_trace(cfg.trace_path);
  EXPECT_TRUE(bitwise_equal(first(again), first(r)));
  EXPECT_EQ(again.makespan_ticks, r.makespan_ticks);
  EXPECT_EQ(again.message_count, r.message_count);
  std::filesystem::remove(cfg.trace_path);
}

TEST(Trace, DamagedTracesAreRejected) {
  auto cfg = config(3, 1, 4);
  cfg.trace_path = temp_path("damaged.jsonl");
  run_simulation(DropType::Mul, mul_inputs(16, 2), cfg);
  std::vector<std::string> lines;
  {
    std::ifstream in(cfg.trace_path);
    for (std::string l; std::getline(in, l);) lines.push_back(l);
  }
  auto write = [&](const std::vector<std::string>& ls) {
    std::ofstream out(cfg.trace_path, std::ios::trunc);
    for (const auto& l : ls) out << l << '\n';
  };
  auto expect_decode_error = [&] {
    try {
      replay_trace(cfg.trace_path);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::TraceDecodeError);
    }
  };
  write({lines.begin(), lines.begin() + lines.size() / 2});
  expect_decode_error();
  auto edited = lines;
  edited[2].replace(edited[2].find("\"tick\":"), 7, "\"tick\":9");
  write(edited);
  expect_decode_error();
  write({"not json", lines.back()});
  expect_decode_error();
  std::filesystem::remove(cfg.trace_path);
  expect_decode_error();
}

TEST(Report, TextContainsTheMetrics) {
  auto r = run_simulation(DropType::Mul, mul_inputs(16, 1), config(2, 1));
  auto text = report_to_text(r);
  for (const char* key : {"makespan_ticks", "message_count", "bytes_transferred", "recomputed_drop_count"})
    EXPECT_NE(text.find(key), std::string::npos) << key;
}
