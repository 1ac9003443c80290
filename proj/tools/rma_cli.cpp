#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rma/rma.hpp"

namespace {

using namespace rma;

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitStalled = 2;
constexpr int kExitMismatch = 3;
constexpr int kExitUsage = 4;

int exit_code_for(ErrorKind kind) {
  if (kind == ErrorKind::Stalled) return kExitStalled;
  return 10 + static_cast<int>(kind);
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Writes to the named file, or stdout for "" and "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path, std::ios::binary);
      if (!file_) throw Error(ErrorKind::ParseError, "cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

std::string format_double(double v) { return ScalarTraits<double>::format(v); }

// ---------------------------------------------------------------------------
// kernel

struct KernelArgs {
  std::string algo;
  std::vector<std::string> inputs;
  std::size_t random = 0;
  std::uint64_t seed = 1;
  std::string scalar = "f64";
  std::size_t leaf = 16;
  std::string out;
};

const std::vector<std::string> kKernelAlgos = {"mul", "mul-strassen", "inv-tri", "cholesky",
                                               "inv-strassen", "qr-seq", "qr-g"};

template <typename T>
std::vector<Matrix<T>> kernel_inputs(const KernelArgs& a) {
  const bool two = a.algo == "mul" || a.algo == "mul-strassen";
  std::vector<Matrix<T>> in;
  if (!a.inputs.empty()) {
    for (const auto& p : a.inputs) {
      std::ifstream f(p);
      if (!f) throw Error(ErrorKind::ParseError, "cannot read " + p);
      in.push_back(read_matrix_as<T>(f));
    }
    if (in.size() != (two ? 2u : 1u))
      throw UsageError(a.algo + " takes " + (two ? "two" : "one") + " --in matrices");
    return in;
  }
  if (a.random == 0) throw UsageError("give --in FILE or --random N");
  MatrixGenerator gen(a.seed);
  const std::size_t n = a.random;
  if (two) {
    in.push_back(gen.square<T>(n));
    in.push_back(gen.square<T>(n));
  } else if (a.algo == "inv-tri") {
    in.push_back(gen.lower_triangular<T>(n));
  } else if (a.algo == "inv-strassen") {
    in.push_back(gen.diagonally_dominant<T>(n));
  } else if (a.algo == "cholesky") {
    if constexpr (is_float_scalar_v<T>)
      in.push_back(gen.spd(n));
    else
      throw Error(ErrorKind::UnsupportedScalar, "cholesky needs square roots; use f64 scalars");
  } else {
    in.push_back(gen.square<T>(n));
  }
  return in;
}

void write_counters(std::ostream& os, const OpCounter& c) {
  os << "mul_count: " << c.mul_count << '\n';
  os << "addsub_count: " << c.addsub_count << '\n';
  os << "div_count: " << c.div_count << '\n';
  os << "sqrt_count: " << c.sqrt_count << '\n';
  os << "block_mul_calls:";
  for (const auto& [order, count] : c.block_mul_calls) os << ' ' << order << ':' << count;
  os << '\n';
}

template <typename T>
int run_kernel(const KernelArgs& a) {
  KernelConfig cfg;
  cfg.leaf_size = a.leaf;
  cfg.multiply_algo = a.algo == "mul-strassen" ? MultiplyAlgo::Strassen : MultiplyAlgo::Standard;
  cfg.validate();
  auto raw = kernel_inputs<T>(a);
  const bool mul = a.algo == "mul" || a.algo == "mul-strassen";
  std::vector<Matrix<T>> in;
  for (const auto& m : raw) in.push_back(pad_to_pow2(m, mul ? PaddingScheme::ZeroPad : PaddingScheme::IdentityPad));
  if (mul && in[0].rows() != in[1].rows()) {
    const std::size_t order = std::max(in[0].rows(), in[1].rows());
    for (auto& m : in) {
      Matrix<T> big(order, order);
      big.set_block(0, 0, m);
      m = big;
    }
  }

  OpCounter ctr;
  std::vector<Matrix<T>> results;
  std::vector<std::pair<std::string, double>> residuals;
  const auto& A = in[0];
  const std::size_t n = A.rows();
  auto ident = Matrix<T>::identity(n);
  if (mul) {
    auto c = multiply(A, in[1], cfg, ctr);
    residuals.push_back({"residual_vs_naive", frobenius_distance(c, naive_multiply(A, in[1]))});
    results.push_back(std::move(c));
  } else if (a.algo == "inv-tri") {
    auto x = inv_lower_triangular(A, cfg, ctr);
    residuals.push_back({"residual_inverse", frobenius_distance(naive_multiply(A, x), ident)});
    results.push_back(std::move(x));
  } else if (a.algo == "inv-strassen") {
    auto x = inv_strassen(A, cfg, ctr);
    residuals.push_back({"residual_inverse", frobenius_distance(naive_multiply(A, x), ident)});
    results.push_back(std::move(x));
  } else if (a.algo == "cholesky") {
    auto r = cholesky(A, cfg, ctr);
    residuals.push_back({"residual_reconstruction", frobenius_distance(naive_multiply(r.h, mat_transpose(r.h)), A)});
    residuals.push_back({"residual_inverse", frobenius_distance(naive_multiply(r.h, r.h_inv), ident)});
    results.push_back(std::move(r.h));
    results.push_back(std::move(r.h_inv));
  } else {
    auto r = a.algo == "qr-seq" ? qr_sequential(A) : qr_g(A, cfg);
    ctr += r.counter;
    residuals.push_back({"residual_orthogonality", frobenius_distance(naive_multiply(mat_transpose(r.q), r.q), ident)});
    residuals.push_back({"residual_reconstruction", frobenius_distance(naive_multiply(r.q, r.r), A)});
    results.push_back(std::move(r.q));
    results.push_back(std::move(r.r));
  }

  Output out(a.out);
  auto& os = out.stream();
  for (auto& m : results) {
    if (raw[0].rows() != m.rows()) m = m.block(0, 0, raw[0].rows(), raw[0].rows());
    write_matrix(os, m);
  }
  os << "stats:\n";
  os << "algorithm: " << a.algo << '\n';
  os << "order: " << n << '\n';
  os << "scalar: " << ScalarTraits<T>::tag << '\n';
  os << "leaf_size: " << cfg.leaf_size << '\n';
  write_counters(os, ctr);
  for (const auto& [name, v] : residuals) os << name << ": " << format_double(v) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyArgs {
  std::vector<std::size_t> orders = {2, 4, 8, 16, 32};
  std::size_t seeds = 3;
  std::size_t leaf = 2;
  bool perturb = false;  // test hook: corrupts one result entry
};

struct Check {
  std::string name;
  std::size_t order;
  std::uint64_t seed;
  bool ok;
  double value;
};

int run_verify(const VerifyArgs& a) {
  std::vector<Check> checks;
  for (auto n : a.orders)
    if (!is_pow2(n)) throw UsageError("orders must be powers of two");
  for (auto n : a.orders) {
    for (std::uint64_t seed = 1; seed <= a.seeds; ++seed) {
      MatrixGenerator gen(seed * 1000 + n);
      KernelConfig std_cfg{a.leaf, MultiplyAlgo::Standard};
      KernelConfig str_cfg{a.leaf, MultiplyAlgo::Strassen};
      OpCounter ctr;
      auto ar = gen.square<Rational>(n), br = gen.square<Rational>(n);
      auto mr = multiply(ar, br, std_cfg, ctr);
      if (a.perturb) mr(0, 0) += Rational(1);
      checks.push_back({"mul-exact", n, seed, mr == naive_multiply(ar, br), 0.0});
      checks.push_back({"strassen-exact", n, seed, multiply(ar, br, str_cfg, ctr) == naive_multiply(ar, br), 0.0});

      auto af = gen.square<double>(n), bf = gen.square<double>(n);
      auto ref = naive_multiply(af, bf);
      const double scale = std::max(1.0, frobenius_norm(ref));
      double d = frobenius_distance(multiply(af, bf, std_cfg, ctr), ref) / scale;
      checks.push_back({"mul-f64", n, seed, d <= 1e-9, d});
      d = frobenius_distance(multiply(af, bf, str_cfg, ctr), ref) / scale;
      checks.push_back({"strassen-f64", n, seed, d <= 1e-9, d});

      auto l = gen.lower_triangular<Rational>(n);
      auto id = Matrix<Rational>::identity(n);
      checks.push_back({"inv-tri-exact", n, seed, naive_multiply(l, inv_lower_triangular(l, std_cfg, ctr)) == id, 0.0});
      auto dd = gen.diagonally_dominant<Rational>(n);
      checks.push_back({"inv-strassen-exact", n, seed, naive_multiply(dd, inv_strassen(dd, std_cfg, ctr)) == id, 0.0});

      auto s = gen.spd(n);
      auto ch = cholesky(s, std_cfg, ctr);
      d = frobenius_distance(naive_multiply(ch.h, mat_transpose(ch.h)), s) / frobenius_norm(s);
      checks.push_back({"cholesky-reconstruction", n, seed, d <= 1e-9, d});

      auto idf = Matrix<double>::identity(n);
      for (auto* name : {"qr-seq", "qr-g"}) {
        auto r = std::string(name) == "qr-seq" ? qr_sequential(af) : qr_g(af, std_cfg);
        double orth = frobenius_distance(naive_multiply(mat_transpose(r.q), r.q), idf);
        double rec = frobenius_distance(naive_multiply(r.q, r.r), af) / std::max(1.0, frobenius_norm(af));
        bool ok = orth <= 1e-10 && rec <= 1e-9 && is_upper_triangular(r.r);
        checks.push_back({name, n, seed, ok, std::max(orth, rec)});
      }
    }
  }
  bool all = true;
  std::cout << "check,order,seed,status,value\n";
  for (const auto& c : checks) {
    std::cout << c.name << ',' << c.order << ',' << c.seed << ',' << (c.ok ? "pass" : "FAIL") << ','
              << format_double(c.value) << '\n';
    all = all && c.ok;
  }
  for (const auto& c : checks)
    if (!c.ok) std::cerr << "failed: " << c.name << " order " << c.order << " seed " << c.seed << '\n';
  return all ? kExitOk : kExitVerifyFailed;
}

// ---------------------------------------------------------------------------
// complexity

struct ComplexityArgs {
  std::vector<std::size_t> orders = {2, 4, 8, 16, 32};
  double gamma = 2.0;
  double beta = 3.0;
  std::uint64_t seed = 1;
  std::string out;
};

int run_complexity(const ComplexityArgs& a) {
  ComplexityModel model{a.gamma, a.beta};
  model.validate();
  Output out(a.out);
  auto& os = out.stream();
  os << "n,counted_cp,predicted_cp,counted_c,predicted_c,qp_block_muls,block_recurrence_residual\n";
  std::optional<std::pair<std::size_t, std::uint64_t>> prev;
  for (auto n : a.orders) {
    if (n < 2 || !is_pow2(n)) throw UsageError("orders must be powers of two >= 2");
    auto cp = counted_cp(n, a.seed);
    auto c = counted_c(n, a.seed);
    os << n << ',' << cp.scalar_ops << ',' << format_double(predicted_cp(double(n), model)) << ',' << c.scalar_ops
       << ',' << format_double(predicted_c(double(n), model)) << ',' << cp.block_muls << ',';
    // Residual against count(2n) = 4 count(n) + 24, defined when the
    // previous row is the half order.
    if (prev && prev->first * 2 == n)
      os << static_cast<long long>(cp.block_muls) - 4 * static_cast<long long>(prev->second) - 24;
    os << '\n';
    prev = {n, cp.block_muls};
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate / replay

struct SimulateArgs {
  std::string algo = "mul";
  std::size_t order = 32;
  std::uint64_t seed = 1;
  std::string scalar = "f64";
  std::vector<std::string> inputs;
  std::size_t nodes = 4;
  std::string latency = "1";
  std::size_t leaf = 4;
  std::size_t threshold = 2;
  std::vector<std::string> fails;
  std::string cost = "unit";
  std::uint64_t tick_budget = 100'000'000;
  std::size_t fragment_bytes = 1 << 16;
  std::string trace = "trace.jsonl";
  std::string report;
  bool check_single = false;
};

const std::vector<std::string> kSimAlgos = {"mul", "mul-strassen", "inv-tri", "cholesky", "inv-strassen", "qr-g"};

sim::SimConfig sim_config(const SimulateArgs& a) {
  sim::SimConfig c;
  c.num_nodes = a.nodes;
  c.seed = a.seed;
  c.leaf_size = a.leaf;
  c.multiply_algo = a.algo == "mul-strassen" ? MultiplyAlgo::Strassen : MultiplyAlgo::Standard;
  c.overload_threshold = a.threshold;
  c.cost_model = a.cost == "ops" ? sim::CostModel::Ops : sim::CostModel::Unit;
  c.tick_budget = a.tick_budget;
  c.fragment_bytes = a.fragment_bytes;
  c.trace_path = a.trace;
  auto dash = a.latency.find('-');
  try {
    c.latency.lo = std::stoull(a.latency.substr(0, dash));
    c.latency.hi = dash == std::string::npos ? c.latency.lo : std::stoull(a.latency.substr(dash + 1));
    for (const auto& f : a.fails) {
      auto at = f.find('@');
      if (at == std::string::npos) throw UsageError("--fail expects NODE@TICK, got " + f);
      c.failures.push_back({std::stoull(f.substr(0, at)), std::stoull(f.substr(at + 1))});
    }
  } catch (const std::logic_error&) {
    throw UsageError("malformed --latency or --fail value");
  }
  return c;
}

runtime::DropType sim_drop_type(const std::string& algo) {
  if (algo == "mul" || algo == "mul-strassen") return runtime::DropType::Mul;
  if (algo == "inv-tri") return runtime::DropType::InvTri;
  if (algo == "cholesky") return runtime::DropType::Cholesky;
  if (algo == "inv-strassen") return runtime::DropType::InvStrassen;
  return runtime::DropType::QRG;
}

template <typename T>
int run_simulate(const SimulateArgs& a) {
  KernelArgs ka;
  ka.algo = a.algo == "mul" || a.algo == "mul-strassen" ? "mul" : a.algo == "qr-g" ? "qr-g" : a.algo;
  ka.inputs = a.inputs;
  ka.random = a.order;
  ka.seed = a.seed;
  auto inputs = kernel_inputs<T>(ka);
  for (const auto& m : inputs)
    if (!is_pow2(m.rows()) || m.rows() != m.cols()) throw Error(ErrorKind::InvalidShape, "simulation inputs must be square with power-of-two order");
  auto cfg = sim_config(a);
  const auto type = sim_drop_type(a.algo);
  sim::RunReport report;
  try {
    report = sim::run_simulation<T>(type, inputs, cfg);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Stalled) std::cerr << "trace: " << cfg.trace_path << '\n';
    throw;
  }
  {
    Output out(a.report);
    sim::write_report(out.stream(), report);
  }
  if (a.check_single) {
    auto single = cfg;
    single.num_nodes = 1;
    single.failures.clear();
    single.trace_path.clear();
    auto base = sim::run_simulation<T>(type, inputs, single);
    bool same = base.result.size() == report.result.size();
    for (std::size_t i = 0; same && i < base.result.size(); ++i)
      same = bitwise_equal(std::get<Matrix<T>>(base.result[i]), std::get<Matrix<T>>(report.result[i]));
    if (!same) {
      std::cerr << "result differs from the single-node run\n";
      return kExitMismatch;
    }
    std::cerr << "single-node check: identical\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recursive matrix algorithms and a simulated decentralized cluster"};
  app.set_config("--config", "", "flat key=value file mirroring the flags");
  app.require_subcommand(1);

  KernelArgs ka;
  auto* kernel = app.add_subcommand("kernel", "run one sequential kernel");
  kernel->add_option("algorithm", ka.algo)->required()->check(CLI::IsMember(kKernelAlgos));
  kernel->add_option("--in", ka.inputs, "input matrix file (repeat for the second operand)");
  kernel->add_option("--random", ka.random, "generate a seeded N x N input");
  kernel->add_option("--seed", ka.seed);
  kernel->add_option("--scalar", ka.scalar)->check(CLI::IsMember({"f64", "rat"}));
  kernel->add_option("--leaf", ka.leaf);
  kernel->add_option("--out", ka.out, "result file (default stdout)");

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "run the oracle battery");
  verify->add_option("--orders", va.orders)->delimiter(',');
  verify->add_option("--seeds", va.seeds);
  verify->add_option("--leaf", va.leaf);
  verify->add_flag("--perturb", va.perturb, "corrupt one result (checks the checker)");

  ComplexityArgs ca;
  auto* complexity = app.add_subcommand("complexity", "counted vs predicted QR costs as CSV");
  complexity->add_option("--orders", ca.orders)->delimiter(',');
  complexity->add_option("--gamma", ca.gamma);
  complexity->add_option("--beta", ca.beta);
  complexity->add_option("--seed", ca.seed);
  complexity->add_option("--out", ca.out);

  SimulateArgs sa;
  auto* simulate = app.add_subcommand("simulate", "run a task on the simulated cluster");
  simulate->add_option("--algo", sa.algo)->check(CLI::IsMember(kSimAlgos));
  simulate->add_option("--order", sa.order);
  simulate->add_option("--seed", sa.seed, "input and latency seed");
  simulate->add_option("--scalar", sa.scalar)->check(CLI::IsMember({"f64", "rat"}));
  simulate->add_option("--in", sa.inputs);
  simulate->add_option("--nodes", sa.nodes);
  simulate->add_option("--latency", sa.latency, "ticks, constant N or range LO-HI");
  simulate->add_option("--leaf", sa.leaf);
  simulate->add_option("--threshold", sa.threshold, "queued large tasks that make a node overloaded");
  simulate->add_option("--fail", sa.fails, "NODE@TICK, repeatable");
  simulate->add_option("--cost", sa.cost)->check(CLI::IsMember({"unit", "ops"}));
  simulate->add_option("--tick-budget", sa.tick_budget);
  simulate->add_option("--fragment-bytes", sa.fragment_bytes);
  simulate->add_option("--trace", sa.trace);
  simulate->add_option("--report", sa.report, "report file (default stdout)");
  simulate->add_flag("--check-against-single-node", sa.check_single);

  std::string replay_path, replay_report;
  auto* replay = app.add_subcommand("replay", "re-run a trace and check it event by event");
  replay->add_option("trace", replay_path)->required();
  replay->add_option("--report", replay_report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*kernel) return ka.scalar == "rat" ? run_kernel<Rational>(ka) : run_kernel<double>(ka);
    if (*verify) return run_verify(va);
    if (*complexity) return run_complexity(ca);
    if (*simulate) return sa.scalar == "rat" ? run_simulate<Rational>(sa) : run_simulate<double>(sa);
    if (*replay) {
      auto report = sim::replay_trace(replay_path);
      Output out(replay_report);
      sim::write_report(out.stream(), report);
      return kExitOk;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return exit_code_for(e.kind());
  }
  return kExitUsage;
}
