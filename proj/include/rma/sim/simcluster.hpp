#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rma/runtime/node.hpp"

namespace rma::sim {

using runtime::DropType;
using runtime::Message;
using runtime::NodeId;
using runtime::NodeState;
using nlohmann::json;

struct LatencyModel {
  std::uint64_t lo = 1;
  std::uint64_t hi = 1;  // lo == hi means constant latency
};

enum class CostModel : std::uint8_t { Unit, Ops };

struct FailureSpec {
  NodeId node = 0;
  std::uint64_t tick = 0;
};

struct SimConfig {
  std::size_t num_nodes = 1;
  std::uint64_t seed = 0;
  LatencyModel latency;
  std::size_t leaf_size = 16;
  MultiplyAlgo multiply_algo = MultiplyAlgo::Standard;
  std::size_t overload_threshold = 2;
  std::vector<FailureSpec> failures;
  CostModel cost_model = CostModel::Unit;
  std::uint64_t tick_budget = 100'000'000;
  std::size_t fragment_bytes = 1 << 16;
  std::string trace_path;  // empty: no trace file

  void validate() const {
    if (num_nodes == 0) throw Error(ErrorKind::PreconditionViolated, "num_nodes must be at least 1");
    if (latency.lo == 0 || latency.hi < latency.lo)
      throw Error(ErrorKind::PreconditionViolated, "latency range must satisfy 1 <= lo <= hi");
    if (overload_threshold == 0) throw Error(ErrorKind::PreconditionViolated, "overload_threshold must be positive");
    kernel().validate();
    for (const auto& f : failures) {
      if (f.node == 0) throw Error(ErrorKind::RootFailureUnsupported, "node 0 cannot fail");
      if (f.node >= num_nodes) throw Error(ErrorKind::InvalidIndex, "failure targets an unknown node", f.node);
    }
  }

  KernelConfig kernel() const { return {leaf_size, multiply_algo, AlgorithmClass::MA1}; }

  runtime::RuntimeConfig runtime() const { return {kernel(), num_nodes, overload_threshold, fragment_bytes}; }
};

struct RunReport {
  std::vector<AnyMatrix> result;
  std::uint64_t makespan_ticks = 0;
  std::vector<std::uint64_t> busy_ticks;
  std::uint64_t message_count = 0;
  std::uint64_t bytes_transferred = 0;
  std::uint64_t recomputed_drop_count = 0;
  std::uint64_t leaf_drop_count = 0;
  std::string trace_path;
};

/// Plain-text report: one "key: value" line per metric, then the result
/// matrices in the core text format.
inline void write_report(std::ostream& os, const RunReport& r) {
  os << "makespan_ticks: " << r.makespan_ticks << '\n';
  os << "busy_ticks:";
  for (auto b : r.busy_ticks) os << ' ' << b;
  os << '\n';
  os << "message_count: " << r.message_count << '\n';
  os << "bytes_transferred: " << r.bytes_transferred << '\n';
  os << "recomputed_drop_count: " << r.recomputed_drop_count << '\n';
  os << "leaf_drop_count: " << r.leaf_drop_count << '\n';
  os << "trace_path: " << r.trace_path << '\n';
  os << "result_count: " << r.result.size() << '\n';
  for (const auto& m : r.result) os << to_text(m);
}

inline std::string report_to_text(const RunReport& r) {
  std::ostringstream os;
  write_report(os, r);
  return os.str();
}

inline json config_to_json(const SimConfig& c) {
  json f = json::array();
  for (const auto& x : c.failures) f.push_back({x.node, x.tick});
  return {{"num_nodes", c.num_nodes},
          {"seed", c.seed},
          {"latency", {c.latency.lo, c.latency.hi}},
          {"leaf_size", c.leaf_size},
          {"multiply_algo", c.multiply_algo == MultiplyAlgo::Strassen ? "strassen" : "standard"},
          {"overload_threshold", c.overload_threshold},
          {"failures", f},
          {"cost_model", c.cost_model == CostModel::Ops ? "ops" : "unit"},
          {"tick_budget", c.tick_budget},
          {"fragment_bytes", c.fragment_bytes}};
}

inline SimConfig config_from_json(const json& j) {
  SimConfig c;
  c.num_nodes = j.at("num_nodes").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.latency = {j.at("latency").at(0).get<std::uint64_t>(), j.at("latency").at(1).get<std::uint64_t>()};
  c.leaf_size = j.at("leaf_size").get<std::size_t>();
  c.multiply_algo = j.at("multiply_algo").get<std::string>() == "strassen" ? MultiplyAlgo::Strassen
                                                                          : MultiplyAlgo::Standard;
  c.overload_threshold = j.at("overload_threshold").get<std::size_t>();
  for (const auto& f : j.at("failures")) c.failures.push_back({f.at(0).get<NodeId>(), f.at(1).get<std::uint64_t>()});
  c.cost_model = j.at("cost_model").get<std::string>() == "ops" ? CostModel::Ops : CostModel::Unit;
  c.tick_budget = j.at("tick_budget").get<std::uint64_t>();
  c.fragment_bytes = j.at("fragment_bytes").get<std::size_t>();
  return c;
}

/// Deterministic discrete-event driver for a cluster of NodeStates.
template <typename T>
class Simulation {
 public:
  Simulation(const SimConfig& cfg, DropType type, std::vector<Matrix<T>> inputs, std::ostream* trace = nullptr)
      : cfg_(cfg), rt_(cfg.runtime()), rng_(cfg.seed), trace_(trace) {
    cfg_.validate();
    if (inputs.size() != runtime::input_arity(type))
      throw Error(ErrorKind::InvalidShape, "wrong number of task inputs");
    for (NodeId n = 0; n < cfg_.num_nodes; ++n) nodes_.emplace_back(n);
    busy_.assign(cfg_.num_nodes, 0);
    calc_pending_.assign(cfg_.num_nodes, false);
    if (trace_) {
      json task = {{"drop_type", runtime::drop_type_name(type)}, {"scalar", ScalarTraits<T>::tag}};
      json ins = json::array();
      for (const auto& m : inputs) ins.push_back(to_text(m));
      task["inputs"] = ins;
      *trace_ << json{{"record", "header"}, {"config", config_to_json(cfg_)}, {"task", task}}.dump() << '\n';
    }
    runtime::seed_root(nodes_[0], type, std::move(inputs), rt_);
    for (const auto& f : cfg_.failures) inject_failure(f.node, f.tick);
    schedule_calc(0);
  }

  /// Schedules a fail-stop of `node` at `tick`. Repeated injections of the
  /// same node are ignored.
  void inject_failure(NodeId node, std::uint64_t tick) {
    if (node == 0) throw Error(ErrorKind::RootFailureUnsupported, "node 0 cannot fail");
    if (node >= nodes_.size()) throw Error(ErrorKind::InvalidIndex, "no such node", node);
    if (!fail_scheduled_.insert(node).second) return;
    push({tick, 0, EvKind::Fail, node, std::nullopt});
  }

  /// Processes one event. Returns false once the queue is empty.
  bool step() {
    if (queue_.empty()) return false;
    Event ev = queue_.top();
    queue_.pop();
    now_ = ev.tick;
    if (now_ > cfg_.tick_budget)
      throw Error(ErrorKind::Stalled, "tick budget of " + std::to_string(cfg_.tick_budget) + " exceeded");
    ++events_;
    switch (ev.kind) {
      case EvKind::Deliver: on_deliver(*ev.msg); break;
      case EvKind::CalcStep: on_calc_step(ev.node); break;
      case EvKind::CalcDone: on_calc_done(ev.node); break;
      case EvKind::Fail: on_fail(ev.node); break;
    }
    if (!done_ && nodes_[0].root_result) {
      done_ = true;
      makespan_ = now_;
    }
    return true;
  }

  RunReport run() {
    while (step()) {
    }
    if (!done_) throw Error(ErrorKind::Stalled, "event queue drained at tick " + std::to_string(now_) +
                                                    " without completion");
    RunReport r;
    for (const auto& m : *nodes_[0].root_result) r.result.emplace_back(m);
    r.makespan_ticks = makespan_;
    r.busy_ticks = busy_;
    r.message_count = message_count_;
    r.bytes_transferred = bytes_;
    for (const auto& n : nodes_) {
      r.recomputed_drop_count += n.recomputed_drops;
      r.leaf_drop_count += n.leaf_drops_computed;
    }
    r.trace_path = cfg_.trace_path;
    if (trace_) *trace_ << json{{"record", "end"}, {"events", events_}, {"makespan", makespan_}}.dump() << '\n';
    return r;
  }

  const std::vector<NodeState<T>>& nodes() const { return nodes_; }
  std::uint64_t now() const { return now_; }

 private:
  enum class EvKind : std::uint8_t { Deliver, CalcStep, CalcDone, Fail };

  struct Event {
    std::uint64_t tick;
    std::uint64_t seq;
    EvKind kind;
    NodeId node;
    std::optional<Message<T>> msg;
  };

  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.tick != b.tick ? a.tick > b.tick : a.seq > b.seq;
    }
  };

  void push(Event ev) {
    ev.seq = next_seq_++;
    queue_.push(std::move(ev));
  }

  std::uint64_t latency() {
    const auto& l = cfg_.latency;
    if (l.lo == l.hi) return l.lo;
    return l.lo + rng_() % (l.hi - l.lo + 1);
  }

  void record(json j) {
    if (!trace_) return;
    j["tick"] = now_;
    *trace_ << j.dump() << '\n';
  }

  void send(std::vector<Message<T>> out) {
    for (auto& m : out) {
      m.seq = next_msg_seq_++;
      ++message_count_;
      bytes_ += runtime::wire_size(m);
      auto& last = last_delivery_[{m.src, m.dst}];
      const std::uint64_t at = std::max(now_ + latency(), last);
      last = at;
      push({at, 0, EvKind::Deliver, m.dst, std::move(m)});
    }
  }

  void schedule_calc(NodeId n) {
    auto& node = nodes_[n];
    if (calc_pending_[n] || !node.alive() || node.current_drop || node.vokzal.empty()) return;
    calc_pending_[n] = true;
    push({now_, 0, EvKind::CalcStep, n, std::nullopt});
  }

  bool failed(NodeId n) const { return nodes_[n].status == runtime::NodeStatus::Failed; }

  void on_deliver(const Message<T>& m) {
    // Notices are sent on behalf of the failed node, so only they survive a
    // failed source.
    const bool notice = m.type == runtime::MsgType::FailureNotice;
    if (failed(m.dst) || (failed(m.src) && !notice)) {
      record({{"event", "discard"}, {"type", runtime::msg_type_name(m.type)}, {"src", m.src}, {"dst", m.dst},
              {"seq", m.seq}});
      if (failed(m.dst) && !failed(m.src) && !notice)
        send({runtime::make_message<T>(m.dst, m.src, runtime::FailureNoticePayload{m.dst})});
      return;
    }
    record({{"event", "deliver"}, {"message", runtime::message_to_json(m)}});
    send(runtime::dispatcher_step(nodes_[m.dst], m, rt_));
    schedule_calc(m.dst);
  }

  void on_calc_step(NodeId n) {
    calc_pending_[n] = false;
    if (failed(n)) return;
    std::vector<Message<T>> out;
    auto b = runtime::calc_begin(nodes_[n], rt_, out);
    std::uint64_t cost = 0;
    if (b.action == runtime::CalcAction::Computed) cost = cfg_.cost_model == CostModel::Unit ? 1 : std::max<std::uint64_t>(1, b.scalar_ops);
    record({{"event", "calc"},
            {"node", n},
            {"action", action_name(b.action)},
            {"pad", runtime::pad_to_json(b.pad)},
            {"drop_type", runtime::drop_type_name(b.drop_type)},
            {"cost", cost}});
    send(std::move(out));
    if (b.action == runtime::CalcAction::Computed) {
      busy_[n] += cost;
      push({now_ + cost, 0, EvKind::CalcDone, n, std::nullopt});
    } else {
      schedule_calc(n);
    }
  }

  void on_calc_done(NodeId n) {
    if (failed(n)) return;
    record({{"event", "calc_done"}, {"node", n}});
    std::vector<Message<T>> out;
    runtime::calc_finish(nodes_[n], rt_, out);
    send(std::move(out));
    schedule_calc(n);
  }

  void on_fail(NodeId n) {
    auto& node = nodes_[n];
    if (!node.alive()) return;
    record({{"event", "fail"}, {"node", n}});
    node.status = runtime::NodeStatus::Failed;
    node.current_drop.reset();
    // Everyone who would route work or results through n hears about it.
    for (auto& other : nodes_) {
      if (other.node_id == n || !other.alive()) continue;
      bool linked = runtime::detail::contains(other.aerodrome, n) || runtime::detail::contains(other.free_list, n) ||
                    std::any_of(other.terminal.begin(), other.terminal.end(),
                                [&](const runtime::ChildEntry& c) { return c.node == n; });
      if (linked) send({runtime::make_message<T>(n, other.node_id, runtime::FailureNoticePayload{n})});
    }
  }

  static const char* action_name(runtime::CalcAction a) {
    switch (a) {
      case runtime::CalcAction::Idle: return "idle";
      case runtime::CalcAction::Expanded: return "expand";
      case runtime::CalcAction::Computed: return "compute";
      case runtime::CalcAction::Skipped: return "skip";
    }
    return "?";
  }

  SimConfig cfg_;
  runtime::RuntimeConfig rt_;
  std::mt19937_64 rng_;
  std::ostream* trace_;
  std::vector<NodeState<T>> nodes_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::map<std::pair<NodeId, NodeId>, std::uint64_t> last_delivery_;
  std::vector<std::uint64_t> busy_;
  std::vector<bool> calc_pending_;
  std::set<NodeId> fail_scheduled_;
  std::uint64_t now_ = 0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t next_msg_seq_ = 0;
  std::uint64_t events_ = 0;
  std::uint64_t message_count_ = 0;
  std::uint64_t bytes_ = 0;
  std::uint64_t makespan_ = 0;
  bool done_ = false;
};

/// Runs `type` on `inputs` across the simulated cluster, writing a trace to
/// cfg.trace_path when it is set.
template <typename T>
RunReport run_simulation(DropType type, std::vector<Matrix<T>> inputs, const SimConfig& cfg) {
  std::unique_ptr<std::ofstream> file;
  if (!cfg.trace_path.empty()) {
    file = std::make_unique<std::ofstream>(cfg.trace_path, std::ios::binary);
    if (!*file) throw Error(ErrorKind::ParseError, "cannot open trace file " + cfg.trace_path);
  }
  Simulation<T> sim(cfg, type, std::move(inputs), file.get());
  return sim.run();
}

namespace detail {

template <typename T>
RunReport rerun(const SimConfig& cfg, DropType type, const json& inputs, std::ostream& os) {
  std::vector<Matrix<T>> in;
  for (const auto& e : inputs) in.push_back(from_text<T>(e.get<std::string>()));
  Simulation<T> sim(cfg, type, std::move(in), &os);
  return sim.run();
}

}  // namespace detail

/// Re-executes the run recorded in a trace and checks every event against it.
/// Any unreadable, truncated or diverging trace is a TraceDecodeError.
inline RunReport replay_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::TraceDecodeError, "cannot open " + path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  if (lines.size() < 2) throw Error(ErrorKind::TraceDecodeError, "trace has no events");
  json header, end;
  try {
    header = json::parse(lines.front());
    end = json::parse(lines.back());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::TraceDecodeError, std::string("malformed record: ") + e.what());
  }
  if (header.value("record", "") != "header") throw Error(ErrorKind::TraceDecodeError, "missing header record");
  if (!end.is_object() || end.value("record", "") != "end") throw Error(ErrorKind::TraceDecodeError, "missing end record");

  std::ostringstream replayed;
  RunReport report;
  try {
    SimConfig cfg = config_from_json(header.at("config"));
    const json& task = header.at("task");
    const auto type = runtime::parse_drop_type(task.at("drop_type").get<std::string>());
    const auto scalar = task.at("scalar").get<std::string>();
    if (scalar == ScalarTraits<double>::tag)
      report = detail::rerun<double>(cfg, type, task.at("inputs"), replayed);
    else if (scalar == ScalarTraits<Rational>::tag)
      report = detail::rerun<Rational>(cfg, type, task.at("inputs"), replayed);
    else
      throw Error(ErrorKind::TraceDecodeError, "unknown scalar kind " + scalar);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::TraceDecodeError, std::string("bad header: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::TraceDecodeError) throw;
    throw Error(ErrorKind::TraceDecodeError, std::string("replay failed: ") + e.what());
  }
  std::istringstream again(replayed.str());
  std::size_t n = 0;
  for (std::string line; std::getline(again, line); ++n)
    if (n >= lines.size() || line != lines[n])
      throw Error(ErrorKind::TraceDecodeError, "replay diverges from the trace", n + 1);
  if (n != lines.size()) throw Error(ErrorKind::TraceDecodeError, "trace has extra records", n + 1);
  report.trace_path = path;
  return report;
}

}  // namespace rma::sim
