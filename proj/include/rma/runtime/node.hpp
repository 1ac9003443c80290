#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <vector>

#include "rma/runtime/expand.hpp"
#include "rma/runtime/message.hpp"

namespace rma::runtime {

struct RuntimeConfig {
  KernelConfig kernel;
  std::size_t num_nodes = 1;
  std::size_t overload_threshold = 2;
  // Matrix payloads whose text form exceeds this many bytes travel as
  // Fragment messages ahead of the main message. 0 disables fragmentation.
  std::size_t fragment_bytes = 1 << 16;
};

enum class NodeStatus : std::uint8_t { Busy, Free, Failed, Halted };

struct ChildEntry {
  NodeId node = 0;
  std::size_t load = 0;
  bool overloaded = false;
};

template <typename T>
struct CurrentDrop {
  Task<T> task;
  std::vector<Matrix<T>> outputs;
  std::uint64_t scalar_ops = 0;
};

template <typename T>
struct NodeState {
  NodeId node_id = 0;
  NodeStatus status = NodeStatus::Free;
  std::vector<Amine<T>> pine;
  std::map<int, std::deque<Task<T>>> vokzal;
  std::vector<NodeId> aerodrome;
  std::vector<ChildEntry> terminal;
  std::vector<NodeId> free_list;
  std::optional<CurrentDrop<T>> current_drop;

  // Tasks handed to other nodes, kept until their result returns so they can
  // be re-queued if the receiver fails.
  std::map<Pad, std::pair<NodeId, Task<T>>> outstanding;
  std::map<NodeId, std::size_t> parent_tasks;  // unanswered tasks per parent
  std::set<NodeId> known_failed;
  std::vector<bool> orphaned;                  // per Pine entry
  std::optional<NodeId> last_parent;
  bool announced_self = false;
  std::optional<bool> reported_overload;
  std::map<std::tuple<NodeId, FragmentOf, Pad, std::size_t>, std::vector<std::optional<std::string>>> fragments;

  std::optional<std::vector<Matrix<T>>> root_result;
  std::uint64_t recomputed_drops = 0;
  std::uint64_t leaf_drops_computed = 0;
  std::uint64_t duplicate_results = 0;

  NodeState() = default;
  explicit NodeState(NodeId id) : node_id(id) {}

  std::size_t queued() const {
    std::size_t n = 0;
    for (const auto& [rec, q] : vokzal) n += q.size();
    return n;
  }
  bool alive() const { return status != NodeStatus::Failed && status != NodeStatus::Halted; }
};

/// Puts the initial task into the root's Vokzal and hands it every other node
/// as free.
template <typename T>
void seed_root(NodeState<T>& root, DropType type, std::vector<Matrix<T>> inputs, const RuntimeConfig& cfg) {
  root.vokzal[0].push_back(Task<T>{root_pad(), type, 0, std::move(inputs)});
  for (NodeId n = 0; n < cfg.num_nodes; ++n)
    if (n != root.node_id) root.free_list.push_back(n);
  root.status = NodeStatus::Busy;
}

namespace detail {

template <typename T>
bool contains(const std::vector<T>& v, const T& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

template <typename T>
void erase_value(std::vector<T>& v, const T& x) {
  v.erase(std::remove(v.begin(), v.end(), x), v.end());
}

template <typename T>
Drop<T>* local_drop(NodeState<T>& node, const Pad& pad) {
  if (pad.proc != node.node_id || pad.is_root() || pad.amine >= node.pine.size()) return nullptr;
  return &node.pine[pad.amine].drops.at(pad.drop);
}

template <typename T>
void enqueue(NodeState<T>& node, Task<T> task) {
  node.vokzal[task.rec_num].push_back(std::move(task));
}

template <typename T>
Task<T> task_from_drop(const Drop<T>& d) {
  Task<T> t{d.pad, d.drop_type, d.rec_num, {}};
  for (const auto& s : d.in_data) t.inputs.push_back(*s);
  return t;
}

// Moves large matrices out of `slots` into Fragment messages.
template <typename T>
void fragment_slots(NodeId src, NodeId dst, FragmentOf of, const Pad& target,
                    std::vector<std::optional<Matrix<T>>>& slots, const RuntimeConfig& cfg,
                    std::vector<Message<T>>& out) {
  if (cfg.fragment_bytes == 0) return;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (!slots[s]) continue;
    std::string text = to_text(*slots[s]);
    if (text.size() <= cfg.fragment_bytes) continue;
    const std::size_t count = (text.size() + cfg.fragment_bytes - 1) / cfg.fragment_bytes;
    for (std::size_t c = 0; c < count; ++c)
      out.push_back(make_message<T>(
          src, dst, FragmentPayload{of, target, s, c, count, text.substr(c * cfg.fragment_bytes, cfg.fragment_bytes)}));
    slots[s].reset();
  }
}

template <typename T>
void reassemble(NodeState<T>& node, NodeId src, FragmentOf of, const Pad& target,
                std::vector<std::optional<Matrix<T>>>& slots) {
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (slots[s]) continue;
    auto it = node.fragments.find({src, of, target, s});
    if (it == node.fragments.end()) throw Error(ErrorKind::ParseError, "payload slot missing and no fragments buffered", s);
    std::string text;
    for (const auto& chunk : it->second) {
      if (!chunk) throw Error(ErrorKind::ParseError, "incomplete fragment sequence", s);
      text += *chunk;
    }
    slots[s] = from_text<T>(text);
    node.fragments.erase(it);
  }
}

template <typename T>
void send_result(NodeState<T>& node, const Pad& pad, const std::vector<Matrix<T>>& outputs, const RuntimeConfig& cfg,
                 std::vector<Message<T>>& out) {
  ResultPayload<T> r{pad, {}};
  for (const auto& m : outputs) r.out_data.emplace_back(m);
  fragment_slots(node.node_id, pad.proc, FragmentOf::Result, pad, r.out_data, cfg, out);
  out.push_back(make_message<T>(node.node_id, pad.proc, std::move(r)));
  auto it = node.parent_tasks.find(pad.proc);
  if (it != node.parent_tasks.end() && --it->second == 0) {
    node.parent_tasks.erase(it);
    erase_value(node.aerodrome, pad.proc);
  }
}

template <typename T>
void broadcast_completion(NodeState<T>& node, const RuntimeConfig& cfg, std::vector<Message<T>>& out) {
  for (NodeId n = 0; n < cfg.num_nodes; ++n)
    if (n != node.node_id && !node.known_failed.count(n))
      out.push_back(make_message<T>(node.node_id, n, CompletionPayload{}));
  node.status = NodeStatus::Halted;
  node.vokzal.clear();
  node.free_list.clear();
}

// Routes the outputs of the drop at `pad`: into a local Amine, to the root
// result, or to a remote parent.
template <typename T>
void deliver_results(NodeState<T>& node, const Pad& pad, const std::vector<Matrix<T>>& outputs,
                     const RuntimeConfig& cfg, std::vector<Message<T>>& out) {
  if (pad.proc != node.node_id) {
    if (!node.known_failed.count(pad.proc)) send_result(node, pad, outputs, cfg, out);
    return;
  }
  if (pad.is_root()) {
    node.root_result = outputs;
    broadcast_completion(node, cfg, out);
    return;
  }
  auto& am = node.pine.at(pad.amine);
  if (node.orphaned.at(pad.amine)) return;
  auto w = write_results_to_amine(am, pad.drop, outputs);
  if (w.duplicate) {
    ++node.duplicate_results;
    return;
  }
  for (auto r : w.ready) enqueue(node, task_from_drop(am.drops[r]));
  if (w.amine_complete) {
    std::vector<Matrix<T>> outs;
    for (const auto& s : am.out_data) outs.push_back(*s);
    deliver_results(node, am.return_pad, outs, cfg, out);
  }
}

template <typename T>
bool has_own_task(const NodeState<T>& node) {
  for (const auto& [rec, q] : node.vokzal)
    for (const auto& t : q)
      if (t.pad.proc == node.node_id) return true;
  return false;
}

// Removes the shallowest task whose outputs return to this node.
template <typename T>
std::optional<Task<T>> take_shallowest_own(NodeState<T>& node) {
  for (auto it = node.vokzal.begin(); it != node.vokzal.end(); ++it) {
    auto& q = it->second;
    for (auto t = q.begin(); t != q.end(); ++t) {
      if (t->pad.proc != node.node_id) continue;
      Task<T> task = std::move(*t);
      q.erase(t);
      if (q.empty()) node.vokzal.erase(it);
      return task;
    }
  }
  return std::nullopt;
}

template <typename T>
std::size_t expandable_load(const NodeState<T>& node, const RuntimeConfig& cfg) {
  std::size_t n = 0;
  for (const auto& [rec, q] : node.vokzal)
    for (const auto& t : q)
      if (!is_leaf_sized(t.drop_type, t.inputs, cfg.kernel)) ++n;
  return n;
}

template <typename T>
std::size_t send_task(NodeState<T>& node, NodeId dst, Task<T> task, const RuntimeConfig& cfg,
                      std::vector<Message<T>>& out) {
  if (auto* d = local_drop(node, task.pad)) {
    d->state = DropState::Sent;
    d->sent_to = dst;
  }
  if (std::none_of(node.terminal.begin(), node.terminal.end(), [&](const ChildEntry& c) { return c.node == dst; }))
    node.terminal.push_back({dst, 0, false});
  TaskPayload<T> p{task.pad, task.drop_type, task.rec_num, {}, {}};
  for (const auto& m : task.inputs) p.in_data.emplace_back(m);
  fragment_slots(node.node_id, dst, FragmentOf::Task, task.pad, p.in_data, cfg, out);
  out.push_back(make_message<T>(node.node_id, dst, std::move(p)));
  node.outstanding[task.pad] = {dst, std::move(task)};
  return out.size() - 1;
}

// Redistribution after any state change: hand the largest own tasks to free
// nodes, report subtree overload upward, and route spare free nodes.
template <typename T>
void rebalance(NodeState<T>& node, const RuntimeConfig& cfg, std::vector<Message<T>>& out) {
  if (!node.alive()) return;

  std::vector<std::size_t> sent;
  while (!node.free_list.empty()) {
    const std::size_t total = node.queued();
    if (total == 0 || (!node.current_drop && total == 1)) break;
    auto task = take_shallowest_own(node);
    if (!task) break;
    NodeId dst = node.free_list.front();
    node.free_list.erase(node.free_list.begin());
    sent.push_back(send_task(node, dst, std::move(*task), cfg, out));
  }
  // Remaining free nodes ride along with the tasks just sent.
  for (std::size_t i = 0; !sent.empty() && !node.free_list.empty(); ++i) {
    auto& p = std::get<TaskPayload<T>>(out[sent[i % sent.size()]].payload);
    p.free_nodes.push_back(node.free_list.front());
    node.free_list.erase(node.free_list.begin());
  }

  const bool vokzal_empty = node.vokzal.empty();
  node.status = vokzal_empty && !node.current_drop ? NodeStatus::Free : NodeStatus::Busy;

  const std::size_t load = expandable_load(node, cfg);
  bool over = load >= cfg.overload_threshold;
  for (const auto& c : node.terminal) over = over || c.overloaded;
  if (!node.aerodrome.empty() && node.reported_overload != over) {
    for (auto p : node.aerodrome) out.push_back(make_message<T>(node.node_id, p, ChildStatusPayload{over, load}));
    node.reported_overload = over;
  }

  const bool idle = node.status == NodeStatus::Free && node.aerodrome.empty() && node.outstanding.empty();
  const bool announce = idle && !node.announced_self && node.node_id != 0;
  std::vector<NodeId> spare = node.free_list;
  if (announce) spare.push_back(node.node_id);
  if (spare.empty() || has_own_task(node)) return;
  auto child = std::find_if(node.terminal.begin(), node.terminal.end(),
                            [](const ChildEntry& c) { return c.overloaded; });
  if (child != node.terminal.end()) {
    out.push_back(make_message<T>(node.node_id, child->node, FreeNodesPayload{spare}));
  } else if (vokzal_empty && node.node_id != 0) {
    NodeId parent = 0;
    if (!node.aerodrome.empty())
      parent = node.aerodrome.back();
    else if (node.last_parent && !node.known_failed.count(*node.last_parent))
      parent = *node.last_parent;
    out.push_back(make_message<T>(node.node_id, parent, FreeNodesPayload{spare}));
  } else {
    return;
  }
  node.free_list.clear();
  if (announce) node.announced_self = true;
}

template <typename T>
void merge_free(NodeState<T>& node, const std::vector<NodeId>& nodes) {
  for (auto n : nodes)
    if (n != node.node_id && !node.known_failed.count(n) && !contains(node.free_list, n)) node.free_list.push_back(n);
}

template <typename T>
void mark_orphans(NodeState<T>& node, NodeId failed) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < node.pine.size(); ++i) {
      if (node.orphaned[i] || node.pine[i].complete) continue;
      const Pad& rp = node.pine[i].return_pad;
      bool lost = rp.proc == failed;
      if (!lost && rp.proc == node.node_id && !rp.is_root()) lost = node.orphaned[rp.amine];
      if (lost) node.orphaned[i] = changed = true;
    }
  }
}

}  // namespace detail

enum class CalcAction : std::uint8_t { Idle, Expanded, Computed, Skipped };

struct CalcBegin {
  CalcAction action = CalcAction::Idle;
  Pad pad;
  DropType drop_type = DropType::Mul;
  std::uint64_t scalar_ops = 0;
};

/// First half of a CalcThread step: pops the deepest task and either expands
/// it into a new Amine or computes it, parking the outputs in current_drop.
template <typename T>
CalcBegin calc_begin(NodeState<T>& node, const RuntimeConfig& cfg, std::vector<Message<T>>& out) {
  CalcBegin b;
  if (!node.alive() || node.current_drop) return b;
  if (node.vokzal.empty()) {
    detail::rebalance(node, cfg, out);
    return b;
  }
  auto it = std::prev(node.vokzal.end());
  Task<T> task = std::move(it->second.front());
  it->second.pop_front();
  if (it->second.empty()) node.vokzal.erase(it);
  b.pad = task.pad;
  b.drop_type = task.drop_type;

  Drop<T>* d = detail::local_drop(node, task.pad);
  if (d && d->state == DropState::Done) {
    b.action = CalcAction::Skipped;
  } else if (!is_leaf_sized(task.drop_type, task.inputs, cfg.kernel)) {
    const std::size_t idx = node.pine.size();
    auto am = expand(task.drop_type, task.inputs, task.rec_num, task.pad, node.node_id, idx, cfg.kernel);
    if (d) d->state = DropState::Expanded;  // before the Pine grows and moves it
    node.pine.push_back(std::move(am));
    node.orphaned.push_back(false);
    for (const auto& nd : node.pine.back().drops)
      if (nd.state == DropState::Ready) detail::enqueue(node, detail::task_from_drop(nd));
    b.action = CalcAction::Expanded;
  } else {
    OpCounter ctr;
    auto outputs = compute_drop(task.drop_type, task.inputs, cfg.kernel, ctr);
    if (d) d->state = DropState::Running;
    b.action = CalcAction::Computed;
    b.scalar_ops = ctr.scalar_ops();
    ++node.leaf_drops_computed;
    node.current_drop = CurrentDrop<T>{std::move(task), std::move(outputs), b.scalar_ops};
  }
  detail::rebalance(node, cfg, out);
  return b;
}

/// Second half of a CalcThread step: publishes the parked outputs.
template <typename T>
void calc_finish(NodeState<T>& node, const RuntimeConfig& cfg, std::vector<Message<T>>& out) {
  if (!node.current_drop) return;
  auto cur = std::move(*node.current_drop);
  node.current_drop.reset();
  if (!node.alive()) return;
  detail::deliver_results(node, cur.task.pad, cur.outputs, cfg, out);
  detail::rebalance(node, cfg, out);
}

/// One complete CalcThread step.
template <typename T>
std::vector<Message<T>> calc_thread_step(NodeState<T>& node, const RuntimeConfig& cfg) {
  std::vector<Message<T>> out;
  if (calc_begin(node, cfg, out).action == CalcAction::Computed) calc_finish(node, cfg, out);
  return out;
}

/// Fail-stop notification: re-queue everything sent to `failed`, drop work
/// whose results can no longer be delivered, and forget the node.
template <typename T>
std::vector<Message<T>> handle_failure(NodeState<T>& node, NodeId failed, const RuntimeConfig& cfg) {
  std::vector<Message<T>> out;
  if (!node.alive() || failed == node.node_id || failed >= cfg.num_nodes) return out;
  node.known_failed.insert(failed);
  for (auto it = node.outstanding.begin(); it != node.outstanding.end();) {
    if (it->second.first != failed) {
      ++it;
      continue;
    }
    if (auto* d = detail::local_drop(node, it->first)) d->state = DropState::Ready;
    detail::enqueue(node, std::move(it->second.second));
    ++node.recomputed_drops;
    it = node.outstanding.erase(it);
  }
  node.terminal.erase(std::remove_if(node.terminal.begin(), node.terminal.end(),
                                     [&](const ChildEntry& c) { return c.node == failed; }),
                      node.terminal.end());
  detail::erase_value(node.free_list, failed);
  detail::erase_value(node.aerodrome, failed);
  node.parent_tasks.erase(failed);
  detail::mark_orphans(node, failed);
  for (auto it = node.vokzal.begin(); it != node.vokzal.end();) {
    auto& q = it->second;
    q.erase(std::remove_if(q.begin(), q.end(),
                           [&](const Task<T>& t) {
                             if (t.pad.proc == failed) return true;
                             return t.pad.proc == node.node_id && !t.pad.is_root() && node.orphaned[t.pad.amine];
                           }),
            q.end());
    it = q.empty() ? node.vokzal.erase(it) : std::next(it);
  }
  for (auto it = node.fragments.begin(); it != node.fragments.end();)
    it = std::get<0>(it->first) == failed ? node.fragments.erase(it) : std::next(it);
  detail::rebalance(node, cfg, out);
  return out;
}

/// Dispatcher step for one incoming message.
template <typename T>
std::vector<Message<T>> dispatcher_step(NodeState<T>& node, const Message<T>& msg, const RuntimeConfig& cfg) {
  std::vector<Message<T>> out;
  if (!node.alive()) return out;
  switch (msg.type) {
    case MsgType::Task: {
      auto p = std::get<TaskPayload<T>>(msg.payload);
      detail::reassemble(node, msg.src, FragmentOf::Task, p.pad, p.in_data);
      Task<T> task{p.pad, p.drop_type, p.rec_num, {}};
      for (auto& s : p.in_data) task.inputs.push_back(std::move(*s));
      if (!detail::contains(node.aerodrome, p.pad.proc)) {
        node.aerodrome.push_back(p.pad.proc);
        node.reported_overload.reset();
      }
      ++node.parent_tasks[p.pad.proc];
      node.last_parent = p.pad.proc;
      node.announced_self = false;
      detail::merge_free(node, p.free_nodes);
      detail::enqueue(node, std::move(task));
      node.status = NodeStatus::Busy;
      break;
    }
    case MsgType::Result: {
      auto p = std::get<ResultPayload<T>>(msg.payload);
      detail::reassemble(node, msg.src, FragmentOf::Result, p.pad, p.out_data);
      auto it = node.outstanding.find(p.pad);
      if (it != node.outstanding.end() && it->second.first == msg.src) {
        node.outstanding.erase(it);
        const bool more = std::any_of(node.outstanding.begin(), node.outstanding.end(),
                                      [&](const auto& kv) { return kv.second.first == msg.src; });
        if (!more)
          node.terminal.erase(std::remove_if(node.terminal.begin(), node.terminal.end(),
                                             [&](const ChildEntry& c) { return c.node == msg.src; }),
                              node.terminal.end());
      }
      std::vector<Matrix<T>> outputs;
      for (auto& s : p.out_data) outputs.push_back(std::move(*s));
      detail::deliver_results(node, p.pad, outputs, cfg, out);
      break;
    }
    case MsgType::FreeNodes: detail::merge_free(node, std::get<FreeNodesPayload>(msg.payload).nodes); break;
    case MsgType::ChildStatus: {
      const auto& p = std::get<ChildStatusPayload>(msg.payload);
      for (auto& c : node.terminal)
        if (c.node == msg.src) {
          c.overloaded = p.overloaded;
          c.load = p.load;
        }
      break;
    }
    case MsgType::Fragment: {
      const auto& f = std::get<FragmentPayload>(msg.payload);
      auto& chunks = node.fragments[{msg.src, f.of, f.target, f.slot}];
      if (f.chunk_count == 0 || f.chunk_index >= f.chunk_count)
        throw Error(ErrorKind::ParseError, "malformed fragment header");
      chunks.resize(f.chunk_count);
      chunks[f.chunk_index] = f.bytes;
      return out;
    }
    case MsgType::Completion:
      node.status = NodeStatus::Halted;
      node.vokzal.clear();
      node.free_list.clear();
      return out;
    case MsgType::FailureNotice:
      return handle_failure(node, std::get<FailureNoticePayload>(msg.payload).failed, cfg);
  }
  detail::rebalance(node, cfg, out);
  return out;
}

}  // namespace rma::runtime
