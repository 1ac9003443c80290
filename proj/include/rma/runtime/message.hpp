#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "rma/matrix_io.hpp"
#include "rma/runtime/drop.hpp"

namespace rma::runtime {

enum class MsgType : std::uint8_t { Task, Result, FreeNodes, ChildStatus, Fragment, Completion, FailureNotice };

inline constexpr std::string_view msg_type_name(MsgType t) noexcept {
  switch (t) {
    case MsgType::Task: return "Task";
    case MsgType::Result: return "Result";
    case MsgType::FreeNodes: return "FreeNodes";
    case MsgType::ChildStatus: return "ChildStatus";
    case MsgType::Fragment: return "Fragment";
    case MsgType::Completion: return "Completion";
    case MsgType::FailureNotice: return "FailureNotice";
  }
  return "?";
}

// Matrix slots left empty travel separately as Fragment messages.
template <typename T>
struct TaskPayload {
  Pad pad;
  DropType drop_type = DropType::Mul;
  int rec_num = 0;
  std::vector<std::optional<Matrix<T>>> in_data;
  std::vector<NodeId> free_nodes;
};

template <typename T>
struct ResultPayload {
  Pad pad;
  std::vector<std::optional<Matrix<T>>> out_data;
};

struct FreeNodesPayload {
  std::vector<NodeId> nodes;
};

struct ChildStatusPayload {
  bool overloaded = false;
  std::size_t load = 0;
};

enum class FragmentOf : std::uint8_t { Task, Result };

struct FragmentPayload {
  FragmentOf of = FragmentOf::Task;
  Pad target;
  std::size_t slot = 0;
  std::size_t chunk_index = 0;
  std::size_t chunk_count = 0;
  std::string bytes;
};

struct CompletionPayload {};

struct FailureNoticePayload {
  NodeId failed = 0;
};

template <typename T>
using Payload = std::variant<TaskPayload<T>, ResultPayload<T>, FreeNodesPayload, ChildStatusPayload, FragmentPayload,
                             CompletionPayload, FailureNoticePayload>;

template <typename T>
struct Message {
  MsgType type = MsgType::Completion;
  NodeId src = 0;
  NodeId dst = 0;
  std::uint64_t seq = 0;  // assigned by the transport
  Payload<T> payload;
};

template <typename T>
Message<T> make_message(NodeId src, NodeId dst, Payload<T> payload) {
  Message<T> m;
  m.type = static_cast<MsgType>(payload.index());
  m.src = src;
  m.dst = dst;
  m.payload = std::move(payload);
  return m;
}

// ---------------------------------------------------------------------------
// JSON wire form

using nlohmann::json;

inline json pad_to_json(const Pad& p) {
  return json::array({p.proc, p.is_root() ? json(nullptr) : json(p.amine), p.drop});
}

inline Pad pad_from_json(const json& j) {
  Pad p;
  p.proc = j.at(0).get<NodeId>();
  p.amine = j.at(1).is_null() ? kRootAmine : j.at(1).get<std::size_t>();
  p.drop = j.at(2).get<std::size_t>();
  return p;
}

template <typename T>
json slots_to_json(const std::vector<std::optional<Matrix<T>>>& slots) {
  json a = json::array();
  for (const auto& s : slots) a.push_back(s ? json(to_text(*s)) : json(nullptr));
  return a;
}

template <typename T>
std::vector<std::optional<Matrix<T>>> slots_from_json(const json& j) {
  std::vector<std::optional<Matrix<T>>> out;
  for (const auto& e : j) {
    if (e.is_null())
      out.emplace_back();
    else
      out.emplace_back(from_text<T>(e.get<std::string>()));
  }
  return out;
}

template <typename T>
json payload_to_json(const Payload<T>& p) {
  return std::visit(
      [](const auto& v) -> json {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, TaskPayload<T>>) {
          return {{"pad", pad_to_json(v.pad)},
                  {"drop_type", drop_type_name(v.drop_type)},
                  {"rec_num", v.rec_num},
                  {"in_data", slots_to_json(v.in_data)},
                  {"free_nodes", v.free_nodes}};
        } else if constexpr (std::is_same_v<V, ResultPayload<T>>) {
          return {{"pad", pad_to_json(v.pad)}, {"out_data", slots_to_json(v.out_data)}};
        } else if constexpr (std::is_same_v<V, FreeNodesPayload>) {
          return {{"nodes", v.nodes}};
        } else if constexpr (std::is_same_v<V, ChildStatusPayload>) {
          return {{"overloaded", v.overloaded}, {"load", v.load}};
        } else if constexpr (std::is_same_v<V, FragmentPayload>) {
          return {{"of", v.of == FragmentOf::Task ? "Task" : "Result"},
                  {"target", pad_to_json(v.target)},
                  {"slot", v.slot},
                  {"chunk_index", v.chunk_index},
                  {"chunk_count", v.chunk_count},
                  {"bytes", v.bytes}};
        } else if constexpr (std::is_same_v<V, FailureNoticePayload>) {
          return {{"failed", v.failed}};
        } else {
          return json::object();
        }
      },
      p);
}

template <typename T>
json message_to_json(const Message<T>& m) {
  return {{"type", msg_type_name(m.type)},
          {"src", m.src},
          {"dst", m.dst},
          {"seq", m.seq},
          {"payload", payload_to_json<T>(m.payload)}};
}

inline MsgType parse_msg_type(std::string_view s) {
  for (auto t : {MsgType::Task, MsgType::Result, MsgType::FreeNodes, MsgType::ChildStatus, MsgType::Fragment,
                 MsgType::Completion, MsgType::FailureNotice})
    if (msg_type_name(t) == s) return t;
  throw Error(ErrorKind::ParseError, "unknown message type '" + std::string(s) + "'");
}

template <typename T>
Message<T> message_from_json(const json& j) {
  Message<T> m;
  m.type = parse_msg_type(j.at("type").get<std::string>());
  m.src = j.at("src").get<NodeId>();
  m.dst = j.at("dst").get<NodeId>();
  m.seq = j.at("seq").get<std::uint64_t>();
  const json& p = j.at("payload");
  switch (m.type) {
    case MsgType::Task: {
      TaskPayload<T> t;
      t.pad = pad_from_json(p.at("pad"));
      t.drop_type = parse_drop_type(p.at("drop_type").get<std::string>());
      t.rec_num = p.at("rec_num").get<int>();
      t.in_data = slots_from_json<T>(p.at("in_data"));
      t.free_nodes = p.at("free_nodes").get<std::vector<NodeId>>();
      m.payload = std::move(t);
      break;
    }
    case MsgType::Result:
      m.payload = ResultPayload<T>{pad_from_json(p.at("pad")), slots_from_json<T>(p.at("out_data"))};
      break;
    case MsgType::FreeNodes: m.payload = FreeNodesPayload{p.at("nodes").get<std::vector<NodeId>>()}; break;
    case MsgType::ChildStatus:
      m.payload = ChildStatusPayload{p.at("overloaded").get<bool>(), p.at("load").get<std::size_t>()};
      break;
    case MsgType::Fragment:
      m.payload = FragmentPayload{p.at("of").get<std::string>() == "Task" ? FragmentOf::Task : FragmentOf::Result,
                                  pad_from_json(p.at("target")),
                                  p.at("slot").get<std::size_t>(),
                                  p.at("chunk_index").get<std::size_t>(),
                                  p.at("chunk_count").get<std::size_t>(),
                                  p.at("bytes").get<std::string>()};
      break;
    case MsgType::Completion: m.payload = CompletionPayload{}; break;
    case MsgType::FailureNotice: m.payload = FailureNoticePayload{p.at("failed").get<NodeId>()}; break;
  }
  return m;
}

/// Size of a message on the wire (its serialized form).
template <typename T>
std::size_t wire_size(const Message<T>& m) {
  return message_to_json(m).dump().size();
}

}  // namespace rma::runtime
