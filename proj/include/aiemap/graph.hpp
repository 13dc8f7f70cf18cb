#pragma once

// Logical dataflow graph for one design point: X*Z groups of Y MatMul kernels,
// each group reduced by a single-core adder tree, fed by broadcast PLIO inputs.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "aiemap/array_opt.hpp"
#include "aiemap/device.hpp"
#include "aiemap/error.hpp"
#include "aiemap/kernel_opt.hpp"

namespace aiemap {

enum class NodeKind { MatMul, AdderTree };

inline std::string to_string(NodeKind k) { return k == NodeKind::MatMul ? "MatMul" : "AdderTree"; }

struct KernelNode {
  int id = 0;
  NodeKind kind = NodeKind::MatMul;
  int gx = 0;  // group x-index
  int gz = 0;  // group z-index
  int position = 0;  // 0..Y-1 for MatMul, 0 for the adder tree
  double latency_cycles = 0;
};

enum class Buffering { Single, Double };

inline int copies(Buffering b) { return b == Buffering::Double ? 2 : 1; }

struct Endpoint {
  enum class Kind { Node, PlioIn, PlioOut };
  Kind kind = Kind::Node;
  int index = 0;  // node id or PLIO index

  bool is_node() const { return kind == Kind::Node; }
  std::string str() const {
    switch (kind) {
      case Kind::Node: return "node:" + std::to_string(index);
      case Kind::PlioIn: return "plio_in:" + std::to_string(index);
      case Kind::PlioOut: return "plio_out:" + std::to_string(index);
    }
    return {};
  }
  static Endpoint parse(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw ConfigError("bad endpoint '" + s + "'");
    const auto tag = s.substr(0, colon);
    Endpoint e;
    try {
      e.index = std::stoi(s.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad endpoint '" + s + "'");
    }
    if (tag == "node")
      e.kind = Kind::Node;
    else if (tag == "plio_in")
      e.kind = Kind::PlioIn;
    else if (tag == "plio_out")
      e.kind = Kind::PlioOut;
    else
      throw ConfigError("bad endpoint '" + s + "'");
    return e;
  }

  friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

enum class EdgeRole { InputA, InputB, Partial, Intermediate, Output };

inline std::string to_string(EdgeRole r) {
  switch (r) {
    case EdgeRole::InputA: return "A";
    case EdgeRole::InputB: return "B";
    case EdgeRole::Partial: return "partial";
    case EdgeRole::Intermediate: return "intermediate";
    case EdgeRole::Output: return "output";
  }
  return {};
}

struct BufferEdge {
  int id = 0;
  Endpoint producer;
  Endpoint consumer;
  std::int64_t bytes = 0;  // one copy
  Buffering buffering = Buffering::Double;
  EdgeRole role = EdgeRole::InputA;
  std::optional<int> broadcast_group;  // PLIO index shared by all edges of one broadcast
};

struct DataflowGraph {
  ArrayShape array;
  KernelShape kernel;
  DataTypeSpec dtype = kFp32;
  std::vector<KernelNode> nodes;
  std::vector<BufferEdge> edges;
  int plio_inputs = 0;
  int plio_outputs = 0;
  double add_latency_cycles = 0;  // one Add kernel

  int matmul_count() const {
    int n = 0;
    for (const auto& v : nodes) n += v.kind == NodeKind::MatMul;
    return n;
  }
  int adder_count() const { return static_cast<int>(nodes.size()) - matmul_count(); }
  int group_index(const KernelNode& n) const { return n.gx * array.z + n.gz; }
  // Node ids of group g: Y MatMuls then (Y > 1) the adder tree.
  int first_node_of_group(int g) const { return g * nodes_per_group(); }
  int nodes_per_group() const { return array.y + (array.y > 1 ? 1 : 0); }
};

// Latency of Y-1 Add kernels run back to back on one core.
inline double adder_tree_latency(int y, double add_latency_cycles) {
  if (y < 2) throw DomainError("adder tree needs y >= 2");
  return (y - 1) * add_latency_cycles;
}

// PLIO numbering: A_{x,y} -> x*Y + y, B_{y,z} -> X*Y + y*Z + z, outputs by group.
inline DataflowGraph build_graph(const ArrayShape& a, const KernelShape& k, const DataTypeSpec& dt,
                                 const ProfileSet& profiles) {
  if (a.x <= 0 || a.y <= 0 || a.z <= 0) throw DomainError("array shape must be positive");
  DataflowGraph g;
  g.array = a;
  g.kernel = k;
  g.dtype = dt;
  g.plio_inputs = a.plio_in_used();
  g.plio_outputs = a.plio_out_used();
  const double mm_lat = profiles.require_matmul(dt, k).latency_cycles;
  if (a.y > 1) g.add_latency_cycles = profiles.require_add(dt, k.m, k.n).latency_cycles;

  const std::int64_t a_bytes = k.m * k.k * dt.input_bytes;
  const std::int64_t b_bytes = k.k * k.n * dt.input_bytes;
  const std::int64_t c_bytes = k.m * k.n * dt.output_bytes;

  auto add_edge = [&g](Endpoint p, Endpoint c, std::int64_t bytes, Buffering buf, EdgeRole role,
                       std::optional<int> bcast = std::nullopt) {
    g.edges.push_back({static_cast<int>(g.edges.size()), p, c, bytes, buf, role, bcast});
  };

  for (int x = 0; x < a.x; ++x)
    for (int z = 0; z < a.z; ++z) {
      const int group = x * a.z + z;
      std::vector<int> mms;
      for (int y = 0; y < a.y; ++y) {
        const int id = static_cast<int>(g.nodes.size());
        g.nodes.push_back({id, NodeKind::MatMul, x, z, y, mm_lat});
        mms.push_back(id);
        const int plio_a = x * a.y + y;
        const int plio_b = a.x * a.y + y * a.z + z;
        add_edge({Endpoint::Kind::PlioIn, plio_a}, {Endpoint::Kind::Node, id}, a_bytes, Buffering::Double,
                 EdgeRole::InputA, plio_a);
        add_edge({Endpoint::Kind::PlioIn, plio_b}, {Endpoint::Kind::Node, id}, b_bytes, Buffering::Double,
                 EdgeRole::InputB, plio_b);
      }
      if (a.y == 1) {
        add_edge({Endpoint::Kind::Node, mms.front()}, {Endpoint::Kind::PlioOut, group}, c_bytes, Buffering::Double,
                 EdgeRole::Output);
        continue;
      }
      const int adder = static_cast<int>(g.nodes.size());
      g.nodes.push_back({adder, NodeKind::AdderTree, x, z, 0, adder_tree_latency(a.y, g.add_latency_cycles)});
      for (int id : mms)
        add_edge({Endpoint::Kind::Node, id}, {Endpoint::Kind::Node, adder}, c_bytes, Buffering::Double,
                 EdgeRole::Partial);
      // Running sums between consecutive Add kernels on the same core.
      for (int i = 0; i + 2 < a.y; ++i)
        add_edge({Endpoint::Kind::Node, adder}, {Endpoint::Kind::Node, adder}, c_bytes, Buffering::Single,
                 EdgeRole::Intermediate);
      add_edge({Endpoint::Kind::Node, adder}, {Endpoint::Kind::PlioOut, group}, c_bytes, Buffering::Double,
               EdgeRole::Output);
    }
  return g;
}

inline nlohmann::json graph_to_json(const DataflowGraph& g) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : g.nodes)
    nodes.push_back({{"id", n.id},
                     {"kind", to_string(n.kind)},
                     {"group", {n.gx, n.gz}},
                     {"position", n.position},
                     {"latency_cycles", n.latency_cycles}});
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : g.edges) {
    nlohmann::json je{{"id", e.id},
                      {"producer", e.producer.str()},
                      {"consumer", e.consumer.str()},
                      {"bytes", e.bytes},
                      {"buffering", e.buffering == Buffering::Double ? "double" : "single"},
                      {"role", to_string(e.role)}};
    je["broadcast_group"] = e.broadcast_group ? nlohmann::json(*e.broadcast_group) : nlohmann::json(nullptr);
    edges.push_back(std::move(je));
  }
  return {{"array", g.array.str()},
          {"kernel", g.kernel.str()},
          {"dtype", g.dtype.name()},
          {"plio_inputs", g.plio_inputs},
          {"plio_outputs", g.plio_outputs},
          {"add_latency_cycles", g.add_latency_cycles},
          {"nodes", nodes},
          {"edges", edges}};
}

}  // namespace aiemap
