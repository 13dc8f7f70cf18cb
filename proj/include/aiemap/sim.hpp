#pragma once

// Discrete-event simulation of a dataflow graph at whole-buffer granularity.
//
// Entities are input streams (one per input PLIO, broadcasting each tile to
// every destination at once), MatMul cores, adder-tree cores and output
// streams. Every inter-core edge is a ring of one or two buffer copies that the
// producer fills and the consumer drains in order. An entity starts a step as
// soon as all its input copies are full and its output copies are empty.
// Events at equal times are processed in entity-id order.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "aiemap/device.hpp"
#include "aiemap/error.hpp"
#include "aiemap/graph.hpp"
#include "aiemap/kernel_opt.hpp"

namespace aiemap {

struct SimConfig {
  int horizon = 20;             // MatMul firings per kernel
  int warmup_iterations = 2;    // excluded from the steady-state window
  double stream_bw = 0;         // bytes/cycle; 0 selects the device bw_io
  double dma_latency = 50;      // extra cycles per DMA transfer (assumed, not measured)
  bool record_trace = false;

  void validate() const {
    if (warmup_iterations < 0) throw DomainError("warmup_iterations must be >= 0");
    if (horizon < warmup_iterations + 3) throw DomainError("horizon must be >= warmup + 3");
    if (stream_bw < 0) throw DomainError("stream_bw must be >= 0");
    if (dma_latency < 0) throw DomainError("dma_latency must be >= 0");
  }
};

enum class Bottleneck { MatMul, AdderTree, InputStream, OutputStream, None };

inline std::string to_string(Bottleneck b) {
  switch (b) {
    case Bottleneck::MatMul: return "MatMul";
    case Bottleneck::AdderTree: return "AdderTree";
    case Bottleneck::InputStream: return "InputStream";
    case Bottleneck::OutputStream: return "OutputStream";
    case Bottleneck::None: return "None";
  }
  return {};
}

struct TraceEvent {
  double time;
  std::string entity;
  std::string what;  // start | end | ready
  int step;
};

struct SimResult {
  double steady_state_throughput = 0;  // aggregate MACs/cycle
  std::vector<double> per_node_busy_fraction;  // by node id
  std::vector<double> input_stream_busy_fraction;
  std::vector<double> output_stream_busy_fraction;
  double matmul_utilization = 0;  // highest busy fraction in each class
  double adder_utilization = 0;
  double input_stream_utilization = 0;
  double output_stream_utilization = 0;
  Bottleneck bottleneck = Bottleneck::None;
  std::int64_t event_count = 0;
  std::uint64_t trace_hash = 0;
  std::int64_t matmul_firings = 0;
  std::int64_t total_macs = 0;
  std::int64_t rw_overlaps = 0;  // a copy read while written, or written while read
  double window_start = 0;
  double window_end = 0;
  double makespan = 0;
  std::vector<TraceEvent> trace;
};

namespace detail {

class BufferRing {
 public:
  enum class State : std::uint8_t { Empty, Writing, Full, Reading };

  explicit BufferRing(int copies) : copies_(static_cast<std::size_t>(copies), State::Empty) {}

  bool can_write() const { return copies_[w_] == State::Empty; }
  bool can_read() const { return copies_[r_] == State::Full; }

  // Returns false on a read/write overlap.
  bool begin_write() {
    const bool ok = copies_[w_] != State::Reading;
    copies_[w_] = State::Writing;
    pending_.push_back(w_);
    w_ = (w_ + 1) % copies_.size();
    return ok;
  }
  void end_write() {
    const auto c = pending_.front();
    pending_.erase(pending_.begin());
    copies_[c] = State::Full;
  }
  bool begin_read() {
    const bool ok = copies_[r_] != State::Writing;
    copies_[r_] = State::Reading;
    reading_ = r_;
    r_ = (r_ + 1) % copies_.size();
    return ok;
  }
  void end_read() { copies_[reading_] = State::Empty; }

 private:
  std::vector<State> copies_;
  std::vector<std::size_t> pending_;
  std::size_t w_ = 0;
  std::size_t r_ = 0;
  std::size_t reading_ = 0;
};

enum class EntityKind { InputStream, MatMul, AdderTree, OutputStream };

struct Entity {
  EntityKind kind;
  std::string name;
  int node = -1;  // graph node id for cores
  double duration = 0;
  std::vector<int> inputs;   // buffer indices read per step
  std::vector<int> outputs;  // buffer indices written per step
  bool busy = false;
  int steps = 0;
  int limit = 0;
  std::vector<std::pair<double, double>> busy_intervals;
  std::vector<double> completions;
};

struct Buffer {
  BufferRing ring;
  int writer = -1;
  int reader = -1;
  double fill_delay = 0;  // DMA latency on top of the producer's step
};

struct Event {
  double time;
  int entity;  // tie-break
  std::int64_t seq;
  enum class Kind { StepDone, BufferReady } kind;
  int buffer = -1;

  bool operator>(const Event& o) const {
    if (time != o.time) return time > o.time;
    if (entity != o.entity) return entity > o.entity;
    return seq > o.seq;
  }
};

inline void hash_mix(std::uint64_t& h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffu;
    h *= 1099511628211ull;
  }
}

inline double clipped_busy(const std::vector<std::pair<double, double>>& iv, double lo, double hi) {
  double s = 0;
  for (auto [a, b] : iv) s += std::max(0.0, std::min(b, hi) - std::max(a, lo));
  return s;
}

}  // namespace detail

// `dma_edges` lists edge ids whose transfer pays `dma_latency` (from a placement).
inline SimResult simulate(const DataflowGraph& g, const ProfileSet& profiles, const SimConfig& cfg,
                          const Device& dev, const std::vector<int>& dma_edges = {}) {
  cfg.validate();
  SimResult res;
  res.per_node_busy_fraction.assign(g.nodes.size(), 0.0);
  if (g.nodes.empty()) return res;

  const double bw = cfg.stream_bw > 0 ? cfg.stream_bw : dev.bw_io;
  const double mm_lat = profiles.require_matmul(g.dtype, g.kernel).latency_cycles;
  const double add_lat = g.array.y > 1 ? profiles.require_add(g.dtype, g.kernel.m, g.kernel.n).latency_cycles : 0.0;
  if (!(mm_lat > 0) || (g.array.y > 1 && !(add_lat > 0))) throw DomainError("kernel latencies must be positive");
  const std::set<int> dma(dma_edges.begin(), dma_edges.end());

  std::vector<detail::Entity> ents;
  std::vector<detail::Buffer> bufs;
  std::vector<int> node_entity(g.nodes.size(), -1);
  std::map<int, int> in_stream_entity, out_stream_entity;

  // Streams are paced by back-pressure only, so they keep their steady rate
  // through the whole measurement window.
  constexpr int kUnbounded = std::numeric_limits<int>::max();
  // Entity ids: input streams, then cores in node order, then output streams.
  for (int p = 0; p < g.plio_inputs; ++p) {
    in_stream_entity[p] = static_cast<int>(ents.size());
    ents.push_back({detail::EntityKind::InputStream, "plio_in:" + std::to_string(p), -1, 0, {}, {}, false, 0,
                    kUnbounded, {}, {}});
  }
  for (const auto& n : g.nodes) {
    node_entity[static_cast<std::size_t>(n.id)] = static_cast<int>(ents.size());
    const bool mm = n.kind == NodeKind::MatMul;
    ents.push_back({mm ? detail::EntityKind::MatMul : detail::EntityKind::AdderTree,
                    "node:" + std::to_string(n.id), n.id, mm ? mm_lat : adder_tree_latency(g.array.y, add_lat), {}, {},
                    false, 0, cfg.horizon, {}, {}});
  }
  for (int p = 0; p < g.plio_outputs; ++p) {
    out_stream_entity[p] = static_cast<int>(ents.size());
    ents.push_back({detail::EntityKind::OutputStream, "plio_out:" + std::to_string(p), -1, 0, {}, {}, false, 0,
                    kUnbounded, {}, {}});
  }

  for (const auto& e : g.edges) {
    if (e.role == EdgeRole::Intermediate) continue;  // folded into the adder-tree latency
    const int b = static_cast<int>(bufs.size());
    detail::Buffer buf{detail::BufferRing(copies(e.buffering)), -1, -1, dma.count(e.id) ? cfg.dma_latency : 0.0};
    auto entity_of = [&](const Endpoint& ep) {
      switch (ep.kind) {
        case Endpoint::Kind::Node: return node_entity.at(static_cast<std::size_t>(ep.index));
        case Endpoint::Kind::PlioIn: return in_stream_entity.at(ep.index);
        case Endpoint::Kind::PlioOut: return out_stream_entity.at(ep.index);
      }
      return -1;
    };
    buf.writer = entity_of(e.producer);
    buf.reader = entity_of(e.consumer);
    auto& w = ents[static_cast<std::size_t>(buf.writer)];
    auto& r = ents[static_cast<std::size_t>(buf.reader)];
    w.outputs.push_back(b);
    r.inputs.push_back(b);
    // Stream steps take as long as moving one tile at the stream rate.
    if (w.kind == detail::EntityKind::InputStream) w.duration = static_cast<double>(e.bytes) / bw;
    if (r.kind == detail::EntityKind::OutputStream) r.duration = static_cast<double>(e.bytes) / bw;
    bufs.push_back(std::move(buf));
  }

  std::priority_queue<detail::Event, std::vector<detail::Event>, std::greater<>> q;
  std::int64_t seq = 0;
  std::uint64_t h = 1469598103934665603ull;
  std::set<int> ready;  // entities to re-check, ascending id
  for (std::size_t i = 0; i < ents.size(); ++i) ready.insert(static_cast<int>(i));

  auto note = [&](double t, int entity, int what, int step) {
    std::uint64_t bits;
    std::memcpy(&bits, &t, sizeof bits);
    detail::hash_mix(h, bits);
    detail::hash_mix(h, static_cast<std::uint64_t>(entity));
    detail::hash_mix(h, static_cast<std::uint64_t>(what));
    if (cfg.record_trace) {
      static const char* names[] = {"start", "end", "ready"};
      res.trace.push_back({t, ents[static_cast<std::size_t>(entity)].name, names[what], step});
    }
  };

  auto try_start = [&](int id, double now) {
    auto& en = ents[static_cast<std::size_t>(id)];
    if (en.busy || en.steps >= en.limit) return;
    for (int b : en.inputs)
      if (!bufs[static_cast<std::size_t>(b)].ring.can_read()) return;
    for (int b : en.outputs)
      if (!bufs[static_cast<std::size_t>(b)].ring.can_write()) return;
    for (int b : en.inputs) res.rw_overlaps += !bufs[static_cast<std::size_t>(b)].ring.begin_read();
    for (int b : en.outputs) res.rw_overlaps += !bufs[static_cast<std::size_t>(b)].ring.begin_write();
    en.busy = true;
    en.busy_intervals.push_back({now, now + en.duration});
    note(now, id, 0, en.steps);
    q.push({now + en.duration, id, seq++, detail::Event::Kind::StepDone, -1});
  };

  double now = 0;
  while (true) {
    while (!ready.empty()) {
      const int id = *ready.begin();
      ready.erase(ready.begin());
      try_start(id, now);
    }
    if (q.empty()) break;
    const auto ev = q.top();
    q.pop();
    now = ev.time;
    ++res.event_count;
    if (ev.kind == detail::Event::Kind::BufferReady) {
      auto& buf = bufs[static_cast<std::size_t>(ev.buffer)];
      buf.ring.end_write();
      note(now, ev.entity, 2, -1);
      ready.insert(buf.reader);
      continue;
    }
    auto& en = ents[static_cast<std::size_t>(ev.entity)];
    en.busy = false;
    en.completions.push_back(now);
    note(now, ev.entity, 1, en.steps);
    ++en.steps;
    if (en.kind == detail::EntityKind::MatMul) ++res.matmul_firings;
    for (int b : en.inputs) {
      bufs[static_cast<std::size_t>(b)].ring.end_read();
      ready.insert(bufs[static_cast<std::size_t>(b)].writer);
    }
    for (int b : en.outputs) {
      auto& buf = bufs[static_cast<std::size_t>(b)];
      if (buf.fill_delay > 0) {
        q.push({now + buf.fill_delay, ev.entity, seq++, detail::Event::Kind::BufferReady, b});
      } else {
        buf.ring.end_write();
        ready.insert(buf.reader);
      }
    }
    ready.insert(ev.entity);
  }
  res.trace_hash = h;
  res.makespan = now;

  std::ostringstream blocked;
  for (const auto& en : ents)
    if (en.kind == detail::EntityKind::MatMul && en.steps < en.limit) {
      blocked << en.name << " stopped at " << en.steps << "/" << en.limit << " waiting on";
      for (int b : en.inputs)
        if (!bufs[static_cast<std::size_t>(b)].ring.can_read())
          blocked << " input from " << ents[static_cast<std::size_t>(bufs[static_cast<std::size_t>(b)].writer)].name;
      for (int b : en.outputs)
        if (!bufs[static_cast<std::size_t>(b)].ring.can_write())
          blocked << " output to " << ents[static_cast<std::size_t>(bufs[static_cast<std::size_t>(b)].reader)].name;
      blocked << "; ";
    }
  if (!blocked.str().empty()) throw DeadlockError("simulation deadlocked before the horizon", blocked.str());

  // Steady-state window: from the last MatMul finishing its warmup to the last
  // MatMul finishing the horizon.
  double t0 = 0, t1 = 0;
  for (const auto& en : ents) {
    if (en.kind != detail::EntityKind::MatMul) continue;
    if (cfg.warmup_iterations > 0)
      t0 = std::max(t0, en.completions[static_cast<std::size_t>(cfg.warmup_iterations - 1)]);
    t1 = std::max(t1, en.completions.back());
  }
  res.window_start = t0;
  res.window_end = t1;
  const double span = t1 - t0;
  std::int64_t window_firings = 0;
  for (const auto& en : ents)
    if (en.kind == detail::EntityKind::MatMul)
      for (double c : en.completions) window_firings += (c > t0 && c <= t1);
  res.total_macs = res.matmul_firings * g.kernel.macs();
  if (span > 0) res.steady_state_throughput = static_cast<double>(window_firings * g.kernel.macs()) / span;

  for (const auto& en : ents) {
    const double f = span > 0 ? detail::clipped_busy(en.busy_intervals, t0, t1) / span : 0.0;
    switch (en.kind) {
      case detail::EntityKind::MatMul:
        res.per_node_busy_fraction[static_cast<std::size_t>(en.node)] = f;
        res.matmul_utilization = std::max(res.matmul_utilization, f);
        break;
      case detail::EntityKind::AdderTree:
        res.per_node_busy_fraction[static_cast<std::size_t>(en.node)] = f;
        res.adder_utilization = std::max(res.adder_utilization, f);
        break;
      case detail::EntityKind::InputStream:
        res.input_stream_busy_fraction.push_back(f);
        res.input_stream_utilization = std::max(res.input_stream_utilization, f);
        break;
      case detail::EntityKind::OutputStream:
        res.output_stream_busy_fraction.push_back(f);
        res.output_stream_utilization = std::max(res.output_stream_utilization, f);
        break;
    }
  }
  const std::pair<double, Bottleneck> classes[] = {{res.matmul_utilization, Bottleneck::MatMul},
                                                   {res.adder_utilization, Bottleneck::AdderTree},
                                                   {res.input_stream_utilization, Bottleneck::InputStream},
                                                   {res.output_stream_utilization, Bottleneck::OutputStream}};
  double best = -1;
  for (auto [u, b] : classes)
    if (u > best + 1e-12) {
      best = u;
      res.bottleneck = b;
    }
  return res;
}

// Aggregate ops/s (two ops per MAC).
inline double steady_state_throughput(const SimResult& r, const DataflowGraph& g, const Device& dev) {
  (void)g;
  return r.steady_state_throughput * 2.0 * dev.aie_clock_hz;
}

inline nlohmann::json sim_result_to_json(const SimResult& r, const DataflowGraph& g, const Device& dev) {
  return {{"steady_state_macs_per_cycle", r.steady_state_throughput},
          {"steady_state_ops_per_s", steady_state_throughput(r, g, dev)},
          {"bottleneck", to_string(r.bottleneck)},
          {"utilization",
           {{"matmul", r.matmul_utilization},
            {"adder_tree", r.adder_utilization},
            {"input_stream", r.input_stream_utilization},
            {"output_stream", r.output_stream_utilization}}},
          {"per_node_busy_fraction", r.per_node_busy_fraction},
          {"event_count", r.event_count},
          {"trace_hash", r.trace_hash},
          {"matmul_firings", r.matmul_firings},
          {"total_macs", r.total_macs},
          {"rw_overlaps", r.rw_overlaps},
          {"window", {r.window_start, r.window_end}},
          {"makespan", r.makespan}};
}

inline std::string trace_to_csv(const SimResult& r) {
  std::ostringstream os;
  os << "time,entity,event,step\n";
  os.precision(12);
  for (const auto& e : r.trace) os << e.time << ',' << e.entity << ',' << e.what << ',' << e.step << '\n';
  return os.str();
}

}  // namespace aiemap
