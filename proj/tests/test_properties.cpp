#include <catch_amalgamated.hpp>

#include <random>

#include "aiemap/placement.hpp"
#include "aiemap/sim.hpp"
#include "aiemap/verify.hpp"

using namespace aiemap;

namespace {

// Access sets re-derived from the neighbor rule.
std::vector<TileCoord> access(const Device& d, TileCoord c) {
  std::vector<TileCoord> out;
  const TileCoord cand[] = {c, {c.row + 1, c.col}, {c.row - 1, c.col}, {c.row, c.col + (c.row % 2 ? 1 : -1)}};
  for (auto t : cand)
    if (t.row >= 0 && t.row < d.rows && t.col >= 0 && t.col < d.cols) out.push_back(t);
  return out;
}

bool contains(const std::vector<TileCoord>& v, TileCoord t) { return std::find(v.begin(), v.end(), t) != v.end(); }

struct Case {
  Device dev;
  ArrayShape array;
  DataTypeSpec dt;
  PlacementPattern pattern;
};

Case random_case(std::mt19937& rng) {
  std::uniform_int_distribution<int> rows(2, 8), cols(2, 14), pick(0, 2), dtp(0, 1);
  Case c;
  c.dev = vc1902();
  c.dev.name = "random";
  c.dev.rows = rows(rng);
  c.dev.cols = cols(rng);
  c.dev.interface_columns.clear();
  c.dt = dtp(rng) ? kInt8 : kFp32;
  const int kind = pick(rng);
  c.pattern = kind == 0 ? pattern_single() : kind == 1 ? pattern_p2() : pattern_p1();
  const int y = c.pattern.target_y;
  const int cells = c.pattern.shape_library.front().size();
  const int max_groups = std::max(1, c.dev.cores() / cells);
  std::uniform_int_distribution<int> groups(1, max_groups);
  const int gsz = groups(rng);
  // Split the group count into x * z.
  int x = gsz, z = 1;
  for (int f = 2; f * f <= gsz; ++f)
    if (gsz % f == 0 && std::uniform_int_distribution<int>(0, 1)(rng)) {
      x = gsz / f;
      z = f;
    }
  c.array = {x, y, z};
  return c;
}

}  // namespace

TEST_CASE("legality oracle on randomized small designs", "[property]") {
  std::mt19937 rng(20240607);
  int placed = 0, infeasible = 0;
  for (int iter = 0; iter < 1000; ++iter) {
    const auto c = random_case(rng);
    const KernelShape k = c.dt.type == DataType::fp32 ? KernelShape{32, 32, 32} : KernelShape{32, 128, 32};
    const auto g = build_graph(c.array, k, c.dt, table1_profiles());
    Placement p;
    try {
      p = place(g, c.array, c.pattern, c.dev);
    } catch (const InfeasibleError&) {
      ++infeasible;
      continue;
    }
    ++placed;
    INFO("iteration " << iter << " " << c.dev.rows << "x" << c.dev.cols << " " << c.array.str() << " "
                      << c.pattern.name);
    for (const auto& e : g.edges) {
      const auto home = p.buffer_map[static_cast<std::size_t>(e.id)].module;
      const bool dma = p.dma[static_cast<std::size_t>(e.id)];
      if (e.producer.is_node() && e.consumer.is_node() && e.producer.index != e.consumer.index) {
        const auto pa = access(c.dev, p.core_map[static_cast<std::size_t>(e.producer.index)]);
        const auto ca = access(c.dev, p.core_map[static_cast<std::size_t>(e.consumer.index)]);
        if (dma) {
          REQUIRE(contains(ca, home));
          bool common = false;
          for (auto t : pa) common = common || contains(ca, t);
          REQUIRE_FALSE(common);
        } else {
          REQUIRE(contains(pa, home));
          REQUIRE(contains(ca, home));
        }
      } else {
        const int owner = e.consumer.is_node() ? e.consumer.index : e.producer.index;
        REQUIRE_FALSE(dma);
        REQUIRE(contains(access(c.dev, p.core_map[static_cast<std::size_t>(owner)]), home));
      }
    }
    std::vector<int> banks(static_cast<std::size_t>(c.dev.cores()), 0);
    for (auto t : p.core_map) banks[static_cast<std::size_t>(c.dev.index(t))] += 1;
    for (const auto& e : g.edges)
      banks[static_cast<std::size_t>(c.dev.index(p.buffer_map[static_cast<std::size_t>(e.id)].module))] +=
          p.buffer_map[static_cast<std::size_t>(e.id)].banks;
    REQUIRE(banks == p.ledger);
    for (int b : banks) REQUIRE(b <= 8);
    REQUIRE(verify_placement(placement_to_json(p, g), c.dev).ok());
    if (c.pattern.name == "P1") REQUIRE(bank_accounting(p, g, c.dev).dma_banks == 2 * p.t_shape_count);
  }
  CHECK(placed + infeasible == 1000);
  CHECK(placed >= 500);
}

TEST_CASE("placement determinism on randomized designs", "[property]") {
  std::mt19937 rng(7);
  for (int iter = 0; iter < 100; ++iter) {
    const auto c = random_case(rng);
    const auto g = build_graph(c.array, {32, 32, 32}, kFp32, table1_profiles());
    std::string first;
    for (int rep = 0; rep < 2; ++rep) {
      std::string out;
      try {
        out = placement_to_json(place(g, c.array, c.pattern, c.dev), g).dump();
      } catch (const InfeasibleError& e) {
        out = std::string("infeasible ") + e.what() + " " + e.diagnostics();
      }
      if (rep == 0)
        first = out;
      else
        REQUIRE(out == first);
    }
  }
}

TEST_CASE("simulator invariants on randomized designs", "[property]") {
  std::mt19937 rng(99);
  std::uniform_int_distribution<int> dim(1, 4), ydist(1, 4), horizon(5, 12), bw(1, 8), dtp(0, 1);
  for (int iter = 0; iter < 200; ++iter) {
    const ArrayShape a{dim(rng), ydist(rng), dim(rng)};
    const auto dt = dtp(rng) ? kInt8 : kFp32;
    const KernelShape k = dt.type == DataType::fp32 ? KernelShape{32, 32, 32} : KernelShape{32, 128, 32};
    const auto g = build_graph(a, k, dt, table1_profiles());
    SimConfig c;
    c.horizon = horizon(rng);
    c.warmup_iterations = 1;
    c.stream_bw = bw(rng);
    std::vector<int> dma;
    for (const auto& e : g.edges)
      if (e.role == EdgeRole::Partial && (e.id % 3 == 0)) dma.push_back(e.id);
    const auto r = simulate(g, table1_profiles(), c, vc1902(), dma);
    INFO(a.str() << " " << dt.name() << " bw " << c.stream_bw);
    REQUIRE(r.rw_overlaps == 0);
    REQUIRE(r.matmul_firings == static_cast<std::int64_t>(g.matmul_count()) * c.horizon);
    REQUIRE(r.total_macs == r.matmul_firings * k.macs());
    const auto prof = table1_profiles().require_matmul(dt, k);
    // Never above the analytical kernel bound.
    REQUIRE(r.steady_state_throughput <= g.matmul_count() * prof.macs_per_cycle() * (1 + 1e-9));
    for (double f : r.per_node_busy_fraction) REQUIRE((f >= 0.0 && f <= 1.0 + 1e-12));
    const auto again = simulate(g, table1_profiles(), c, vc1902(), dma);
    REQUIRE(again.trace_hash == r.trace_hash);
  }
}
