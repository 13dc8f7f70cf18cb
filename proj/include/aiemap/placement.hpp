#pragma once

// Places every kernel group of a dataflow graph onto the AIE grid with a
// library of polyomino group shapes, then homes every buffer in a memory
// module both endpoints reach directly. Buffers that cannot be homed that way
// become DMA edges.
//
// The tiler sweeps cells column-major. At the first free cell it tries each
// library shape anchored there (regular shapes before DMA-carrying ones), then
// leaves the cell empty if the hole budget allows. Failed states are memoized,
// which bounds the search by the number of distinct frontiers. T-like shapes
// are budgeted: budgets 0, 1, 2, ... are tried in turn so the result uses the
// fewest DMA buffers the library allows.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "aiemap/array_opt.hpp"
#include "aiemap/device.hpp"
#include "aiemap/error.hpp"
#include "aiemap/graph.hpp"

namespace aiemap {

// Offsets are (row, col) relative to the shape's first cell in column-major
// order, so every other cell is either below-right or in a later column.
struct GroupShape {
  std::string name;
  std::vector<TileCoord> cells;
  std::optional<int> adder;  // index into cells
  int dma_buffers = 0;       // MatMul outputs that cannot reach the adder directly

  int size() const { return static_cast<int>(cells.size()); }
};

struct PlacementPattern {
  std::string name;
  int target_y = 0;
  std::vector<GroupShape> shape_library;
};

namespace detail {

using Cells = std::vector<TileCoord>;

inline Cells normalize(Cells cs) {
  std::sort(cs.begin(), cs.end(), [](TileCoord a, TileCoord b) {
    return std::make_pair(a.col, a.row) < std::make_pair(b.col, b.row);
  });
  const TileCoord a = cs.front();
  for (auto& c : cs) c = {c.row - a.row, c.col - a.col};
  return cs;
}

inline std::pair<int, int> extent(const Cells& cs) {
  auto [rmin, rmax] = std::minmax_element(cs.begin(), cs.end(), [](auto a, auto b) { return a.row < b.row; });
  auto [cmin, cmax] = std::minmax_element(cs.begin(), cs.end(), [](auto a, auto b) { return a.col < b.col; });
  return {rmax->row - rmin->row + 1, cmax->col - cmin->col + 1};
}

// Distinct rotations and reflections, in a canonical order.
inline std::vector<Cells> orientations(const Cells& base) {
  std::set<Cells> seen;
  std::vector<Cells> out;
  for (int flip = 0; flip < 2; ++flip)
    for (int rot = 0; rot < 4; ++rot) {
      Cells cs = base;
      for (int i = 0; i < rot; ++i)
        for (auto& c : cs) c = {c.col, -c.row};
      if (flip)
        for (auto& c : cs) c.col = -c.col;
      cs = normalize(cs);
      if (seen.insert(cs).second) out.push_back(cs);
    }
  std::sort(out.begin(), out.end());
  return out;
}

inline bool is_adjacent(TileCoord a, TileCoord b) { return std::abs(a.row - b.row) + std::abs(a.col - b.col) == 1; }

}  // namespace detail

// P1 (Y=4): a 2x2 block with one extra cell stacked on a column (three tall,
// two wide), adder anywhere that reaches all four MatMuls. Fallback: a T with
// its bar along a row and the adder in the stem next to the bar; one bar end
// is diagonal to the adder on the wrong side and needs DMA.
inline PlacementPattern pattern_p1() {
  PlacementPattern p{"P1", 4, {}};
  const detail::Cells p_pent{{0, 0}, {1, 0}, {2, 0}, {0, 1}, {1, 1}};
  int o = 0;
  for (const auto& cs : detail::orientations(p_pent)) {
    if (detail::extent(cs).first != 3) continue;
    for (int a = 0; a < 5; ++a)
      p.shape_library.push_back({"P1.v" + std::to_string(o) + ".a" + std::to_string(a), cs, a, 0});
    ++o;
  }
  const detail::Cells t_pent{{0, 0}, {0, 1}, {0, 2}, {1, 1}, {2, 1}};
  o = 0;
  for (const auto& cs : detail::orientations(t_pent)) {
    if (detail::extent(cs).second != 3) continue;
    // adder: the stem cell touching the bar
    for (int a = 0; a < 5; ++a) {
      int bar_neighbors = 0;
      for (int b = 0; b < 5; ++b)
        if (b != a && cs[b].row != cs[a].row && detail::is_adjacent(cs[a], cs[b])) ++bar_neighbors;
      const bool in_bar = std::count_if(cs.begin(), cs.end(), [&](auto c) { return c.row == cs[a].row; }) == 3;
      if (!in_bar && bar_neighbors == 2)
        p.shape_library.push_back({"P1.t" + std::to_string(o) + ".a" + std::to_string(a), cs, a, 1});
    }
    ++o;
  }
  return p;
}

// P2 (Y=3): 2x2 blocks; the adder takes a corner whose diagonal partner shares
// a module on that row parity.
inline PlacementPattern pattern_p2() {
  PlacementPattern p{"P2", 3, {}};
  const detail::Cells sq = detail::normalize({{0, 0}, {1, 0}, {0, 1}, {1, 1}});
  for (int a = 0; a < 4; ++a) p.shape_library.push_back({"P2.sq.a" + std::to_string(a), sq, a, 0});
  return p;
}

// One MatMul per tile, no reduction (Y=1).
inline PlacementPattern pattern_single() { return {"single", 1, {{"single", {{0, 0}}, std::nullopt, 0}}}; }

inline PlacementPattern pattern_by_name(const std::string& name) {
  if (name == "P1") return pattern_p1();
  if (name == "P2") return pattern_p2();
  if (name == "single") return pattern_single();
  throw ConfigError("unknown placement pattern '" + name + "' (expected P1|P2|single)");
}

inline PlacementPattern pattern_for(PatternId id) { return id == PatternId::P1 ? pattern_p1() : pattern_p2(); }

// Number of MatMul cells of `shape` anchored at `anchor` that share no module
// with the adder cell; -1 if any cell is off the grid.
inline int shape_dma_count(const Device& dev, const GroupShape& shape, TileCoord anchor) {
  std::vector<TileCoord> abs;
  for (auto c : shape.cells) {
    TileCoord t{anchor.row + c.row, anchor.col + c.col};
    if (!dev.contains(t)) return -1;
    abs.push_back(t);
  }
  if (!shape.adder) return 0;
  int bad = 0;
  for (int i = 0; i < shape.size(); ++i)
    if (i != *shape.adder && !can_share(dev, abs[i], abs[*shape.adder])) ++bad;
  return bad;
}

struct PlacedGroup {
  int shape = 0;  // index into the pattern library
  TileCoord anchor;
};

struct BufferHome {
  TileCoord module;
  int banks = 0;
};

struct Placement {
  Device device;
  ArrayShape array;
  std::string pattern;
  std::string dtype;
  std::string kernel;
  std::vector<TileCoord> core_map;        // by node id
  std::vector<BufferHome> buffer_map;     // by edge id
  std::vector<bool> dma;                  // by edge id
  std::vector<int> ledger;                // banks used per tile, row-major
  std::vector<PlacedGroup> groups;        // by group index
  std::vector<std::string> group_shape_names;
  int t_shape_count = 0;

  std::vector<int> dma_edges() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < dma.size(); ++i)
      if (dma[i]) out.push_back(static_cast<int>(i));
    return out;
  }
  int utilized_cores() const { return static_cast<int>(core_map.size()); }
  int ledger_at(TileCoord t) const { return ledger[static_cast<std::size_t>(device.index(t))]; }
};

struct PlaceOptions {
  std::int64_t node_budget = 20'000'000;
  int max_t_shapes = -1;  // -1: as many as there are groups
};

namespace detail {

using Mask = unsigned __int128;

struct Instance {
  int shape;
  bool dma_shape;
  Mask mask;  // relative to the anchor's column-major index
};

struct StateKey {
  int cell;
  Mask occ;
  int holes;
  int t_left;
  friend bool operator==(const StateKey&, const StateKey&) = default;
};

struct StateHash {
  std::size_t operator()(const StateKey& k) const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
      h ^= v;
      h *= 1099511628211ull;
    };
    mix(static_cast<std::uint64_t>(k.cell));
    mix(static_cast<std::uint64_t>(k.occ));
    mix(static_cast<std::uint64_t>(k.occ >> 64));
    mix(static_cast<std::uint64_t>(k.holes));
    mix(static_cast<std::uint64_t>(k.t_left));
    return static_cast<std::size_t>(h);
  }
};

class Tiler {
 public:
  Tiler(const Device& dev, const PlacementPattern& pat, int groups, std::int64_t node_budget)
      : dev_(dev), pat_(pat), groups_(groups), budget_(node_budget) {
    const int n = dev.cores();
    instances_.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const TileCoord anchor = cell(i);
      std::vector<Mask> seen_regular, seen_dma;
      for (int s = 0; s < static_cast<int>(pat.shape_library.size()); ++s) {
        const auto& shape = pat.shape_library[static_cast<std::size_t>(s)];
        if (shape_dma_count(dev, shape, anchor) != shape.dma_buffers) continue;
        Mask m = 0;
        for (auto c : shape.cells) {
          const int rel = index({anchor.row + c.row, anchor.col + c.col}) - i;
          if (rel >= 128) throw DomainError("device too tall for the tiler window");
          m |= Mask{1} << rel;
        }
        auto& seen = shape.dma_buffers ? seen_dma : seen_regular;
        if (std::find(seen.begin(), seen.end(), m) != seen.end()) continue;
        seen.push_back(m);
        instances_[static_cast<std::size_t>(i)].push_back({s, shape.dma_buffers > 0, m});
      }
      // Regular shapes first, keeping library order within each class.
      std::stable_partition(instances_[static_cast<std::size_t>(i)].begin(),
                            instances_[static_cast<std::size_t>(i)].end(),
                            [](const Instance& x) { return !x.dma_shape; });
    }
  }

  // Returns the placed groups in sweep order, or nullopt when this T budget fails.
  std::optional<std::vector<PlacedGroup>> run(int t_budget) {
    const int shape_cells = pat_.shape_library.front().size();
    const int holes = dev_.cores() - groups_ * shape_cells;
    stack_.clear();
    if (holes < 0) return std::nullopt;
    if (go(0, 0, holes, t_budget)) return stack_;
    return std::nullopt;
  }

  std::int64_t nodes() const { return nodes_; }
  std::string diagnostics() const { return frontier(); }
  int deepest_cell() const { return deepest_cell_; }
  int deepest_groups() const { return deepest_groups_; }

 private:
  TileCoord cell(int i) const { return {i % dev_.rows, i / dev_.rows}; }
  int index(TileCoord t) const { return t.col * dev_.rows + t.row; }

  bool go(int i, Mask occ, int holes, int t_left) {
    const int n = dev_.cores();
    while (i < n && (occ & 1)) {
      occ >>= 1;
      ++i;
    }
    if (i == n) return holes == 0;
    if (i > deepest_cell_ || (i == deepest_cell_ && static_cast<int>(stack_.size()) > deepest_groups_)) {
      deepest_cell_ = i;
      deepest_groups_ = static_cast<int>(stack_.size());
    }
    const StateKey key{i, occ, holes, t_left};
    if (failed_.count(key)) return false;
    if (++nodes_ > budget_)
      throw InfeasibleError("placement infeasible: node budget exhausted", frontier());

    for (const auto& inst : instances_[static_cast<std::size_t>(i)]) {
      if (inst.dma_shape && t_left == 0) continue;
      if (occ & inst.mask) continue;
      stack_.push_back({inst.shape, cell(i)});
      if (go(i, occ | inst.mask, holes, t_left - (inst.dma_shape ? 1 : 0))) return true;
      stack_.pop_back();
    }
    if (holes > 0 && go(i + 1, occ >> 1, holes - 1, t_left)) return true;
    failed_.insert(key);
    return false;
  }

  std::string frontier() const {
    const TileCoord t = cell(std::min(deepest_cell_, dev_.cores() - 1));
    return "deepest frontier: cell (" + std::to_string(t.row) + "," + std::to_string(t.col) + ") with " +
           std::to_string(deepest_groups_) + "/" + std::to_string(groups_) + " groups placed after " +
           std::to_string(nodes_) + " nodes";
  }

  const Device& dev_;
  const PlacementPattern& pat_;
  int groups_;
  std::int64_t budget_;
  std::int64_t nodes_ = 0;
  int deepest_cell_ = 0;
  int deepest_groups_ = 0;
  std::vector<std::vector<Instance>> instances_;
  std::vector<PlacedGroup> stack_;
  std::unordered_set<StateKey, StateHash> failed_;
};

inline int banks_for(std::int64_t bytes, Buffering b, const Device& dev) {
  return static_cast<int>((bytes + dev.bank_bytes - 1) / dev.bank_bytes) * copies(b);
}

}  // namespace detail

// Homes every buffer of `g` given a fixed core map. Fills buffer_map, dma and
// ledger of `p`. Edges with the fewest candidate modules go first; each takes
// the home core's own tile when it fits, otherwise the candidate with the most
// free banks.
inline void assign_buffers(Placement& p, const DataflowGraph& g, const Device& dev) {
  const auto ncores = static_cast<std::size_t>(dev.cores());
  p.ledger.assign(ncores, 0);
  std::vector<bool> hosts_core(ncores, false);
  for (auto t : p.core_map) {
    require_in_grid(dev, t);
    hosts_core[static_cast<std::size_t>(dev.index(t))] = true;
    p.ledger[static_cast<std::size_t>(dev.index(t))] += dev.reserved_banks_per_core;
  }
  p.buffer_map.assign(g.edges.size(), {});
  p.dma.assign(g.edges.size(), false);

  struct Job {
    int edge;
    TileCoord home;
    std::vector<TileCoord> candidates;
  };
  std::vector<Job> jobs;
  jobs.reserve(g.edges.size());
  for (const auto& e : g.edges) {
    Job j{e.id, {}, {}};
    if (e.producer.is_node() && e.consumer.is_node() && e.producer.index != e.consumer.index) {
      const TileCoord pt = p.core_map.at(static_cast<std::size_t>(e.producer.index));
      const TileCoord ct = p.core_map.at(static_cast<std::size_t>(e.consumer.index));
      j.candidates = shared_modules(dev, pt, ct);
      j.home = pt;
      if (j.candidates.empty()) {
        p.dma[static_cast<std::size_t>(e.id)] = true;
        j.candidates = accessible_modules(dev, ct);
        j.home = ct;
      }
    } else {
      const int owner = e.consumer.is_node() ? e.consumer.index : e.producer.index;
      j.home = p.core_map.at(static_cast<std::size_t>(owner));
      j.candidates = accessible_modules(dev, j.home);
    }
    jobs.push_back(std::move(j));
  }
  std::stable_sort(jobs.begin(), jobs.end(),
                   [](const Job& a, const Job& b) { return a.candidates.size() < b.candidates.size(); });

  auto free_banks = [&](TileCoord t) { return dev.banks_per_tile - p.ledger[static_cast<std::size_t>(dev.index(t))]; };
  for (const auto& j : jobs) {
    const auto& e = g.edges[static_cast<std::size_t>(j.edge)];
    const int need = detail::banks_for(e.bytes, e.buffering, dev);
    std::optional<TileCoord> pick;
    if (std::find(j.candidates.begin(), j.candidates.end(), j.home) != j.candidates.end() &&
        free_banks(j.home) >= need) {
      pick = j.home;
    } else {
      for (auto c : j.candidates)
        if (free_banks(c) >= need && (!pick || free_banks(c) > free_banks(*pick))) pick = c;
    }
    if (!pick) {
      std::ostringstream os;
      os << "bank overflow: edge " << e.id << " (" << e.producer.str() << " -> " << e.consumer.str() << ", " << need
         << " banks) fits none of";
      for (auto c : j.candidates) os << " (" << c.row << "," << c.col << "):" << free_banks(c) << " free";
      throw InfeasibleError("placement infeasible: bank overflow", os.str());
    }
    p.buffer_map[static_cast<std::size_t>(e.id)] = {*pick, need};
    p.ledger[static_cast<std::size_t>(dev.index(*pick))] += need;
  }
}

inline Placement place(const DataflowGraph& g, const ArrayShape& array, const PlacementPattern& pattern,
                       const Device& dev, const PlaceOptions& opt = {}) {
  if (pattern.target_y != array.y)
    throw DomainError("pattern " + pattern.name + " targets Y=" + std::to_string(pattern.target_y) + ", design has Y=" +
                      std::to_string(array.y));
  if (pattern.shape_library.empty()) throw DomainError("pattern " + pattern.name + " has no shapes");
  if (!(g.array == array)) throw DomainError("graph was built for a different array shape");
  const int groups = array.groups();
  const int cells = pattern.shape_library.front().size();
  if (groups * cells > dev.cores())
    throw InfeasibleError("placement infeasible: " + std::to_string(groups * cells) + " cores needed, " +
                          std::to_string(dev.cores()) + " available");

  detail::Tiler tiler(dev, pattern, groups, opt.node_budget);
  const int max_t = opt.max_t_shapes < 0 ? groups : opt.max_t_shapes;
  const bool has_dma_shapes = std::any_of(pattern.shape_library.begin(), pattern.shape_library.end(),
                                          [](const GroupShape& s) { return s.dma_buffers > 0; });
  std::optional<std::vector<PlacedGroup>> tiling;
  for (int t = 0; t <= (has_dma_shapes ? max_t : 0) && !tiling; ++t) tiling = tiler.run(t);
  if (!tiling) throw InfeasibleError("placement infeasible: no legal tiling", tiler.diagnostics());

  Placement p;
  p.device = dev;
  p.array = array;
  p.pattern = pattern.name;
  p.dtype = std::string(g.dtype.name());
  p.kernel = g.kernel.str();
  p.groups = *tiling;
  p.core_map.assign(g.nodes.size(), {});
  for (int gi = 0; gi < groups; ++gi) {
    const auto& pg = p.groups[static_cast<std::size_t>(gi)];
    const auto& shape = pattern.shape_library[static_cast<std::size_t>(pg.shape)];
    p.group_shape_names.push_back(shape.name);
    if (shape.dma_buffers > 0) ++p.t_shape_count;
    const int first = g.first_node_of_group(gi);
    int mm = 0;
    for (int c = 0; c < shape.size(); ++c) {
      const TileCoord t{pg.anchor.row + shape.cells[static_cast<std::size_t>(c)].row,
                        pg.anchor.col + shape.cells[static_cast<std::size_t>(c)].col};
      const int node = (shape.adder && c == *shape.adder) ? first + array.y : first + mm++;
      p.core_map[static_cast<std::size_t>(node)] = t;
    }
  }
  assign_buffers(p, g, dev);
  return p;
}

struct BankAccount {
  int total_banks = 0;     // buffers plus reserved system banks
  int buffer_banks = 0;
  int reserved_banks = 0;
  int dma_banks = 0;
  std::vector<int> per_tile;  // row-major
  double total_pct = 0;
};

inline BankAccount bank_accounting(const Placement& p, const DataflowGraph& g, const Device& dev) {
  BankAccount b;
  b.per_tile.assign(static_cast<std::size_t>(dev.cores()), 0);
  for (auto t : p.core_map) {
    b.per_tile[static_cast<std::size_t>(dev.index(t))] += dev.reserved_banks_per_core;
    b.reserved_banks += dev.reserved_banks_per_core;
  }
  for (const auto& e : g.edges) {
    const auto& home = p.buffer_map[static_cast<std::size_t>(e.id)];
    const int banks = detail::banks_for(e.bytes, e.buffering, dev);
    b.per_tile[static_cast<std::size_t>(dev.index(home.module))] += banks;
    b.buffer_banks += banks;
    if (p.dma[static_cast<std::size_t>(e.id)]) b.dma_banks += banks;
  }
  b.total_banks = b.buffer_banks + b.reserved_banks;
  b.total_pct = percent_tenths(b.total_banks, dev.total_banks());
  return b;
}

struct CongestionVerdict {
  bool feasible = true;
  std::string reason;
};

// A full array leaves the router no spare tiles, so any DMA route on top of it
// is treated as unroutable.
inline CongestionVerdict congestion_check(const Placement& p, const Device& dev) {
  int dma_banks = 0;
  for (std::size_t i = 0; i < p.dma.size(); ++i)
    if (p.dma[i]) dma_banks += p.buffer_map[i].banks;
  if (p.utilized_cores() >= dev.cores() && dma_banks > 0)
    return {false, "routing congestion: all " + std::to_string(dev.cores()) + " cores utilized with " +
                       std::to_string(dma_banks) + " DMA banks"};
  return {};
}

// ---------------------------------------------------------------------------
// Export

inline nlohmann::json placement_to_json(const Placement& p, const DataflowGraph& g) {
  nlohmann::json cores = nlohmann::json::array();
  for (const auto& n : g.nodes)
    cores.push_back({{"node", n.id},
                     {"kind", to_string(n.kind)},
                     {"group", {n.gx, n.gz}},
                     {"position", n.position},
                     {"tile", p.core_map[static_cast<std::size_t>(n.id)]}});
  nlohmann::json buffers = nlohmann::json::array();
  for (const auto& e : g.edges) {
    const auto& h = p.buffer_map[static_cast<std::size_t>(e.id)];
    buffers.push_back({{"edge", e.id},
                       {"producer", e.producer.str()},
                       {"consumer", e.consumer.str()},
                       {"role", to_string(e.role)},
                       {"bytes", e.bytes},
                       {"buffering", e.buffering == Buffering::Double ? "double" : "single"},
                       {"tile", h.module},
                       {"banks", h.banks},
                       {"dma", static_cast<bool>(p.dma[static_cast<std::size_t>(e.id)])}});
  }
  nlohmann::json ledger = nlohmann::json::array();
  for (int r = 0; r < p.device.rows; ++r) {
    std::vector<int> row(p.ledger.begin() + r * p.device.cols, p.ledger.begin() + (r + 1) * p.device.cols);
    ledger.push_back(row);
  }
  nlohmann::json groups = nlohmann::json::array();
  for (std::size_t i = 0; i < p.groups.size(); ++i)
    groups.push_back({{"group", i}, {"shape", p.group_shape_names[i]}, {"anchor", p.groups[i].anchor}});
  return {{"format", "aiemap-placement/1"},
          {"device", p.device.name},
          {"rows", p.device.rows},
          {"cols", p.device.cols},
          {"array", p.array.str()},
          {"pattern", p.pattern},
          {"dtype", p.dtype},
          {"kernel", p.kernel},
          {"t_shape_count", p.t_shape_count},
          {"dma_edges", p.dma_edges()},
          {"groups", groups},
          {"cores", cores},
          {"buffers", buffers},
          {"ledger", ledger}};
}

}  // namespace aiemap
