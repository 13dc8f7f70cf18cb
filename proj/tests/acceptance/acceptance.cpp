// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "aiemap/aiemap.hpp"

using namespace aiemap;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kRuntimeLimitS = 1.0;
constexpr int kResourceTolerance = 0;           // exact match for closed-form columns
constexpr int kP1DmaLimit13x4x6 = 18;
constexpr int kP1DmaLimit11x4x7 = 18;
constexpr int kP1DmaLimit12x4x6 = 16;
constexpr double kGapLow = 0.78;
constexpr double kGapHigh = 1.00;
constexpr double kKernelBoundFp32Tflops = 5.904;
constexpr double kKernelBoundInt8Tops = 95.1;
constexpr double kKernelBoundAbsTol = 0.0005;    // on the published 3-4 significant digits
constexpr double kSimVsBoundRel = 0.02;
constexpr double kPad1024 = 0.7293;
constexpr double kPad1024Tol = 1e-4;
constexpr double kPad4096Min = 0.95;
constexpr double kPowerRel = 0.05;
constexpr double kEfficiencyRel = 0.06;
constexpr int kRandomGraphs = 1000;
constexpr int kBankLimit = 8;
constexpr double kSuiteLimitS = 300.0;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

int run_cli(const std::string& args, std::string* out) {
  const auto path = fs::temp_directory_path() / ("aiemap_acceptance_" + std::to_string(::getpid()) + ".txt");
  const std::string cmd = std::string(AIEMAP_CLI_PATH) + " " + args + " >" + path.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  *out = ss.str();
  fs::remove(path);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::set<KernelShape> brute_force_kernels(const DataTypeSpec& dt, double eff, const Device& dev) {
  std::set<KernelShape> top;
  std::int64_t best = 0;
  for (std::int64_t m = 8; m <= 1024; m *= 2)
    for (std::int64_t k = 8; k <= 1024; k *= 2)
      for (std::int64_t n = 8; n <= 1024; n *= 2) {
        const double compute = static_cast<double>(m * k * n) / (eff * dt.peak_macs);
        if (compute < static_cast<double>(m * k * dt.input_bytes) / dev.bw_io) continue;
        if (compute < static_cast<double>(k * n * dt.input_bytes) / dev.bw_io) continue;
        if (compute < static_cast<double>(m * n * dt.output_bytes) / dev.bw_io) continue;
        if (2 * ((m * k + k * n) * dt.input_bytes + m * n * dt.output_bytes) >
            (dev.banks_per_tile - 1) * dev.bank_bytes)
          continue;
        const std::int64_t macs = m * k * n;
        if (macs > best) {
          best = macs;
          top.clear();
        }
        if (macs == best) top.insert({m, k, n});
      }
  return top;
}

struct PlacedDesign {
  DataflowGraph graph;
  Placement placement;
};

PlacedDesign place_config(const std::string& cfg, const DataTypeSpec& dt = kFp32) {
  const auto a = parse_array_shape(cfg);
  const KernelShape k = dt.type == DataType::fp32 ? KernelShape{32, 32, 32} : KernelShape{32, 128, 32};
  auto g = build_graph(a, k, dt, table1_profiles());
  auto p = place(g, a, pattern_for(patterns_for_y(a.y).front()), vc1902());
  return {std::move(g), std::move(p)};
}

void c1(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string out;
  const int code = run_cli("optimize-kernel --dtype int8 --eff-lb 0.95", &out);
  const double dt = seconds_since(t0);
  o.require(code == 0, "exit code 0");
  o.require(out == "m,k,n,macs,footprint_bytes\n32,128,32,131072,12288\n", "single row 32x128x32");
  o.require(dt < kRuntimeLimitS, "runtime < 1 s");
  const auto lib = optimize_kernel(kInt8, 0.95, vc1902());
  o.require(lib.size() == 1 && lib.front() == KernelShape{32, 128, 32}, "library returns {32x128x32}");
  o.detail << "cli " << std::fixed << std::setprecision(3) << dt << " s";
}

void c2(Outcome& o) {
  const auto ks = optimize_kernel(kFp32, 0.95, vc1902());
  const std::set<KernelShape> got(ks.begin(), ks.end());
  o.require(!ks.empty() && ks.front().macs() == 32768, "top MACs 32768");
  for (const KernelShape s : {KernelShape{32, 32, 32}, KernelShape{16, 64, 32}, KernelShape{64, 16, 32}})
    o.require(got.count(s) == 1, "contains " + s.str());
  o.require(got == brute_force_kernels(kFp32, 0.95, vc1902()), "brute-force set identical");
  o.detail << got.size() << " shapes";
}

void c3(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cands = optimize_array(vc1902());
  const double dt = seconds_since(t0);
  o.require(cands.size() >= 2, "at least two candidates");
  if (cands.size() >= 2) {
    o.require(cands[0].shape.str() == "10x4x8" && cands[0].shape.matmul_kernels() == 320, "rank 1 = 10x4x8 (320)");
    o.require(cands[1].shape.str() == "13x4x6" && cands[1].shape.matmul_kernels() == 312, "rank 2 = 13x4x6 (312)");
  }
  o.require(dt < kRuntimeLimitS, "runtime < 1 s");
  o.detail << std::fixed << std::setprecision(4) << dt << " s";
}

void c4(Outcome& o) {
  struct Row {
    const char* cfg;
    int cores;
    double core_pct;
    int plios;
    double plio_pct;
    int mm;
  };
  const Row rows[] = {{"13x4x6", 390, 97.5, 154, 79.0, 312}, {"10x3x10", 400, 100.0, 160, 82.1, 300},
                      {"11x4x7", 385, 96.3, 149, 76.4, 308}, {"11x3x9", 396, 99.0, 159, 81.5, 297},
                      {"12x4x6", 360, 90.0, 144, 73.8, 288}, {"12x3x8", 384, 96.0, 156, 80.0, 288}};
  for (const auto& r : rows) {
    const auto rc = resource_counts(parse_array_shape(r.cfg), vc1902());
    o.require(std::abs(rc.cores - r.cores) <= kResourceTolerance && rc.core_pct == r.core_pct &&
                  std::abs(rc.plio_used - r.plios) <= kResourceTolerance && rc.plio_pct == r.plio_pct &&
                  std::abs(rc.matmul_kernels - r.mm) <= kResourceTolerance,
              r.cfg);
  }
  o.detail << "6 configurations";
}

void c5(Outcome& o) {
  for (const auto& cfg : {"10x3x10", "11x3x9", "12x3x8"}) {
    const auto d = place_config(cfg);
    const auto b = bank_accounting(d.placement, d.graph, vc1902());
    const auto v = verify_placement(placement_to_json(d.placement, d.graph), vc1902());
    o.require(b.dma_banks == 0, std::string(cfg) + " DMA banks 0");
    o.require(v.ok(), std::string(cfg) + " verifier");
    if (std::string(cfg) == "10x3x10") o.require(d.placement.utilized_cores() == 400, "10x3x10 uses 400 cores");
    o.detail << cfg << " dma " << b.dma_banks << "; ";
  }
}

void c6(Outcome& o) {
  const std::pair<const char*, int> limits[] = {
      {"13x4x6", kP1DmaLimit13x4x6}, {"11x4x7", kP1DmaLimit11x4x7}, {"12x4x6", kP1DmaLimit12x4x6}};
  for (auto [cfg, limit] : limits) {
    const auto d = place_config(cfg);
    const auto b = bank_accounting(d.placement, d.graph, vc1902());
    o.require(verify_placement(placement_to_json(d.placement, d.graph), vc1902()).ok(), std::string(cfg) + " legal");
    o.require(b.dma_banks <= limit, std::string(cfg) + " DMA banks within limit");
    o.require(b.dma_banks == 2 * d.placement.t_shape_count, std::string(cfg) + " DMA = 2 x T");
    o.detail << cfg << " dma " << b.dma_banks << " T " << d.placement.t_shape_count << "; ";
  }
  const auto r = place_config("10x4x8");
  const auto rb = bank_accounting(r.placement, r.graph, vc1902());
  o.require(rb.dma_banks == 2 * r.placement.t_shape_count, "10x4x8 DMA = 2 x T");
  o.require(!congestion_check(r.placement, vc1902()).feasible, "10x4x8 rejected");
  o.require(congestion_check(place_config("10x3x10").placement, vc1902()).feasible, "10x3x10 accepted");
  o.detail << "10x4x8 T " << r.placement.t_shape_count << " rejected";
}

void c7(Outcome& o) {
  const auto ps = table1_profiles();
  for (const auto& dt : {kInt8, kFp32}) {
    const KernelShape k = dt.type == DataType::fp32 ? KernelShape{32, 32, 32} : KernelShape{32, 128, 32};
    const double mm = ps.require_matmul(dt, k).latency_cycles;
    const double add = ps.require_add(dt, 32, 32).latency_cycles;
    for (int y = 2; y <= 4; ++y)
      o.require(adder_tree_latency(y, add) < mm, std::string(dt.name()) + " Y=" + std::to_string(y) + " chain");
    const auto g = build_graph({1, 4, 1}, k, dt, ps);
    const auto r = simulate(g, ps, {}, vc1902());
    o.require(r.adder_utilization < r.matmul_utilization, std::string(dt.name()) + " simulated busy fractions");
    o.detail << std::fixed << std::setprecision(0) << dt.name() << " " << adder_tree_latency(4, add) << "<" << mm
             << " busy " << std::setprecision(3)
             << r.adder_utilization << "<" << r.matmul_utilization << "; ";
  }
}

void c8(Outcome& o) {
  const auto dev = vc1902();
  const auto ps = table1_profiles();
  const auto f = peak_throughput(312, dev, ps.require_matmul(kFp32, {32, 32, 32}));
  const auto i = peak_throughput(312, dev, ps.require_matmul(kInt8, {32, 128, 32}));
  o.require(std::abs(f.kernel_bound / 1e12 - kKernelBoundFp32Tflops) <= kKernelBoundAbsTol, "fp32 5.904 TFLOPs");
  o.require(std::abs(i.kernel_bound / 1e12 - kKernelBoundInt8Tops) <= 100 * kKernelBoundAbsTol, "int8 95.1 TOPs");
  const double gf = find_calibration(calibration_preset(kFp32), "13x4x6")->reported_throughput / f.kernel_bound;
  const double gi = find_calibration(calibration_preset(kInt8), "13x4x6")->reported_throughput / i.kernel_bound;
  o.require(gf >= kGapLow && gf <= kGapHigh, "fp32 gap in range");
  o.require(gi >= kGapLow && gi <= kGapHigh, "int8 gap in range");
  SimConfig c;
  c.horizon = 8;
  for (const auto& dt : {kFp32, kInt8}) {
    const KernelShape k = dt.type == DataType::fp32 ? KernelShape{32, 32, 32} : KernelShape{32, 128, 32};
    const auto g = build_graph({13, 4, 6}, k, dt, ps);
    const auto r = simulate(g, ps, c, dev);
    const double bound = (dt.type == DataType::fp32 ? f : i).kernel_bound;
    const bool saturated = r.input_stream_utilization >= 1.0 - 1e-9 || r.output_stream_utilization >= 1.0 - 1e-9;
    o.require(!saturated, std::string(dt.name()) + " streams unsaturated");
    o.require(rel(steady_state_throughput(r, g, dev), bound) <= kSimVsBoundRel,
              std::string(dt.name()) + " simulated within 2% of bound");
    o.detail << dt.name() << " sim/bound " << std::setprecision(4) << steady_state_throughput(r, g, dev) / bound
             << "; ";
  }
  o.detail << "gaps " << std::setprecision(4) << gf << " " << gi;
}

void c9(Outcome& o) {
  const auto native = native_size({13, 4, 6}, {32, 32, 32});
  o.require(padding_factor(native, {native.m, native.k, native.n}) == 1.0, "factor 1 at native");
  o.require(padding_factor(native, {3 * native.m, 5 * native.k, 2 * native.n}) == 1.0, "factor 1 at multiples");
  const double hand = (1024.0 / 1248.0) * (1024.0 / 1024.0) * (1024.0 / 1152.0);
  const double f1024 = padding_factor(native, {1024, 1024, 1024});
  o.require(std::abs(f1024 - hand) <= 1e-12, "1024 matches hand computation");
  o.require(std::abs(f1024 - kPad1024) <= kPad1024Tol, "1024 within 1e-4 of 0.7293");
  const double f4096 = padding_factor(native, {4096, 4096, 4096});
  o.require(f4096 >= kPad4096Min, "4096 >= 0.95");
  o.detail << std::setprecision(5) << "1024: " << f1024 << " 4096: " << f4096;
}

void c10(Outcome& o) {
  for (const auto& dt : {kFp32, kInt8}) {
    const auto m = fit_power_model(calibration_preset(dt), std::string(dt.name()));
    o.require(m.max_relative_residual() <= kPowerRel, std::string(dt.name()) + " rows within 5%");
    o.detail << dt.name() << " max residual " << std::setprecision(3) << 100 * m.max_relative_residual() << "%; ";
  }
  const auto m = fit_power_model(calibration_preset(kFp32));
  const auto row = *find_calibration(calibration_preset(kFp32), "13x4x6");
  const double total = m.predict(row.n_matmul, row.n_adder, row.banks).total();
  const double eff = row.reported_throughput / 1e9 / total;
  o.require(rel(total, 43.83) <= kPowerRel, "13x4x6 total 43.83 W");
  o.require(rel(eff, 124.16) <= kEfficiencyRel, "124.16 GFLOPs/W");
  o.detail << "13x4x6 " << std::setprecision(4) << total << " W, " << eff << " GFLOPs/W";
}

void c11(Outcome& o) {
  // Determinism.
  for (const auto& cfg : {"13x4x6", "10x3x10", "10x4x8"}) {
    const auto a = place_config(cfg), b = place_config(cfg);
    o.require(placement_to_json(a.placement, a.graph).dump() == placement_to_json(b.placement, b.graph).dump(),
              std::string(cfg) + " byte-identical");
  }
  // Legality and bank ledger on randomized small graphs.
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> rows(2, 8), cols(2, 14), pick(0, 2), coin(0, 1);
  int placed = 0, bad_edges = 0, over = 0;
  for (int it = 0; it < kRandomGraphs; ++it) {
    Device dev = vc1902();
    dev.rows = rows(rng);
    dev.cols = cols(rng);
    dev.interface_columns.clear();
    const auto pattern = std::vector<PlacementPattern>{pattern_single(), pattern_p2(), pattern_p1()}[pick(rng)];
    const int cells = pattern.shape_library.front().size();
    const int groups = std::uniform_int_distribution<int>(1, std::max(1, dev.cores() / cells))(rng);
    const ArrayShape a{groups, pattern.target_y, 1};
    const auto dt = coin(rng) ? kInt8 : kFp32;
    const KernelShape k = dt.type == DataType::fp32 ? KernelShape{32, 32, 32} : KernelShape{32, 128, 32};
    const auto g = build_graph(a, k, dt, table1_profiles());
    Placement p;
    try {
      p = place(g, a, pattern, dev);
    } catch (const InfeasibleError&) {
      continue;
    }
    ++placed;
    for (const auto& e : g.edges) {
      if (!e.producer.is_node() || !e.consumer.is_node() || e.producer.index == e.consumer.index) continue;
      if (p.dma[static_cast<std::size_t>(e.id)]) continue;
      const auto home = p.buffer_map[static_cast<std::size_t>(e.id)].module;
      const auto pt = p.core_map[static_cast<std::size_t>(e.producer.index)];
      const auto ct = p.core_map[static_cast<std::size_t>(e.consumer.index)];
      bad_edges += !(module_accessible(dev, pt, home) && module_accessible(dev, ct, home));
    }
    for (int v : p.ledger) over += v > kBankLimit;
    if (!verify_placement(placement_to_json(p, g), dev).ok()) ++bad_edges;
  }
  o.require(bad_edges == 0, "every non-DMA edge shares an accessible module");
  o.require(over == 0, "ledger <= 8 banks per tile");
  o.require(placed > kRandomGraphs / 2, "most random designs place");
  // Simulator work conservation and double-buffer exclusivity.
  std::int64_t overlaps = 0, lost = 0;
  for (int it = 0; it < 100; ++it) {
    const ArrayShape a{1 + it % 3, 1 + it % 4, 1 + (it / 3) % 3};
    const auto g = build_graph(a, {32, 32, 32}, kFp32, table1_profiles());
    SimConfig c;
    c.horizon = 6 + it % 5;
    c.stream_bw = 1 + it % 6;
    const auto r = simulate(g, table1_profiles(), c, vc1902());
    overlaps += r.rw_overlaps;
    lost += std::abs(r.total_macs - static_cast<std::int64_t>(g.matmul_count()) * c.horizon * 32768);
  }
  o.require(overlaps == 0, "no read/write overlap");
  o.require(lost == 0, "work conservation");
  o.detail << placed << "/" << kRandomGraphs << " random designs placed";
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"kernel optimum int8", c1},        {"kernel optimum fp32", c2},     {"array ranking", c3},
      {"resource columns", c4},           {"P2 placements", c5},           {"P1 placements and congestion", c6},
      {"adder tree is not a bottleneck", c7}, {"throughput bounds", c8},  {"padding model", c9},
      {"power surrogate", c10},           {"property suites", c11}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << ": " << criteria[i].first << " -- "
              << o.detail.str() << std::endl;
  }
  const double total = seconds_since(t0);
  std::cout << "acceptance runtime " << std::fixed << std::setprecision(2) << total << " s (limit " << kSuiteLimitS
            << " s)" << std::endl;
  if (total >= kSuiteLimitS) ++failed;
  return failed == 0 ? 0 : 1;
}
