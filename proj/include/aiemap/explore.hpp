#pragma once

// End-to-end exploration: kernel selection, array ranking, placement,
// congestion screening, simulation and report rows for the top candidates.

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "aiemap/array_opt.hpp"
#include "aiemap/device.hpp"
#include "aiemap/error.hpp"
#include "aiemap/graph.hpp"
#include "aiemap/kernel_opt.hpp"
#include "aiemap/perf.hpp"
#include "aiemap/placement.hpp"
#include "aiemap/sim.hpp"

namespace aiemap {

struct ExploreOptions {
  DataTypeSpec dtype = kFp32;
  double eff_lb = 0.95;
  std::set<int> y_allowed{3, 4};
  std::string pattern = "auto";  // auto | P1 | P2
  int top_k = 10;
  bool simulate = true;
  SimConfig sim{};
  PlaceOptions place{};
};

struct ExploreEntry {
  ArrayCandidate candidate;
  PerfReport report;
  std::optional<DataflowGraph> graph;
  std::optional<Placement> placement;  // set for accepted rows
};

struct ExploreResult {
  KernelProfile kernel;
  std::optional<PowerModel> power;
  std::vector<ExploreEntry> entries;
  std::vector<std::string> log;
};

inline std::optional<PatternId> choose_pattern(const ArrayCandidate& c, const std::string& requested) {
  for (auto p : c.feasible_patterns)
    if (requested == "auto" || requested == to_string(p)) return p;
  return std::nullopt;
}

// Top-ranked shape with a measured profile, preferring one that meets eff_lb.
// A measured profile is ground truth even when it misses eff_lb; the miss is
// logged rather than fatal.
inline KernelProfile choose_kernel(const DataTypeSpec& dt, double eff_lb, const Device& dev, const ProfileSet& profiles,
                                   std::vector<std::string>* log = nullptr) {
  std::optional<KernelProfile> kernel;
  for (const auto& s : optimize_kernel(dt, eff_lb, dev))
    if (auto p = profiles.find_matmul(dt, s)) {
      if (!kernel || (!validate_profile(*kernel, eff_lb) && validate_profile(*p, eff_lb))) kernel = p;
    }
  if (!kernel) throw InfeasibleError("no measured " + std::string(dt.name()) + " profile for any top-ranked kernel shape");
  if (!validate_profile(*kernel, eff_lb) && log)
    log->push_back("warning: " + kernel->shape.str() + " measured efficiency " + fmt_fixed(kernel->efficiency(), 4) +
                   " is below eff_lb " + fmt_fixed(eff_lb, 4));
  return *kernel;
}

inline ExploreResult explore(const Device& dev, const ProfileSet& profiles,
                             const std::vector<CalibrationRow>& calibration, const ExploreOptions& opt) {
  if (opt.pattern != "auto" && opt.pattern != "P1" && opt.pattern != "P2")
    throw ConfigError("unknown pattern '" + opt.pattern + "' (expected P1|P2|auto)");
  if (opt.top_k < 1) throw ConfigError("top-k must be positive");
  ExploreResult res;
  res.kernel = choose_kernel(opt.dtype, opt.eff_lb, dev, profiles, &res.log);
  if (calibration.size() >= 4) res.power = fit_power_model(calibration, std::string(opt.dtype.name()));

  ArraySearchOptions aopt;
  aopt.y_allowed = opt.y_allowed;
  auto cands = optimize_array(dev, aopt);
  if (static_cast<int>(cands.size()) > opt.top_k) cands.resize(static_cast<std::size_t>(opt.top_k));

  for (const auto& c : cands) {
    ExploreEntry e;
    e.candidate = c;
    PerfInputs in;
    in.array = c.shape;
    in.profile = res.kernel;
    in.power = res.power ? &*res.power : nullptr;
    if (auto row = find_calibration(calibration, c.shape.str()); row && row->reported_throughput > 0)
      in.reported_throughput = row->reported_throughput;

    const auto pid = choose_pattern(c, opt.pattern);
    if (!pid) {
      e.report = report(in, dev);
      e.report.status = "skipped";
      e.report.reason = c.feasible_patterns.empty() ? c.pattern_note() : "pattern " + opt.pattern + " not applicable";
      res.log.push_back(c.shape.str() + ": skipped, " + e.report.reason);
      res.entries.push_back(std::move(e));
      continue;
    }
    in.pattern = to_string(*pid);
    auto g = build_graph(c.shape, res.kernel.shape, opt.dtype, profiles);
    try {
      auto p = place(g, c.shape, pattern_for(*pid), dev, opt.place);
      const auto banks = bank_accounting(p, g, dev);
      in.total_banks = banks.total_banks;
      in.dma_banks = banks.dma_banks;
      const auto verdict = congestion_check(p, dev);
      if (!verdict.feasible) {
        e.report = report(in, dev);
        e.report.status = "rejected";
        e.report.reason = verdict.reason;
        res.log.push_back(c.shape.str() + ": rejected, " + verdict.reason);
        res.entries.push_back(std::move(e));
        continue;
      }
      if (opt.simulate) {
        const auto sim = simulate(g, profiles, opt.sim, dev, p.dma_edges());
        in.simulated_throughput = steady_state_throughput(sim, g, dev);
      }
      e.report = report(in, dev);
      e.graph = std::move(g);
      e.placement = std::move(p);
    } catch (const InfeasibleError& err) {
      e.report = report(in, dev);
      e.report.status = "infeasible";
      e.report.reason = err.what();
      res.log.push_back(c.shape.str() + ": infeasible, " + std::string(err.what()));
    }
    res.entries.push_back(std::move(e));
  }

  ExploreEntry* best = nullptr;
  for (auto& e : res.entries)
    if (e.report.status == "ok" &&
        (!best || e.report.kernel_bound_throughput > best->report.kernel_bound_throughput))
      best = &e;
  if (best) best->report.best = true;
  return res;
}

}  // namespace aiemap
