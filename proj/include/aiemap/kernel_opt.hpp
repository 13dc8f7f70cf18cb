#pragma once

// Single-kernel integer program: pick the power-of-two M x K x N tile that
// maximizes MACs while staying above the efficiency floor, keeping every I/O
// stream faster than the kernel, and fitting double-buffered in local memory.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "aiemap/device.hpp"
#include "aiemap/error.hpp"

namespace aiemap {

struct KernelShape {
  std::int64_t m = 0;
  std::int64_t k = 0;
  std::int64_t n = 0;

  std::int64_t macs() const { return m * k * n; }
  std::int64_t max_dim() const { return std::max({m, k, n}); }
  std::string str() const { return std::to_string(m) + "x" + std::to_string(k) + "x" + std::to_string(n); }

  friend auto operator<=>(const KernelShape&, const KernelShape&) = default;
};

inline bool is_pow2(std::int64_t v) { return v > 0 && (v & (v - 1)) == 0; }

struct KernelProfile {
  KernelShape shape;
  DataTypeSpec dtype = kFp32;
  double latency_cycles = 0;

  double macs_per_cycle() const { return static_cast<double>(shape.macs()) / latency_cycles; }
  double efficiency() const { return macs_per_cycle() / dtype.peak_macs; }
};

struct AddProfile {
  std::int64_t m = 0;
  std::int64_t n = 0;
  DataTypeSpec dtype = kFp32;
  double latency_cycles = 0;
};

// Per-dimension lower bounds from combining the efficiency floor with the
// stream-rate constraints. Plain doubles; callers compare raw dimensions.
struct MinDims {
  double n_min;  // from the A stream
  double m_min;  // from the B stream
  double k_min;  // from the C stream
};

inline void require_eff_lb(double eff_lb, bool allow_zero = false) {
  if (!(eff_lb <= 1.0) || !(allow_zero ? eff_lb >= 0.0 : eff_lb > 0.0))
    throw DomainError("eff_lb must lie in (0, 1], got " + std::to_string(eff_lb));
}

inline MinDims min_dims(const DataTypeSpec& dt, double eff_lb, const Device& dev) {
  require_eff_lb(eff_lb, /*allow_zero=*/true);
  const double base = eff_lb * dt.peak_macs / dev.bw_io;
  return {base * dt.input_bytes, base * dt.input_bytes, base * dt.output_bytes};
}

// Single-copy footprint of the A, B and C buffers.
inline std::int64_t memory_footprint(const KernelShape& s, const DataTypeSpec& dt) {
  return s.m * s.k * dt.input_bytes + s.k * s.n * dt.input_bytes + s.m * s.n * dt.output_bytes;
}

// Bytes available to one copy of the double-buffered kernel working set after
// the system banks are set aside (14KB on VC1902).
inline std::int64_t kernel_memory_budget(const Device& dev) {
  return static_cast<std::int64_t>(dev.banks_per_tile - dev.reserved_banks_per_core) * dev.bank_bytes / 2;
}

inline bool satisfies_kernel_constraints(const KernelShape& s, const DataTypeSpec& dt, double eff_lb,
                                         const Device& dev) {
  const MinDims md = min_dims(dt, eff_lb, dev);
  return static_cast<double>(s.n) >= md.n_min && static_cast<double>(s.m) >= md.m_min &&
         static_cast<double>(s.k) >= md.k_min && memory_footprint(s, dt) <= kernel_memory_budget(dev);
}

struct DimBounds {
  std::int64_t lo = 8;
  std::int64_t hi = 1024;
};

// Canonical rank: MACs descending, then smaller largest dimension, then (m,k,n).
inline bool kernel_rank_less(const KernelShape& a, const KernelShape& b) {
  return std::make_tuple(-a.macs(), a.max_dim(), a.m, a.k, a.n) <
         std::make_tuple(-b.macs(), b.max_dim(), b.m, b.k, b.n);
}

// All feasible power-of-two shapes in canonical rank order.
inline std::vector<KernelShape> feasible_kernels(const DataTypeSpec& dt, double eff_lb, const Device& dev,
                                                 DimBounds bounds = {}) {
  require_eff_lb(eff_lb);
  if (!is_pow2(bounds.lo) || !is_pow2(bounds.hi) || bounds.lo > bounds.hi)
    throw DomainError("dimension bounds must be powers of two with lo <= hi");
  std::vector<KernelShape> out;
  for (std::int64_t m = bounds.lo; m <= bounds.hi; m *= 2)
    for (std::int64_t k = bounds.lo; k <= bounds.hi; k *= 2)
      for (std::int64_t n = bounds.lo; n <= bounds.hi; n *= 2) {
        const KernelShape s{m, k, n};
        if (satisfies_kernel_constraints(s, dt, eff_lb, dev)) out.push_back(s);
      }
  std::sort(out.begin(), out.end(), kernel_rank_less);
  return out;
}

// Shapes sharing the maximal MAC count. Throws InfeasibleError if none fit.
inline std::vector<KernelShape> optimize_kernel(const DataTypeSpec& dt, double eff_lb, const Device& dev,
                                                DimBounds bounds = {}) {
  auto all = feasible_kernels(dt, eff_lb, dev, bounds);
  if (all.empty())
    throw InfeasibleError("infeasible for given eff_lb: no " + std::string(dt.name()) +
                          " kernel shape satisfies the constraints at eff_lb=" + std::to_string(eff_lb));
  const auto best = all.front().macs();
  all.erase(std::find_if(all.begin(), all.end(), [&](const KernelShape& s) { return s.macs() != best; }),
            all.end());
  return all;
}

// True iff the measured latency meets the efficiency floor.
inline bool validate_profile(const KernelProfile& p, double eff_lb) {
  require_eff_lb(eff_lb);
  return p.latency_cycles <= static_cast<double>(p.shape.macs()) / (eff_lb * p.dtype.peak_macs);
}

// ---------------------------------------------------------------------------
// Calibration data

class ProfileSet {
 public:
  std::vector<KernelProfile> matmul;
  std::vector<AddProfile> add;

  std::optional<KernelProfile> find_matmul(const DataTypeSpec& dt, const KernelShape& s) const {
    for (const auto& p : matmul)
      if (p.dtype == dt && p.shape == s) return p;
    return std::nullopt;
  }

  std::optional<AddProfile> find_add(const DataTypeSpec& dt, std::int64_t m, std::int64_t n) const {
    for (const auto& p : add)
      if (p.dtype == dt && p.m == m && p.n == n) return p;
    return std::nullopt;
  }

  KernelProfile require_matmul(const DataTypeSpec& dt, const KernelShape& s) const {
    if (auto p = find_matmul(dt, s)) return *p;
    throw ConfigError("no " + std::string(dt.name()) + " MatMul profile for " + s.str());
  }

  AddProfile require_add(const DataTypeSpec& dt, std::int64_t m, std::int64_t n) const {
    if (auto p = find_add(dt, m, n)) return *p;
    throw ConfigError("no " + std::string(dt.name()) + " Add profile for " + std::to_string(m) + "x" +
                      std::to_string(n));
  }
};

// Measured single-kernel latencies on VC1902 (cycles).
inline ProfileSet table1_profiles() {
  ProfileSet ps;
  ps.matmul = {{{32, 128, 32}, kInt8, 1075}, {{32, 32, 32}, kFp32, 4329}};
  ps.add = {{32, 32, kInt8, 164}, {32, 32, kFp32, 167}};
  return ps;
}

inline nlohmann::json profiles_to_json(const ProfileSet& ps) {
  nlohmann::json kernels = nlohmann::json::array();
  for (const auto& p : ps.matmul)
    kernels.push_back({{"kind", "matmul"},
                       {"dtype", p.dtype.name()},
                       {"m", p.shape.m},
                       {"k", p.shape.k},
                       {"n", p.shape.n},
                       {"latency_cycles", p.latency_cycles}});
  for (const auto& p : ps.add)
    kernels.push_back(
        {{"kind", "add"}, {"dtype", p.dtype.name()}, {"m", p.m}, {"n", p.n}, {"latency_cycles", p.latency_cycles}});
  return {{"kernels", kernels}};
}

inline ProfileSet profiles_from_json(const nlohmann::json& j) {
  ProfileSet ps;
  try {
    for (const auto& e : j.at("kernels")) {
      const auto kind = e.at("kind").get<std::string>();
      const auto dt = parse_dtype(e.at("dtype").get<std::string>());
      const double lat = e.at("latency_cycles").get<double>();
      if (!(lat > 0)) throw ConfigError("profile latency must be positive");
      if (kind == "matmul")
        ps.matmul.push_back({{e.at("m").get<std::int64_t>(), e.at("k").get<std::int64_t>(), e.at("n").get<std::int64_t>()},
                             dt,
                             lat});
      else if (kind == "add")
        ps.add.push_back({e.at("m").get<std::int64_t>(), e.at("n").get<std::int64_t>(), dt, lat});
      else
        throw ConfigError("unknown profile kind '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("kernel profile file: ") + e.what());
  }
  return ps;
}

// Top-ranked shape whose measured profile meets eff_lb.
inline KernelProfile select_kernel(const DataTypeSpec& dt, double eff_lb, const Device& dev, const ProfileSet& ps,
                                   DimBounds bounds = {}) {
  for (const auto& s : optimize_kernel(dt, eff_lb, dev, bounds))
    if (auto p = ps.find_matmul(dt, s); p && validate_profile(*p, eff_lb)) return *p;
  throw InfeasibleError("infeasible for given eff_lb: no top-ranked " + std::string(dt.name()) +
                        " shape has a profile meeting eff_lb=" + std::to_string(eff_lb));
}

}  // namespace aiemap
