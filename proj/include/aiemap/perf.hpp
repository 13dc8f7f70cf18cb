#pragma once

// Analytical throughput, zero-padding losses and a calibrated power surrogate.

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "aiemap/array_opt.hpp"
#include "aiemap/device.hpp"
#include "aiemap/error.hpp"
#include "aiemap/kernel_opt.hpp"

namespace aiemap {

struct Throughput {
  double peak = 0;          // ops/s at peak MACs/cycle, 2 ops per MAC
  double kernel_bound = 0;  // ops/s at the measured kernel rate
};

inline Throughput peak_throughput(int n_matmul, const Device& dev, const KernelProfile& profile) {
  Throughput t;
  if (n_matmul <= 0) return t;
  t.peak = n_matmul * static_cast<double>(profile.dtype.peak_macs) * 2.0 * dev.aie_clock_hz;
  t.kernel_bound = n_matmul * profile.macs_per_cycle() * 2.0 * dev.aie_clock_hz;
  return t;
}

struct MatrixDims {
  std::int64_t m = 0;
  std::int64_t k = 0;
  std::int64_t n = 0;
};

// Problem size one pass over the whole array computes.
inline MatrixDims native_size(const ArrayShape& a, const KernelShape& k) {
  return {a.x * k.m, a.y * k.k, a.z * k.n};
}

// Fraction of useful work once each dimension is zero-padded up to a multiple
// of the native size.
inline double padding_factor(const MatrixDims& native, const MatrixDims& l) {
  if (l.m <= 0 || l.k <= 0 || l.n <= 0) throw DomainError("matrix dimensions must be positive");
  if (native.m <= 0 || native.k <= 0 || native.n <= 0) throw DomainError("native size must be positive");
  auto pad = [](std::int64_t v, std::int64_t q) { return static_cast<double>((v + q - 1) / q * q); };
  return (static_cast<double>(l.m) / pad(l.m, native.m)) * (static_cast<double>(l.k) / pad(l.k, native.k)) *
         (static_cast<double>(l.n) / pad(l.n, native.n));
}

inline double padded_throughput(const ArrayShape& a, const KernelShape& k, const MatrixDims& l,
                                double base_throughput) {
  return base_throughput * padding_factor(native_size(a, k), l);
}

// ---------------------------------------------------------------------------
// Power surrogate

struct CalibrationRow {
  std::string config;
  int n_matmul = 0;
  int n_adder = 0;
  int banks = 0;
  double core_w = 0;
  double mem_w = 0;
  double reported_throughput = 0;  // ops/s, 0 when unknown
};

struct PowerEstimate {
  double core_w = 0;
  double mem_w = 0;
  double total() const { return core_w + mem_w; }
};

struct PowerModel {
  std::string dtype;
  // core_w = core_c0 + c_matmul * n_matmul + c_adder * n_adder
  double core_c0 = 0, c_matmul = 0, c_adder = 0;
  // mem_w = mem_c0 + c_bank * banks
  double mem_c0 = 0, c_bank = 0;
  std::vector<double> residuals;  // predicted - measured total power, W, per calibration row
  std::vector<double> relative_residuals;

  PowerEstimate predict(int n_matmul, int n_adder, int banks) const {
    return {core_c0 + c_matmul * n_matmul + c_adder * n_adder, mem_c0 + c_bank * banks};
  }
  double max_relative_residual() const {
    double m = 0;
    for (double r : relative_residuals) m = std::max(m, std::abs(r));
    return m;
  }
};

inline PowerModel fit_power_model(const std::vector<CalibrationRow>& rows, std::string dtype = {}) {
  if (rows.size() < 4)
    throw CalibrationError("power calibration needs at least 4 rows, got " + std::to_string(rows.size()));
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd core_x(n, 3), mem_x(n, 2);
  Eigen::VectorXd core_y(n), mem_y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    core_x.row(i) << 1.0, r.n_matmul, r.n_adder;
    mem_x.row(i) << 1.0, r.banks;
    core_y(i) = r.core_w;
    mem_y(i) = r.mem_w;
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> core_qr(core_x);
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> mem_qr(mem_x);
  if (core_qr.rank() < 3) throw CalibrationError("core power design matrix is rank deficient");
  if (mem_qr.rank() < 2) throw CalibrationError("memory power design matrix is rank deficient");
  const Eigen::VectorXd cc = core_qr.solve(core_y);
  const Eigen::VectorXd cm = mem_qr.solve(mem_y);

  PowerModel m;
  m.dtype = std::move(dtype);
  m.core_c0 = cc(0);
  m.c_matmul = cc(1);
  m.c_adder = cc(2);
  m.mem_c0 = cm(0);
  m.c_bank = cm(1);
  for (const auto& r : rows) {
    const double measured = r.core_w + r.mem_w;
    const double diff = m.predict(r.n_matmul, r.n_adder, r.banks).total() - measured;
    m.residuals.push_back(diff);
    m.relative_residuals.push_back(diff / measured);
  }
  return m;
}

// XPE-estimated power and simulated throughput of six VC1902 configurations.
inline std::vector<CalibrationRow> calibration_preset(const DataTypeSpec& dt) {
  if (dt.type == DataType::fp32)
    return {{"13x4x6", 312, 78, 3138, 25.62, 18.21, 5442.11e9}, {"10x3x10", 300, 100, 3190, 25.54, 19.12, 5405.33e9},
            {"11x4x7", 308, 77, 3106, 25.36, 18.65, 5414.39e9}, {"11x3x9", 297, 99, 3176, 25.35, 18.78, 5382.27e9},
            {"12x4x6", 288, 72, 2934, 23.77, 16.91, 5031.19e9}, {"12x3x8", 288, 96, 3092, 24.68, 17.60, 5225.05e9}};
  return {{"13x4x6", 312, 78, 3112, 48.65, 18.18, 77.01e12}, {"10x3x10", 300, 100, 3194, 47.44, 19.08, 76.08e12},
          {"11x4x7", 308, 77, 3096, 48.17, 18.62, 75.67e12}, {"11x3x9", 297, 99, 3178, 47.04, 18.79, 74.66e12},
          {"12x4x6", 288, 72, 2918, 45.15, 16.98, 71.25e12}, {"12x3x8", 288, 96, 3080, 45.71, 17.53, 72.93e12}};
}

inline std::optional<CalibrationRow> find_calibration(const std::vector<CalibrationRow>& rows,
                                                      const std::string& config) {
  for (const auto& r : rows)
    if (r.config == config) return r;
  return std::nullopt;
}

inline nlohmann::json calibration_to_json(const std::vector<CalibrationRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows)
    out.push_back({{"config", r.config},
                   {"n_matmul", r.n_matmul},
                   {"n_adder", r.n_adder},
                   {"banks", r.banks},
                   {"core_w", r.core_w},
                   {"mem_w", r.mem_w},
                   {"reported_throughput", r.reported_throughput}});
  return out;
}

inline std::vector<CalibrationRow> calibration_from_json(const nlohmann::json& j) {
  std::vector<CalibrationRow> rows;
  try {
    for (const auto& e : j)
      rows.push_back({e.at("config").get<std::string>(), e.at("n_matmul").get<int>(), e.at("n_adder").get<int>(),
                      e.at("banks").get<int>(), e.at("core_w").get<double>(), e.at("mem_w").get<double>(),
                      e.value("reported_throughput", 0.0)});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("calibration rows: ") + e.what());
  }
  return rows;
}

inline nlohmann::json power_model_to_json(const PowerModel& m) {
  return {{"dtype", m.dtype},
          {"label", "estimate"},
          {"core", {{"c0", m.core_c0}, {"c_matmul", m.c_matmul}, {"c_adder", m.c_adder}}},
          {"memory", {{"c0", m.mem_c0}, {"c_bank", m.c_bank}}},
          {"residuals_w", m.residuals},
          {"relative_residuals", m.relative_residuals}};
}

// ---------------------------------------------------------------------------
// Report rows

struct Utilization {
  double cores_pct = 0;
  double banks_pct = 0;
  double plios_pct = 0;
};

struct PerfReport {
  std::string config;
  std::string pattern;
  std::string dtype;
  int matmul_kernels = 0;
  int cores = 0;
  int total_banks = 0;
  int dma_banks = 0;
  int plio_used = 0;
  Utilization utilization;
  double peak_throughput = 0;
  double kernel_bound_throughput = 0;
  std::optional<double> simulated_throughput;
  std::optional<double> reported_throughput;
  std::optional<double> reported_gap_ratio;  // reported / kernel_bound
  PowerEstimate power;                    // estimate
  double energy_efficiency = 0;           // kernel-bound ops/s per W
  bool best = false;  // highest kernel-bound throughput among accepted rows
  std::string status = "ok";
  std::string reason;
};

struct PerfInputs {
  ArrayShape array;
  std::string pattern;
  KernelProfile profile;
  int total_banks = 0;
  int dma_banks = 0;
  const PowerModel* power = nullptr;
  std::optional<double> simulated_throughput;
  std::optional<double> reported_throughput;
};

inline PerfReport report(const PerfInputs& in, const Device& dev) {
  PerfReport r;
  r.config = in.array.str();
  r.pattern = in.pattern;
  r.dtype = std::string(in.profile.dtype.name());
  const int n_mm = in.array.matmul_kernels();
  if (n_mm == 0) return r;
  const auto rc = resource_counts(in.array, dev);
  r.matmul_kernels = rc.matmul_kernels;
  r.cores = rc.cores;
  r.plio_used = rc.plio_used;
  r.total_banks = in.total_banks;
  r.dma_banks = in.dma_banks;
  r.utilization = {rc.core_pct, percent_tenths(in.total_banks, dev.total_banks()), rc.plio_pct};
  const auto tp = peak_throughput(n_mm, dev, in.profile);
  r.peak_throughput = tp.peak;
  r.kernel_bound_throughput = tp.kernel_bound;
  r.simulated_throughput = in.simulated_throughput;
  r.reported_throughput = in.reported_throughput;
  if (in.reported_throughput && tp.kernel_bound > 0) r.reported_gap_ratio = *in.reported_throughput / tp.kernel_bound;
  if (in.power) {
    r.power = in.power->predict(n_mm, in.array.adder_cores(), in.total_banks);
    if (r.power.total() > 0) r.energy_efficiency = tp.kernel_bound / r.power.total();
  }
  return r;
}

inline std::string fmt_fixed(double v, int digits) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

inline std::string reports_to_csv(const std::vector<PerfReport>& rows) {
  std::ostringstream os;
  os << "config,pattern,dtype,matmul_kernels,cores,core_pct,memory_banks,bank_pct,dma_banks,plios,plio_pct,"
        "peak_gops,kernel_bound_gops,simulated_gops,reported_gops,gap_ratio,power_w_est,core_w_est,mem_w_est,"
        "energy_eff_gops_per_w,best,status,reason\n";
  auto opt = [](const std::optional<double>& v, double scale, int d) {
    return v ? fmt_fixed(*v * scale, d) : std::string();
  };
  for (const auto& r : rows)
    os << r.config << ',' << r.pattern << ',' << r.dtype << ',' << r.matmul_kernels << ',' << r.cores << ','
       << fmt_fixed(r.utilization.cores_pct, 1) << ',' << r.total_banks << ',' << fmt_fixed(r.utilization.banks_pct, 1)
       << ',' << r.dma_banks << ',' << r.plio_used << ',' << fmt_fixed(r.utilization.plios_pct, 1) << ','
       << fmt_fixed(r.peak_throughput * 1e-9, 2) << ',' << fmt_fixed(r.kernel_bound_throughput * 1e-9, 2) << ','
       << opt(r.simulated_throughput, 1e-9, 2) << ',' << opt(r.reported_throughput, 1e-9, 2) << ','
       << opt(r.reported_gap_ratio, 1.0, 4) << ',' << fmt_fixed(r.power.total(), 2) << ','
       << fmt_fixed(r.power.core_w, 2) << ',' << fmt_fixed(r.power.mem_w, 2) << ','
       << fmt_fixed(r.energy_efficiency * 1e-9, 2) << ',' << (r.best ? "yes" : "") << ',' << r.status << ',' << r.reason << '\n';
  return os.str();
}

inline nlohmann::json report_to_json(const PerfReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"config", r.config},
          {"pattern", r.pattern},
          {"dtype", r.dtype},
          {"matmul_kernels", r.matmul_kernels},
          {"cores", r.cores},
          {"memory_banks", r.total_banks},
          {"dma_banks", r.dma_banks},
          {"plios", r.plio_used},
          {"utilization",
           {{"cores_pct", r.utilization.cores_pct},
            {"banks_pct", r.utilization.banks_pct},
            {"plios_pct", r.utilization.plios_pct}}},
          {"peak_throughput", r.peak_throughput},
          {"kernel_bound_throughput", r.kernel_bound_throughput},
          {"simulated_throughput", opt(r.simulated_throughput)},
          {"reported_throughput", opt(r.reported_throughput)},
          {"reported_gap_ratio", opt(r.reported_gap_ratio)},
          {"power_estimate_w", {{"total", r.power.total()}, {"core", r.power.core_w}, {"memory", r.power.mem_w}}},
          {"energy_efficiency", r.energy_efficiency},
          {"best", r.best},
          {"status", r.status},
          {"reason", r.reason}};
}

}  // namespace aiemap
