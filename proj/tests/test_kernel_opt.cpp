#include <catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "aiemap/kernel_opt.hpp"

using namespace aiemap;

namespace {

// Independent filter over the power-of-two cube, written from the raw constraints.
std::set<KernelShape> brute_force_top(const DataTypeSpec& dt, double eff, const Device& dev) {
  std::set<KernelShape> all;
  std::int64_t best = 0;
  for (std::int64_t m = 8; m <= 1024; m *= 2)
    for (std::int64_t k = 8; k <= 1024; k *= 2)
      for (std::int64_t n = 8; n <= 1024; n *= 2) {
        // Stream-rate constraints: a tile must take at least as long to
        // compute as to stream in or out.
        const double compute = static_cast<double>(m * k * n) / (eff * dt.peak_macs);
        const bool a_ok = compute >= static_cast<double>(m * k * dt.input_bytes) / dev.bw_io;
        const bool b_ok = compute >= static_cast<double>(k * n * dt.input_bytes) / dev.bw_io;
        const bool c_ok = compute >= static_cast<double>(m * n * dt.output_bytes) / dev.bw_io;
        const std::int64_t bytes = (m * k + k * n) * dt.input_bytes + m * n * dt.output_bytes;
        const bool mem_ok = 2 * bytes <= (dev.banks_per_tile - 1) * dev.bank_bytes;
        if (a_ok && b_ok && c_ok && mem_ok) {
          all.insert({m, k, n});
          best = std::max(best, m * k * n);
        }
      }
  std::set<KernelShape> top;
  for (const auto& s : all)
    if (s.macs() == best) top.insert(s);
  return top;
}

}  // namespace

TEST_CASE("minimum dimensions", "[kernel]") {
  const auto dev = vc1902();
  const auto i8 = min_dims(kInt8, 0.95, dev);
  CHECK(i8.n_min == Catch::Approx(30.4));
  CHECK(i8.m_min == Catch::Approx(30.4));
  CHECK(i8.k_min == Catch::Approx(121.6));
  const auto f32 = min_dims(kFp32, 0.95, dev);
  CHECK(f32.n_min == Catch::Approx(7.6));
  CHECK(f32.k_min == Catch::Approx(7.6));
  const auto zero = min_dims(kFp32, 0.0, dev);
  CHECK(zero.n_min == 0.0);
  CHECK(zero.m_min == 0.0);
  CHECK(zero.k_min == 0.0);
  CHECK_THROWS_AS(min_dims(kFp32, 1.01, dev), DomainError);
  CHECK_THROWS_AS(min_dims(kFp32, -0.1, dev), DomainError);
}

TEST_CASE("memory budget", "[kernel]") {
  const auto dev = vc1902();
  CHECK(kernel_memory_budget(dev) == 14336);
  CHECK(memory_footprint({32, 128, 32}, kInt8) == 4096 + 4096 + 4096);
  CHECK(memory_footprint({32, 32, 32}, kFp32) == 3 * 4096);
}

TEST_CASE("int8 has a single optimum", "[kernel]") {
  const auto dev = vc1902();
  const auto ks = optimize_kernel(kInt8, 0.95, dev);
  REQUIRE(ks.size() == 1);
  CHECK(ks.front() == KernelShape{32, 128, 32});
  CHECK(std::set<KernelShape>(ks.begin(), ks.end()) == brute_force_top(kInt8, 0.95, dev));
}

TEST_CASE("fp32 optimum set", "[kernel]") {
  const auto dev = vc1902();
  const auto ks = optimize_kernel(kFp32, 0.95, dev);
  REQUIRE_FALSE(ks.empty());
  CHECK(ks.front() == KernelShape{32, 32, 32});
  for (const auto& s : ks) CHECK(s.macs() == 32768);
  const std::set<KernelShape> got(ks.begin(), ks.end());
  CHECK(got.count({16, 64, 32}) == 1);
  CHECK(got.count({64, 16, 32}) == 1);
  CHECK(got == brute_force_top(kFp32, 0.95, dev));
  CHECK(std::is_sorted(ks.begin(), ks.end(), kernel_rank_less));
}

TEST_CASE("brute force agreement across efficiency floors", "[kernel]") {
  const auto dev = vc1902();
  for (double eff : {0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 1.0})
    for (const auto& dt : {kInt8, kFp32}) {
      INFO(dt.name() << " eff " << eff);
      const auto ks = optimize_kernel(dt, eff, dev);
      CHECK(std::set<KernelShape>(ks.begin(), ks.end()) == brute_force_top(dt, eff, dev));
    }
}

TEST_CASE("infeasible floors", "[kernel]") {
  auto dev = vc1902();
  dev.bw_io = 0.01;
  CHECK_THROWS_AS(optimize_kernel(kInt8, 0.95, dev), InfeasibleError);
  CHECK_THROWS_WITH(optimize_kernel(kInt8, 0.95, dev), Catch::Matchers::ContainsSubstring("infeasible for given eff_lb"));
  CHECK_THROWS_AS(optimize_kernel(kInt8, 1.01, vc1902()), DomainError);
}

TEST_CASE("profile validation", "[kernel]") {
  const auto ps = table1_profiles();
  const auto i8 = ps.require_matmul(kInt8, {32, 128, 32});
  const auto f32 = ps.require_matmul(kFp32, {32, 32, 32});
  CHECK(validate_profile(i8, 0.95));
  CHECK(i8.efficiency() == Catch::Approx(131072.0 / 1075.0 / 128.0));
  CHECK_FALSE(validate_profile(f32, 0.95));
  CHECK(validate_profile(f32, 0.94));
  CHECK(f32.efficiency() == Catch::Approx(0.9462).margin(1e-4));
  CHECK(ps.require_add(kInt8, 32, 32).latency_cycles == 164);
  CHECK(ps.require_add(kFp32, 32, 32).latency_cycles == 167);
  CHECK_THROWS_AS(ps.require_matmul(kFp32, {64, 64, 64}), ConfigError);
  CHECK(select_kernel(kInt8, 0.95, vc1902(), ps).shape == KernelShape{32, 128, 32});
  CHECK_THROWS_AS(select_kernel(kFp32, 0.95, vc1902(), ps), InfeasibleError);
}

TEST_CASE("profile json round trip and shipped file", "[kernel]") {
  const auto ps = table1_profiles();
  CHECK(profiles_to_json(profiles_from_json(profiles_to_json(ps))) == profiles_to_json(ps));
  const auto shipped = profiles_from_json(read_json_file(std::string(AIEMAP_DATA_DIR) + "/kernel_profiles.json"));
  CHECK(profiles_to_json(shipped) == profiles_to_json(ps));
  CHECK_THROWS_AS(profiles_from_json(nlohmann::json::object()), ConfigError);
}

TEST_CASE("raising eff_lb never grows the feasible set", "[kernel]") {
  const auto dev = vc1902();
  for (const auto& dt : {kInt8, kFp32}) {
    std::set<KernelShape> prev;
    bool first = true;
    for (int i = 1; i <= 100; ++i) {
      const auto ks = feasible_kernels(dt, i / 100.0, dev);
      const std::set<KernelShape> cur(ks.begin(), ks.end());
      if (!first) CHECK(std::includes(prev.begin(), prev.end(), cur.begin(), cur.end()));
      prev = cur;
      first = false;
    }
  }
}
