// Explores the VC1902 design space for both data types and prints the
// accepted configurations with their placement maps.

#include <iostream>

#include "aiemap/aiemap.hpp"

int main() {
  using namespace aiemap;
  const Device dev = vc1902();
  const ProfileSet profiles = table1_profiles();
  for (const auto& dt : {kFp32, kInt8}) {
    ExploreOptions opt;
    opt.dtype = dt;
    const auto res = explore(dev, profiles, calibration_preset(dt), opt);
    std::cout << "== " << dt.name() << " with kernel " << res.kernel.shape.str() << '\n';
    for (const auto& line : res.log) std::cout << "  " << line << '\n';
    for (const auto& e : res.entries) {
      std::cout << e.report.config << "  " << e.report.status << "  kernel-bound "
                << fmt_fixed(e.report.kernel_bound_throughput * 1e-9, 2) << " GOPs"
                << (e.report.best ? "  (best)" : "") << '\n';
      if (e.placement && e.report.best) std::cout << render_ascii(*e.placement, *e.graph);
    }
  }
}
