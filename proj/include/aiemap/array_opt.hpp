#pragma once

// Array-level integer program: choose how many kernel groups (X, Z) and how
// many kernels per group (Y) to instantiate under core and PLIO budgets.

#include <algorithm>
#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "aiemap/device.hpp"
#include "aiemap/error.hpp"

namespace aiemap {

struct ArrayShape {
  int x = 1;
  int y = 1;
  int z = 1;

  int groups() const { return x * z; }
  int matmul_kernels() const { return x * y * z; }
  int adder_cores() const { return y > 1 ? x * z : 0; }
  // Budgeted core count; a Y=1 design would not need its adder cores but the
  // budget formula charges them regardless.
  int total_cores() const { return x * y * z + x * z; }
  int plio_in_used() const { return x * y + y * z; }
  int plio_out_used() const { return x * z; }
  int plio_used() const { return plio_in_used() + plio_out_used(); }
  std::string str() const { return std::to_string(x) + "x" + std::to_string(y) + "x" + std::to_string(z); }

  friend auto operator<=>(const ArrayShape&, const ArrayShape&) = default;
};

inline ArrayShape parse_array_shape(const std::string& s) {
  ArrayShape a;
  char s1 = 0, s2 = 0;
  std::istringstream in(s);
  if (!(in >> a.x >> s1 >> a.y >> s2 >> a.z) || s1 != 'x' || s2 != 'x' || a.x <= 0 || a.y <= 0 || a.z <= 0 ||
      !in.eof())
    throw ConfigError("array shape must look like XxYxZ with positive integers, got '" + s + "'");
  return a;
}

enum class PatternId { P1, P2 };

inline std::string to_string(PatternId p) { return p == PatternId::P1 ? "P1" : "P2"; }

// Groups of four MatMuls use P1, groups of three use P2.
inline std::vector<PatternId> patterns_for_y(int y) {
  if (y == 4) return {PatternId::P1};
  if (y == 3) return {PatternId::P2};
  return {};
}

struct ArrayCandidate {
  ArrayShape shape;
  int rank = 0;  // 1-based
  std::vector<PatternId> feasible_patterns;

  std::string pattern_note() const {
    if (feasible_patterns.empty()) return "no placement pattern available";
    std::string s;
    for (auto p : feasible_patterns) s += (s.empty() ? "" : "|") + to_string(p);
    return s;
  }
};

struct ArraySearchOptions {
  std::set<int> y_allowed{3, 4};
  // (x,y,z) and (z,y,x) are the same design with A and B swapped; keep x >= z.
  bool fold_mirrors = true;
};

inline bool array_constraints_hold(const ArrayShape& s, const Device& dev) {
  return s.x > 0 && s.y > 0 && s.z > 0 && s.total_cores() <= dev.cores() && s.plio_in_used() <= dev.plio_in &&
         s.plio_out_used() <= dev.plio_out;
}

inline bool array_rank_less(const ArrayShape& a, const ArrayShape& b) {
  return std::make_tuple(-a.matmul_kernels(), a.total_cores(), a.x, a.y, a.z) <
         std::make_tuple(-b.matmul_kernels(), b.total_cores(), b.x, b.y, b.z);
}

inline std::vector<ArrayCandidate> optimize_array(const Device& dev, const ArraySearchOptions& opt = {}) {
  if (opt.y_allowed.empty()) throw DomainError("y_allowed must not be empty");
  std::vector<ArrayShape> feasible;
  const int cores = dev.cores();
  for (int y : opt.y_allowed) {
    if (y <= 0) throw DomainError("y values must be positive");
    for (int x = 1; x * (y + 1) <= cores; ++x)
      for (int z = 1; x * z * (y + 1) <= cores; ++z) {
        if (opt.fold_mirrors && z > x) break;
        const ArrayShape s{x, y, z};
        if (array_constraints_hold(s, dev)) feasible.push_back(s);
      }
  }
  std::sort(feasible.begin(), feasible.end(), array_rank_less);
  std::vector<ArrayCandidate> out;
  out.reserve(feasible.size());
  for (std::size_t i = 0; i < feasible.size(); ++i)
    out.push_back({feasible[i], static_cast<int>(i) + 1, patterns_for_y(feasible[i].y)});
  return out;
}

// Percentage rounded half-up to one decimal, computed in integers.
inline double percent_tenths(std::int64_t used, std::int64_t total) {
  if (total <= 0) return 0.0;
  return static_cast<double>((2000 * used + total) / (2 * total)) / 10.0;
}

struct ResourceCounts {
  int matmul_kernels = 0;
  int cores = 0;
  double core_pct = 0;
  int plio_used = 0;
  double plio_pct = 0;  // against plio_in + plio_out
};

inline ResourceCounts resource_counts(const ArrayShape& s, const Device& dev) {
  ResourceCounts r;
  r.matmul_kernels = s.matmul_kernels();
  r.cores = s.total_cores();
  r.core_pct = percent_tenths(r.cores, dev.cores());
  r.plio_used = s.plio_used();
  r.plio_pct = percent_tenths(r.plio_used, dev.plio_total());
  return r;
}

inline nlohmann::json candidates_to_json(const std::vector<ArrayCandidate>& cands, const Device& dev) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : cands) {
    const auto rc = resource_counts(c.shape, dev);
    rows.push_back({{"rank", c.rank},
                    {"config", c.shape.str()},
                    {"x", c.shape.x},
                    {"y", c.shape.y},
                    {"z", c.shape.z},
                    {"matmul_kernels", rc.matmul_kernels},
                    {"cores", rc.cores},
                    {"core_pct", rc.core_pct},
                    {"plio_in", c.shape.plio_in_used()},
                    {"plio_out", c.shape.plio_out_used()},
                    {"plio_used", rc.plio_used},
                    {"plio_pct", rc.plio_pct},
                    {"patterns", c.pattern_note()}});
  }
  return rows;
}

inline std::string candidates_to_csv(const std::vector<ArrayCandidate>& cands, const Device& dev) {
  std::ostringstream os;
  os << "rank,config,x,y,z,matmul_kernels,cores,core_pct,plio_in,plio_out,plio_used,plio_pct,patterns\n";
  for (const auto& c : cands) {
    const auto rc = resource_counts(c.shape, dev);
    os << c.rank << ',' << c.shape.str() << ',' << c.shape.x << ',' << c.shape.y << ',' << c.shape.z << ','
       << rc.matmul_kernels << ',' << rc.cores << ',' << rc.core_pct << ',' << c.shape.plio_in_used() << ','
       << c.shape.plio_out_used() << ',' << rc.plio_used << ',' << rc.plio_pct << ',' << c.pattern_note() << '\n';
  }
  return os.str();
}

}  // namespace aiemap
