// aiemap: command-line front end for the MatMul mapping toolkit.
//
// Exit codes: 0 ok, 1 infeasible (or a failed verification), 2 configuration
// or usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aiemap/aiemap.hpp"

namespace fs = std::filesystem;
using namespace aiemap;

namespace {

constexpr int kOk = 0;
constexpr int kInfeasible = 1;
constexpr int kConfig = 2;

struct Common {
  std::string device = "vc1902";
  std::string dtype = "fp32";
  double eff_lb = 0.95;
  std::string profiles;
  std::string calibration;
  std::string out;
  std::string format = "csv";
  std::uint64_t seed = 0;  // accepted for reproducible invocations; nothing here is random
};

void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + tmp.string() + "'");
    f << content;
    if (!f) throw ConfigError("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

void emit(const Common& c, const std::string& content) {
  if (c.out.empty())
    std::cout << content;
  else
    write_atomic(c.out, content);
}

ProfileSet load_profiles(const Common& c) {
  return c.profiles.empty() ? table1_profiles() : profiles_from_json(read_json_file(c.profiles));
}

std::vector<CalibrationRow> load_calibration(const Common& c, const DataTypeSpec& dt) {
  if (c.calibration.empty()) return calibration_preset(dt);
  const auto j = read_json_file(c.calibration);
  const std::string key(dt.name());
  if (!j.contains(key)) return {};
  return calibration_from_json(j.at(key));
}

std::set<int> parse_y(const std::string& s) {
  std::set<int> ys;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      const int y = std::stoi(tok);
      if (y < 1) throw ConfigError("--y values must be positive");
      ys.insert(y);
    } catch (const std::logic_error&) {
      throw ConfigError("bad --y list '" + s + "'");
    }
  }
  if (ys.empty()) throw ConfigError("--y list is empty");
  return ys;
}

PatternId resolve_pattern(const std::string& name, const ArrayShape& a) {
  if (name == "P1") return PatternId::P1;
  if (name == "P2") return PatternId::P2;
  if (name != "auto") throw ConfigError("unknown pattern '" + name + "' (expected P1|P2|auto)");
  const auto ps = patterns_for_y(a.y);
  if (ps.empty()) throw InfeasibleError(a.str() + ": no placement pattern available for Y=" + std::to_string(a.y));
  return ps.front();
}

std::string kernels_csv(const std::vector<KernelShape>& ks, const DataTypeSpec& dt) {
  std::ostringstream os;
  os << "m,k,n,macs,footprint_bytes\n";
  for (const auto& k : ks) os << k.m << ',' << k.k << ',' << k.n << ',' << k.macs() << ',' << memory_footprint(k, dt) << '\n';
  return os.str();
}

nlohmann::json kernels_json(const std::vector<KernelShape>& ks, const DataTypeSpec& dt) {
  auto rows = nlohmann::json::array();
  for (const auto& k : ks)
    rows.push_back({{"m", k.m}, {"k", k.k}, {"n", k.n}, {"macs", k.macs()}, {"footprint_bytes", memory_footprint(k, dt)}});
  return rows;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--device", c.device, "device JSON file or preset name")->capture_default_str();
  sub->add_option("--dtype", c.dtype, "int8 | fp32")->capture_default_str();
  sub->add_option("--eff-lb", c.eff_lb, "kernel efficiency lower bound in (0, 1]")->capture_default_str();
  sub->add_option("--profiles", c.profiles, "kernel profile JSON (default: built-in measurements)");
  sub->add_option("--calibration", c.calibration, "power calibration JSON (default: built-in rows)");
  sub->add_option("--out", c.out, "output file (directory for explore)");
  sub->add_option("--format", c.format, "csv | json")->capture_default_str()->check(CLI::IsMember({"csv", "json"}));
  sub->add_option("--seed", c.seed, "seed (no subcommand draws random numbers)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Design-space exploration for tiled MatMul on an AI Engine array"};
  app.require_subcommand(1);

  Common c;
  std::string pattern = "auto";
  std::string y_list = "3,4";
  std::string array;
  int top_k = 10;
  std::string placement_file;
  std::string svg_path;
  std::string trace_path;
  SimConfig sim;
  bool no_sim = false;

  auto* ok = app.add_subcommand("optimize-kernel", "rank kernel shapes");
  add_common(ok, c);

  auto* oa = app.add_subcommand("optimize-array", "rank array shapes");
  add_common(oa, c);
  oa->add_option("--y", y_list, "allowed Y values, comma separated")->capture_default_str();
  oa->add_option("--top-k", top_k, "rows to print (0 = all)")->capture_default_str();

  auto* pl = app.add_subcommand("place", "place one array configuration");
  add_common(pl, c);
  pl->add_option("--array", array, "XxYxZ")->required();
  pl->add_option("--pattern", pattern, "P1 | P2 | auto")->capture_default_str();
  pl->add_option("--svg", svg_path, "also write an SVG map");

  auto* si = app.add_subcommand("simulate", "simulate one placed configuration");
  add_common(si, c);
  si->add_option("--array", array, "XxYxZ")->required();
  si->add_option("--pattern", pattern, "P1 | P2 | auto")->capture_default_str();
  si->add_option("--horizon", sim.horizon, "MatMul firings per kernel")->capture_default_str();
  si->add_option("--warmup", sim.warmup_iterations, "firings excluded from the steady-state window")
      ->capture_default_str();
  si->add_option("--stream-bw", sim.stream_bw, "bytes/cycle (0 = device bw_io)")->capture_default_str();
  si->add_option("--dma-latency", sim.dma_latency, "extra cycles per DMA transfer")->capture_default_str();
  si->add_option("--trace", trace_path, "write the event trace as CSV");

  auto* ex = app.add_subcommand("explore", "full flow for the top-ranked candidates");
  add_common(ex, c);
  ex->add_option("--y", y_list, "allowed Y values, comma separated")->capture_default_str();
  ex->add_option("--pattern", pattern, "P1 | P2 | auto")->capture_default_str();
  ex->add_option("--top-k", top_k, "candidates to explore")->capture_default_str();
  ex->add_option("--horizon", sim.horizon, "MatMul firings per kernel")->capture_default_str();
  ex->add_flag("--no-simulate", no_sim, "skip simulation");

  auto* ve = app.add_subcommand("verify", "check a placement file from scratch");
  add_common(ve, c);
  ve->add_option("placement", placement_file, "placement JSON")->required();

  auto* pp = app.add_subcommand("plot-padding", "throughput versus matrix size with zero padding");
  add_common(pp, c);
  pp->add_option("--array", array, "XxYxZ")->default_str("13x4x6");
  pp->add_option("--svg", svg_path, "also write an SVG plot");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    const Device dev = load_device(c.device);
    const DataTypeSpec dt = parse_dtype(c.dtype);
    require_eff_lb(c.eff_lb);

    if (*ok) {
      const auto ks = optimize_kernel(dt, c.eff_lb, dev);
      emit(c, c.format == "json" ? kernels_json(ks, dt).dump(2) + "\n" : kernels_csv(ks, dt));
      return kOk;
    }

    if (*oa) {
      ArraySearchOptions opt;
      opt.y_allowed = parse_y(y_list);
      auto cands = optimize_array(dev, opt);
      if (top_k > 0 && static_cast<int>(cands.size()) > top_k) cands.resize(static_cast<std::size_t>(top_k));
      emit(c, c.format == "json" ? candidates_to_json(cands, dev).dump(2) + "\n" : candidates_to_csv(cands, dev));
      return kOk;
    }

    if (*pl || *si) {
      const auto profiles = load_profiles(c);
      const auto a = parse_array_shape(array);
      std::vector<std::string> log;
      const auto kp = choose_kernel(dt, c.eff_lb, dev, profiles, &log);
      for (const auto& line : log) std::cerr << line << '\n';
      const auto g = build_graph(a, kp.shape, dt, profiles);
      const auto p = place(g, a, pattern_for(resolve_pattern(pattern, a)), dev);
      if (*pl) {
        const auto verdict = congestion_check(p, dev);
        std::cerr << render_ascii(p, g);
        if (!verdict.feasible) std::cerr << "warning: " << verdict.reason << '\n';
        if (!svg_path.empty()) write_atomic(svg_path, render_svg(p, g));
        emit(c, placement_to_json(p, g).dump(2) + "\n");
        return kOk;
      }
      sim.record_trace = !trace_path.empty();
      const auto r = simulate(g, profiles, sim, dev, p.dma_edges());
      if (!trace_path.empty()) write_atomic(trace_path, trace_to_csv(r));
      emit(c, sim_result_to_json(r, g, dev).dump(2) + "\n");
      return kOk;
    }

    if (*ex) {
      ExploreOptions opt;
      opt.dtype = dt;
      opt.eff_lb = c.eff_lb;
      opt.y_allowed = parse_y(y_list);
      opt.pattern = pattern;
      opt.top_k = top_k;
      opt.simulate = !no_sim;
      opt.sim.horizon = sim.horizon;
      const auto res = explore(dev, load_profiles(c), load_calibration(c, dt), opt);
      for (const auto& line : res.log) std::cerr << line << '\n';
      const fs::path dir = c.out.empty() ? fs::path("aiemap_out") : fs::path(c.out);
      std::vector<PerfReport> rows;
      auto json_rows = nlohmann::json::array();
      for (const auto& e : res.entries) {
        rows.push_back(e.report);
        json_rows.push_back(report_to_json(e.report));
        if (!e.placement) continue;
        const auto stem = "placement_" + e.report.config;
        write_atomic(dir / (stem + ".json"), placement_to_json(*e.placement, *e.graph).dump(2) + "\n");
        write_atomic(dir / (stem + ".svg"), render_svg(*e.placement, *e.graph));
      }
      write_atomic(dir / "report.csv", reports_to_csv(rows));
      if (c.format == "json") write_atomic(dir / "report.json", json_rows.dump(2) + "\n");
      if (res.power) write_atomic(dir / "power_model.json", power_model_to_json(*res.power).dump(2) + "\n");
      std::cout << reports_to_csv(rows);
      return kOk;
    }

    if (*ve) {
      const auto rep = verify_placement(read_json_file(placement_file), dev);
      if (c.format == "json") {
        auto v = nlohmann::json::array();
        for (const auto& x : rep.violations) v.push_back({{"code", x.code}, {"edge", x.edge}, {"message", x.message}});
        emit(c, nlohmann::json{{"ok", rep.ok()}, {"violations", v}}.dump(2) + "\n");
      } else {
        std::ostringstream os;
        for (const auto& x : rep.violations)
          os << x.code << (x.edge >= 0 ? " edge " + std::to_string(x.edge) : std::string()) << ": " << x.message
             << '\n';
        os << (rep.ok() ? "PASS" : "FAIL") << ": " << rep.cores << " cores, " << rep.buffers << " buffers, "
           << rep.total_banks << " banks, " << rep.violations.size() << " violations\n";
        emit(c, os.str());
      }
      return rep.ok() ? kOk : kInfeasible;
    }

    if (*pp) {
      const auto profiles = load_profiles(c);
      const auto a = parse_array_shape(array);
      const auto kp = choose_kernel(dt, c.eff_lb, dev, profiles);
      const auto kshape = kp.shape;
      double base = peak_throughput(a.matmul_kernels(), dev, kp).kernel_bound;
      const auto cal = load_calibration(c, dt);
      if (auto row = find_calibration(cal, a.str()); row && row->reported_throughput > 0) base = row->reported_throughput;
      const auto native = native_size(a, kshape);
      std::ostringstream csv;
      csv << "size,factor,throughput_gops\n";
      std::vector<std::pair<std::int64_t, double>> pts;
      for (std::int64_t l = 128; l <= 8192; l *= 2) {
        const double f = padding_factor(native, {l, l, l});
        pts.push_back({l, f});
        csv << l << ',' << fmt_fixed(f, 6) << ',' << fmt_fixed(base * f * 1e-9, 2) << '\n';
      }
      if (!svg_path.empty()) {
        std::ostringstream svg;
        const int w = 480, h = 300, m = 40;
        svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n"
            << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<polyline fill=\"none\" stroke=\"#1f77b4\" "
               "stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i)
          svg << m + static_cast<double>(i) * (w - 2 * m) / static_cast<double>(pts.size() - 1) << ','
              << h - m - pts[i].second * (h - 2 * m) << ' ';
        svg << "\"/>\n";
        for (std::size_t i = 0; i < pts.size(); ++i)
          svg << "<text x=\"" << m + static_cast<double>(i) * (w - 2 * m) / static_cast<double>(pts.size() - 1)
              << "\" y=\"" << h - m / 3 << "\" font-size=\"10\" text-anchor=\"middle\">" << pts[i].first << "</text>\n";
        svg << "<text x=\"" << m << "\" y=\"" << m / 2 << "\" font-size=\"12\">" << a.str() << ' ' << dt.name()
            << " padded throughput fraction</text>\n</svg>\n";
        write_atomic(svg_path, svg.str());
      }
      emit(c, csv.str());
      return kOk;
    }
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    if (!e.diagnostics().empty()) std::cerr << e.diagnostics() << '\n';
    return kInfeasible;
  } catch (const DeadlockError& e) {
    std::cerr << "deadlock: " << e.what() << '\n' << e.blocked_nodes() << '\n';
    return kInfeasible;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const DomainError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kConfig;
  } catch (const CalibrationError& e) {
    std::cerr << "calibration error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  }
  return kOk;
}
