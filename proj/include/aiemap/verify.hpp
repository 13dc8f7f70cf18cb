#pragma once

// Stand-alone legality checker for exported placements. It reads only the
// placement document and the device model, and recomputes access legality,
// bank usage and DMA classification from scratch.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "aiemap/device.hpp"
#include "aiemap/error.hpp"

namespace aiemap {

struct Violation {
  std::string code;  // core-off-grid, core-collision, buffer-off-grid, unknown-node, access, spurious-dma,
                     // undersized-buffer, bank-overflow, ledger-mismatch, dma-list-mismatch
  int edge = -1;
  std::string message;
};

struct VerifyReport {
  std::vector<Violation> violations;
  int cores = 0;
  int buffers = 0;
  int total_banks = 0;
  int dma_banks = 0;

  bool ok() const { return violations.empty(); }
};

namespace detail {

inline std::string tile_str(TileCoord t) { return "(" + std::to_string(t.row) + "," + std::to_string(t.col) + ")"; }

struct EndpointRef {
  bool node = false;
  int index = -1;
};

inline EndpointRef parse_endpoint_ref(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw ConfigError("bad endpoint '" + s + "'");
  EndpointRef r;
  r.node = s.substr(0, colon) == "node";
  try {
    r.index = std::stoi(s.substr(colon + 1));
  } catch (const std::exception&) {
    throw ConfigError("bad endpoint '" + s + "'");
  }
  return r;
}

inline bool in_set(const std::vector<TileCoord>& v, TileCoord t) {
  for (auto x : v)
    if (x == t) return true;
  return false;
}

}  // namespace detail

inline VerifyReport verify_placement(const nlohmann::json& doc, const Device& dev) {
  VerifyReport rep;
  auto add = [&rep](std::string code, int edge, std::string msg) {
    rep.violations.push_back({std::move(code), edge, std::move(msg)});
  };
  std::map<int, TileCoord> cores;
  std::vector<int> used(static_cast<std::size_t>(dev.cores()), 0);
  std::set<int> dma_flagged;

  try {
    std::map<TileCoord, int> occupant;
    for (const auto& c : doc.at("cores")) {
      const int node = c.at("node").get<int>();
      const auto t = c.at("tile").get<TileCoord>();
      ++rep.cores;
      if (!dev.contains(t)) {
        add("core-off-grid", -1, "node " + std::to_string(node) + " on " + detail::tile_str(t));
        continue;
      }
      if (auto [it, fresh] = occupant.emplace(t, node); !fresh)
        add("core-collision", -1,
            "nodes " + std::to_string(it->second) + " and " + std::to_string(node) + " share " + detail::tile_str(t));
      cores[node] = t;
      used[static_cast<std::size_t>(dev.index(t))] += dev.reserved_banks_per_core;
    }

    for (const auto& b : doc.at("buffers")) {
      ++rep.buffers;
      const int id = b.at("edge").get<int>();
      const auto prod = detail::parse_endpoint_ref(b.at("producer").get<std::string>());
      const auto cons = detail::parse_endpoint_ref(b.at("consumer").get<std::string>());
      const auto t = b.at("tile").get<TileCoord>();
      const auto bytes = b.at("bytes").get<long long>();
      const int copies = b.at("buffering").get<std::string>() == "double" ? 2 : 1;
      const int banks = b.at("banks").get<int>();
      const bool dma = b.value("dma", false);
      if (dma) dma_flagged.insert(id);
      const std::string tag = "edge " + std::to_string(id);

      if (!dev.contains(t)) {
        add("buffer-off-grid", id, tag + " homed off the grid at " + detail::tile_str(t));
        continue;
      }
      const long long need = (bytes + dev.bank_bytes - 1) / dev.bank_bytes * copies;
      if (banks < need)
        add("undersized-buffer", id, tag + " holds " + std::to_string(banks) + " banks, needs " + std::to_string(need));
      used[static_cast<std::size_t>(dev.index(t))] += banks;
      rep.total_banks += banks;
      if (dma) rep.dma_banks += banks;

      auto lookup = [&](const detail::EndpointRef& e) -> const TileCoord* {
        if (!e.node) return nullptr;
        auto it = cores.find(e.index);
        if (it == cores.end()) {
          add("unknown-node", id, tag + " references node " + std::to_string(e.index) + " with no core");
          return nullptr;
        }
        return &it->second;
      };
      const TileCoord* pt = lookup(prod);
      const TileCoord* ct = lookup(cons);
      if ((prod.node && !pt) || (cons.node && !ct)) continue;

      if (pt && ct && prod.index != cons.index) {
        const auto acc_p = accessible_modules(dev, *pt);
        const auto acc_c = accessible_modules(dev, *ct);
        bool common = false;
        for (auto m : acc_p) common = common || detail::in_set(acc_c, m);
        if (dma) {
          if (common)
            add("spurious-dma", id, tag + " is marked DMA although its endpoints share a module");
          if (!detail::in_set(acc_c, t))
            add("access", id, tag + " DMA destination " + detail::tile_str(t) + " not reachable by its consumer");
        } else if (!detail::in_set(acc_p, t) || !detail::in_set(acc_c, t)) {
          add("access", id,
              tag + " homed at " + detail::tile_str(t) + " outside the access sets of " + detail::tile_str(*pt) +
                  " and " + detail::tile_str(*ct));
        }
      } else {
        const TileCoord* owner = ct ? ct : pt;
        if (!owner) {
          add("unknown-node", id, tag + " has no core endpoint");
          continue;
        }
        if (dma) add("spurious-dma", id, tag + " is marked DMA but has a single core endpoint");
        if (!detail::in_set(accessible_modules(dev, *owner), t))
          add("access", id, tag + " homed at " + detail::tile_str(t) + " outside the access set of " +
                                detail::tile_str(*owner));
      }
    }

    for (int i = 0; i < dev.cores(); ++i) {
      if (used[static_cast<std::size_t>(i)] > dev.banks_per_tile)
        add("bank-overflow", -1,
            "bank overflow at " + detail::tile_str(dev.coord(i)) + ": " + std::to_string(used[static_cast<std::size_t>(i)]) +
                " > " + std::to_string(dev.banks_per_tile));
    }
    rep.total_banks += static_cast<int>(cores.size()) * dev.reserved_banks_per_core;

    if (doc.contains("ledger")) {
      const auto& ledger = doc.at("ledger");
      for (int r = 0; r < dev.rows && r < static_cast<int>(ledger.size()); ++r)
        for (int c = 0; c < dev.cols && c < static_cast<int>(ledger[static_cast<std::size_t>(r)].size()); ++c) {
          const int claimed = ledger[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<int>();
          const int actual = used[static_cast<std::size_t>(dev.index({r, c}))];
          if (claimed != actual)
            add("ledger-mismatch", -1,
                "ledger says " + std::to_string(claimed) + " banks at " + detail::tile_str({r, c}) + ", buffers add up to " +
                    std::to_string(actual));
        }
    }
    if (doc.contains("dma_edges")) {
      const auto listed = doc.at("dma_edges").get<std::set<int>>();
      if (listed != dma_flagged) add("dma-list-mismatch", -1, "dma_edges disagrees with per-buffer dma flags");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("placement document: ") + e.what());
  }
  return rep;
}

}  // namespace aiemap
