#pragma once

// Text and SVG maps of a placement. Row 0 (next to the interface row) is drawn
// at the bottom.

#include <sstream>
#include <string>
#include <vector>

#include "aiemap/graph.hpp"
#include "aiemap/placement.hpp"

namespace aiemap {

namespace detail {

enum class CellKind { Free, MatMul, Adder };

inline std::vector<CellKind> cell_kinds(const Placement& p, const DataflowGraph& g) {
  std::vector<CellKind> k(static_cast<std::size_t>(p.device.cores()), CellKind::Free);
  for (const auto& n : g.nodes) {
    if (static_cast<std::size_t>(n.id) >= p.core_map.size()) continue;
    k[static_cast<std::size_t>(p.device.index(p.core_map[static_cast<std::size_t>(n.id)]))] =
        n.kind == NodeKind::MatMul ? CellKind::MatMul : CellKind::Adder;
  }
  return k;
}

}  // namespace detail

// 'M' MatMul, 'A' adder tree, 'D' MatMul whose partial sum travels by DMA,
// '.' free tile.
inline std::string render_ascii(const Placement& p, const DataflowGraph& g) {
  const auto& dev = p.device;
  auto kinds = detail::cell_kinds(p, g);
  std::vector<char> glyph(kinds.size(), '.');
  for (std::size_t i = 0; i < kinds.size(); ++i)
    glyph[i] = kinds[i] == detail::CellKind::MatMul ? 'M' : kinds[i] == detail::CellKind::Adder ? 'A' : '.';
  for (int e : p.dma_edges()) {
    const auto& edge = g.edges[static_cast<std::size_t>(e)];
    if (edge.producer.is_node())
      glyph[static_cast<std::size_t>(dev.index(p.core_map[static_cast<std::size_t>(edge.producer.index)]))] = 'D';
  }
  std::ostringstream os;
  for (int r = dev.rows - 1; r >= 0; --r) {
    os << (r < 10 ? " " : "") << r << ' ';
    for (int c = 0; c < dev.cols; ++c) os << glyph[static_cast<std::size_t>(dev.index({r, c}))];
    os << '\n';
  }
  os << "   ";
  for (int c = 0; c < dev.cols; ++c) os << (c % 10);
  os << '\n';
  os << "cores " << p.utilized_cores() << "/" << dev.cores() << ", T-shapes " << p.t_shape_count << ", DMA edges "
     << p.dma_edges().size() << '\n';
  return os.str();
}

inline std::string render_svg(const Placement& p, const DataflowGraph& g) {
  const auto& dev = p.device;
  constexpr int cell = 24;
  constexpr int margin = 20;
  const int width = dev.cols * cell + 2 * margin;
  const int height = dev.rows * cell + 2 * margin;
  auto x_of = [&](TileCoord t) { return margin + t.col * cell; };
  auto y_of = [&](TileCoord t) { return margin + (dev.rows - 1 - t.row) * cell; };

  std::vector<int> group_of(static_cast<std::size_t>(dev.cores()), -1);
  for (const auto& n : g.nodes)
    if (static_cast<std::size_t>(n.id) < p.core_map.size())
      group_of[static_cast<std::size_t>(dev.index(p.core_map[static_cast<std::size_t>(n.id)]))] = g.group_index(n);
  const auto kinds = detail::cell_kinds(p, g);

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (int r = 0; r < dev.rows; ++r)
    for (int c = 0; c < dev.cols; ++c) {
      const TileCoord t{r, c};
      const auto i = static_cast<std::size_t>(dev.index(t));
      std::string fill = "#f4f4f4";
      if (kinds[i] != detail::CellKind::Free) {
        const int hue = (group_of[i] * 47) % 360;
        const int light = kinds[i] == detail::CellKind::Adder ? 45 : 75;
        fill = "hsl(" + std::to_string(hue) + ",60%," + std::to_string(light) + "%)";
      }
      os << "<rect x=\"" << x_of(t) << "\" y=\"" << y_of(t) << "\" width=\"" << cell << "\" height=\"" << cell
         << "\" fill=\"" << fill << "\" stroke=\"#999\" stroke-width=\"0.5\"/>\n";
      if (kinds[i] != detail::CellKind::Free)
        os << "<text x=\"" << x_of(t) + cell / 2 << "\" y=\"" << y_of(t) + cell / 2 + 4
           << "\" font-size=\"10\" text-anchor=\"middle\" font-family=\"monospace\">"
           << (kinds[i] == detail::CellKind::MatMul ? "x" : "+") << "</text>\n";
    }
  // Buffer homes of partial sums: small dots.
  for (const auto& e : g.edges) {
    if (e.role != EdgeRole::Partial) continue;
    const auto home = p.buffer_map[static_cast<std::size_t>(e.id)].module;
    os << "<circle cx=\"" << x_of(home) + 4 << "\" cy=\"" << y_of(home) + 4 << "\" r=\"2\" fill=\"#333\"/>\n";
  }
  for (int id : p.dma_edges()) {
    const auto& e = g.edges[static_cast<std::size_t>(id)];
    if (!e.producer.is_node() || !e.consumer.is_node()) continue;
    const auto a = p.core_map[static_cast<std::size_t>(e.producer.index)];
    const auto b = p.core_map[static_cast<std::size_t>(e.consumer.index)];
    os << "<line x1=\"" << x_of(a) + cell / 2 << "\" y1=\"" << y_of(a) + cell / 2 << "\" x2=\"" << x_of(b) + cell / 2
       << "\" y2=\"" << y_of(b) + cell / 2 << "\" stroke=\"#d62728\" stroke-width=\"2\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace aiemap
