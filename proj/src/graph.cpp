#include "lsim/graph.hpp"

#include <algorithm>
#include <cmath>

#include "lsim/common.hpp"

namespace lsim {

std::array<double, 5> node_geometry(const Element& e, double W, double H) {
    auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
    return {clamp01(e.x / W), clamp01(e.y / H), clamp01(e.w / W), clamp01(e.h / H),
            e.w * e.h / std::sqrt(W * H)};
}

double box_iou(const Element& a, const Element& b) {
    const double ix = std::max(0.0, std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0()));
    const double iy = std::max(0.0, std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0()));
    const double inter = ix * iy;
    // Sum the areas smaller-first so iou(a,b) and iou(b,a) run through
    // identical operations and stay bitwise equal under fp contraction.
    const double lo = std::min(a.area(), b.area());
    const double hi = std::max(a.area(), b.area());
    const double uni = lo + hi - inter;
    return uni > 0 ? inter / uni : 0.0;
}

std::array<double, 8> edge_vector(const Element& ei, const Element& ej, double W, double H) {
    const double dx = ej.x - ei.x, dy = ej.y - ei.y;
    const double ra = std::sqrt(ei.area());
    const double dist = std::sqrt(dx * dx + dy * dy);
    const double theta = (dx == 0.0 && dy == 0.0) ? 0.0 : std::atan2(dy, dx);
    return {dx / ra,
            dy / ra,
            std::sqrt(ej.area() / ei.area()),
            box_iou(ei, ej),
            ei.w / ei.h,
            ej.w / ej.h,
            dist / std::sqrt(W * W + H * H),
            theta};
}

namespace {

// Shortest distance between the boundaries of two boxes; 0 when they touch
// or overlap.
double boundary_gap(const Element& a, const Element& b) {
    const double gx = std::max({a.x0() - b.x1(), b.x0() - a.x1(), 0.0});
    const double gy = std::max({a.y0() - b.y1(), b.y0() - a.y1(), 0.0});
    return std::sqrt(gx * gx + gy * gy);
}

}  // namespace

LayoutGraph build_graph(const Layout& l, GraphMode mode, double adjacency_eps) {
    if (l.elements.empty()) throw DataError("build_graph: layout \"" + l.id + "\" has no elements");
    LayoutGraph g;
    g.layout_id = l.id;
    g.categories = l.categories;
    g.mode = mode;
    const int32_t n = int32_t(l.elements.size());
    g.nodes.reserve(n);
    for (const Element& e : l.elements)
        g.nodes.push_back({e.category, node_geometry(e, l.width, l.height)});
    const double gap_limit = adjacency_eps * std::max(l.width, l.height);
    for (int32_t i = 0; i < n; ++i) {
        for (int32_t j = 0; j < n; ++j) {
            if (i == j) continue;
            if (mode == GraphMode::Adjacency &&
                boundary_gap(l.elements[i], l.elements[j]) > gap_limit)
                continue;
            g.edges.push_back(
                {i, j, {edge_vector(l.elements[i], l.elements[j], l.width, l.height)}});
        }
    }
    return g;
}

LayoutGraph mask_semantics(LayoutGraph g) {
    g.semantics_masked = true;
    return g;
}

nlohmann::json graph_to_json(const LayoutGraph& g) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const NodeFeature& n : g.nodes)
        nodes.push_back({{"category", n.category}, {"geometry", n.geometry}});
    nlohmann::json edges = nlohmann::json::array();
    for (const GraphEdge& e : g.edges)
        edges.push_back({{"src", e.src}, {"dst", e.dst}, {"vector", e.feat.v}});
    return {{"layout_id", g.layout_id},
            {"mode", g.mode == GraphMode::FullyConnected ? "fully_connected" : "adjacency"},
            {"nodes", nodes},
            {"edges", edges}};
}

}  // namespace lsim
