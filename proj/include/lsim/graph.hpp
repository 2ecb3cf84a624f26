#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "lsim/layout.hpp"

namespace lsim {

enum class GraphMode : uint8_t { FullyConnected, Adjacency };

struct NodeFeature {
    int32_t category = 0;
    std::array<double, 5> geometry{};
};

struct EdgeFeature {
    std::array<double, 8> v{};
};

struct GraphEdge {
    int32_t src = 0, dst = 0;
    EdgeFeature feat;
};

struct LayoutGraph {
    std::string layout_id;
    int32_t categories = 0;
    GraphMode mode = GraphMode::FullyConnected;
    std::vector<NodeFeature> nodes;
    std::vector<GraphEdge> edges;
    // When set, the encoder substitutes a neutral vector for every semantic
    // embedding, so matching runs on geometry alone.
    bool semantics_masked = false;
};

// [x/W, y/H, w/W, h/H, wh/sqrt(WH)]; first four clamped to [0,1].
std::array<double, 5> node_geometry(const Element& e, double W, double H);

// [dx/sqrt(Ai), dy/sqrt(Ai), sqrt(Aj/Ai), iou, wi/hi, wj/hj,
//  dist/sqrt(W^2+H^2), theta] with dx = xj-xi, theta = atan2(dy,dx),
// theta(0,0) = 0.
std::array<double, 8> edge_vector(const Element& ei, const Element& ej, double W, double H);

// Exact intersection-over-union of two axis-aligned boxes.
double box_iou(const Element& a, const Element& b);

// FullyConnected: every ordered pair, no self-loops. Adjacency: ordered pair
// (i,j) present iff the boxes overlap or their boundary gap is at most
// adjacency_eps * max(W,H); symmetric by construction.
LayoutGraph build_graph(const Layout& l, GraphMode mode = GraphMode::FullyConnected,
                        double adjacency_eps = 0.02);

LayoutGraph mask_semantics(LayoutGraph g);

nlohmann::json graph_to_json(const LayoutGraph& g);

}  // namespace lsim
