#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lsim/graph.hpp"
#include "lsim/mlp.hpp"
#include "lsim/tape.hpp"
#include "lsim/tensor.hpp"

namespace lsim {

struct ModelConfig {
    int32_t categories = 9;
    int32_t node_dim = 128;   // width of node/edge codes
    int32_t graph_dim = 1024; // width of the graph embedding
    int32_t rounds = 5;
    bool use_edges = true;
    bool use_positions = true;
    bool use_semantics = true;
};

struct ModelParams {
    ModelConfig cfg;
    Tensor semantic_table;  // categories x node_dim
    MlpParams geo_mlp;      // 5 -> d -> d
    MlpParams node_mlp;     // 2d -> d -> d
    MlpParams edge_mlp;     // 8 -> d -> d
    MlpParams intra_mlp;    // 3d -> d -> d, input [h_dst | h_src | edge code]
    MlpParams update_mlp;   // 3d -> d -> d, input [h | msg sum | attention residual]
    MlpParams gate_mlp;     // d -> D, single affine (sigmoid applied outside)
    MlpParams value_mlp;    // d -> D, single affine
    MlpParams out_mlp;      // D -> D, single affine

    void validate() const;
    // Every learnable tensor in a fixed order; checkpointing, the optimizer
    // and gradient checks all key off this order.
    std::vector<std::pair<std::string, Tensor*>> named_tensors();
    std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;
    int64_t parameter_count() const;
};

ModelParams init_params(const ModelConfig& cfg, uint64_t seed);

struct MatchResult {
    Tensor h_g1, h_g2;  // 1 x graph_dim
    double distance = 0.0;
    // attention[t] = (g1-over-g2: n1 x n2, g2-over-g1: n2 x n1)
    std::vector<std::pair<Tensor, Tensor>> attention;
};

MatchResult match_pair(const LayoutGraph& a, const LayoutGraph& b, const ModelParams& p);
double pair_distance(const MatchResult& r);

// --- tape-level building blocks (used by training and the wrappers below) ---

// Model leaves registered on one tape, plus column slices of the first
// propagation layers so the three concat blocks can be applied separately.
struct TapedModel {
    ValueId table = -1;
    MlpIds geo, node, edge, intra, update, gate, value, out;
    ValueId intra_w_self = -1, intra_w_nbr = -1, intra_w_edge = -1;
    ValueId update_w_self = -1, update_w_msg = -1, update_w_cross = -1;
};

TapedModel register_model(Tape& t, const ModelParams& p);

struct TapedGraph {
    int32_t n = 0;
    std::vector<int32_t> src, dst;
    ValueId h = -1;          // current node states, n x d
    ValueId edge_codes = -1; // E x d, -1 when edges are off or absent
    ValueId edge_part = -1;  // E x d, edge-code term of the message MLP's first layer
};

TapedGraph encode_on_tape(Tape& t, const TapedModel& m, const ModelConfig& cfg,
                          const LayoutGraph& g);

struct PairOnTape {
    ValueId hg1 = -1, hg2 = -1, dist = -1;
    std::vector<std::pair<ValueId, ValueId>> attention;  // per round
};

PairOnTape match_pair_on_tape(Tape& t, const TapedModel& m, const ModelConfig& cfg,
                              const LayoutGraph& a, const LayoutGraph& b);

// Same, starting from already-encoded graphs; lets a triplet share the
// anchor's encoding between its two pairs on one tape.
PairOnTape match_pair_from_states(Tape& t, const TapedModel& m, const ModelConfig& cfg,
                                  TapedGraph g1, TapedGraph g2);

// Parameter-leaf ids of a registered model in named_tensors() order.
std::vector<ValueId> model_leaf_ids(const TapedModel& m);

// --- stand-alone stage wrappers (each runs its own private tape) ---

// Node states h0 (n x d) and edge codes (E x d; 0 x d when absent).
std::pair<Tensor, Tensor> encode(const LayoutGraph& g, const ModelParams& p);

struct RoundResult {
    Tensor h1, h2;
    Tensor attn_12, attn_21;
};

// One synchronized propagation round from explicit pre-round states.
RoundResult propagate_round(const Tensor& h1, const LayoutGraph& g1, const Tensor& r1,
                            const Tensor& h2, const LayoutGraph& g2, const Tensor& r2,
                            const ModelParams& p);

// Gated sum over node states -> 1 x graph_dim embedding.
Tensor aggregate(const Tensor& h, const ModelParams& p);

}  // namespace lsim
