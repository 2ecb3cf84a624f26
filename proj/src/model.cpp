#include "lsim/model.hpp"

#include <cmath>

#include "lsim/common.hpp"

namespace lsim {

namespace {

void check_mlp(const MlpParams& m, int64_t in, int64_t out, const char* name) {
    m.validate();
    if (m.in_dim() != in || m.out_dim() != out)
        throw DimError(std::string(name) + ": expected " + std::to_string(in) + "->" +
                       std::to_string(out) + ", got " + std::to_string(m.in_dim()) + "->" +
                       std::to_string(m.out_dim()));
}

}  // namespace

void ModelParams::validate() const {
    const int64_t d = cfg.node_dim, D = cfg.graph_dim;
    if (cfg.categories < 1) throw DimError("model: categories must be >= 1");
    if (cfg.rounds < 1) throw DimError("model: rounds must be >= 1");
    if (semantic_table.rows() != cfg.categories || semantic_table.cols() != d)
        throw DimError("model: semantic_table shape " + semantic_table.shape_str());
    check_mlp(geo_mlp, 5, d, "geo_mlp");
    check_mlp(node_mlp, 2 * d, d, "node_mlp");
    check_mlp(edge_mlp, 8, d, "edge_mlp");
    check_mlp(intra_mlp, 3 * d, d, "intra_mlp");
    check_mlp(update_mlp, 3 * d, d, "update_mlp");
    check_mlp(gate_mlp, d, D, "gate_mlp");
    check_mlp(value_mlp, d, D, "value_mlp");
    check_mlp(out_mlp, D, D, "out_mlp");
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::named_tensors() {
    std::vector<std::pair<std::string, Tensor*>> out;
    out.emplace_back("semantic_table", &semantic_table);
    auto add = [&out](const char* name, MlpParams& m) {
        for (size_t i = 0; i < m.layers.size(); ++i) {
            out.emplace_back(std::string(name) + ".w" + std::to_string(i), &m.layers[i].w);
            out.emplace_back(std::string(name) + ".b" + std::to_string(i), &m.layers[i].b);
        }
    };
    add("geo_mlp", geo_mlp);
    add("node_mlp", node_mlp);
    add("edge_mlp", edge_mlp);
    add("intra_mlp", intra_mlp);
    add("update_mlp", update_mlp);
    add("gate_mlp", gate_mlp);
    add("value_mlp", value_mlp);
    add("out_mlp", out_mlp);
    return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named_tensors() const {
    auto mut = const_cast<ModelParams*>(this)->named_tensors();
    std::vector<std::pair<std::string, const Tensor*>> out;
    out.reserve(mut.size());
    for (auto& [n, t] : mut) out.emplace_back(std::move(n), t);
    return out;
}

int64_t ModelParams::parameter_count() const {
    int64_t n = 0;
    for (const auto& [name, t] : named_tensors()) n += t->numel();
    return n;
}

ModelParams init_params(const ModelConfig& cfg, uint64_t seed) {
    const int64_t d = cfg.node_dim, D = cfg.graph_dim;
    Rng root(seed);
    ModelParams p;
    p.cfg = cfg;
    p.semantic_table = Tensor::zeros({cfg.categories, d});
    {
        Rng tr = root.fork("semantic_table");
        const double limit = std::sqrt(6.0 / double(cfg.categories + d));
        for (double& v : p.semantic_table.vec()) v = tr.uniform(-limit, limit);
    }
    p.geo_mlp = make_mlp({5, d, d}, root.fork("geo_mlp"));
    p.node_mlp = make_mlp({2 * d, d, d}, root.fork("node_mlp"));
    p.edge_mlp = make_mlp({8, d, d}, root.fork("edge_mlp"));
    p.intra_mlp = make_mlp({3 * d, d, d}, root.fork("intra_mlp"));
    p.update_mlp = make_mlp({3 * d, d, d}, root.fork("update_mlp"));
    p.gate_mlp = make_mlp({d, D}, root.fork("gate_mlp"));
    p.value_mlp = make_mlp({d, D}, root.fork("value_mlp"));
    p.out_mlp = make_mlp({D, D}, root.fork("out_mlp"));
    // The final projection starts at 1% of its Glorot scale. Fresh-init pair
    // distances then sit near the triplet margin instead of orders of
    // magnitude above it, so the hinge carries gradient from the first step;
    // the optimizer is free to grow the scale back as training needs it.
    for (double& v : p.out_mlp.layers[0].w.vec()) v *= 0.01;
    p.validate();
    return p;
}

TapedModel register_model(Tape& t, const ModelParams& p) {
    p.validate();
    const int64_t d = p.cfg.node_dim;
    TapedModel m;
    m.table = t.leaf(p.semantic_table);
    m.geo = register_mlp(t, p.geo_mlp);
    m.node = register_mlp(t, p.node_mlp);
    m.edge = register_mlp(t, p.edge_mlp);
    m.intra = register_mlp(t, p.intra_mlp);
    m.update = register_mlp(t, p.update_mlp);
    m.gate = register_mlp(t, p.gate_mlp);
    m.value = register_mlp(t, p.value_mlp);
    m.out = register_mlp(t, p.out_mlp);
    // The first propagation layers act on [h_dst | h_src | code] and
    // [h | msg | cross]; slicing the weights lets each block be applied to
    // its source matrix directly instead of materializing per-edge concats.
    m.intra_w_self = t.slice_cols(m.intra.layers[0].w, 0, d);
    m.intra_w_nbr = t.slice_cols(m.intra.layers[0].w, d, 2 * d);
    m.intra_w_edge = t.slice_cols(m.intra.layers[0].w, 2 * d, 3 * d);
    m.update_w_self = t.slice_cols(m.update.layers[0].w, 0, d);
    m.update_w_msg = t.slice_cols(m.update.layers[0].w, d, 2 * d);
    m.update_w_cross = t.slice_cols(m.update.layers[0].w, 2 * d, 3 * d);
    return m;
}

namespace {

Tensor geometry_matrix(const LayoutGraph& g, bool use_positions) {
    Tensor x = Tensor::zeros({int64_t(g.nodes.size()), 5});
    if (use_positions)
        for (size_t i = 0; i < g.nodes.size(); ++i)
            for (int j = 0; j < 5; ++j) x.at(int64_t(i), j) = g.nodes[i].geometry[j];
    return x;
}

Tensor edge_matrix(const LayoutGraph& g) {
    Tensor x = Tensor::zeros({int64_t(g.edges.size()), 8});
    for (size_t e = 0; e < g.edges.size(); ++e)
        for (int j = 0; j < 8; ++j) x.at(int64_t(e), j) = g.edges[e].feat.v[j];
    return x;
}

// Second layer of a 2-layer MLP whose first-layer output is already built.
ValueId finish_two_layer(Tape& t, const MlpIds& ids, ValueId first_pre) {
    ValueId a = t.relu(first_pre);
    const MlpIds::Layer& l1 = ids.layers[1];
    ValueId out = t.add_row(t.matmul_nt(a, l1.w), l1.b);
    if (l1.act == Activation::Relu) out = t.relu(out);
    return out;
}

// Incoming-message sum for one graph from its pre-round states. The first
// layer runs on the node states and is gathered per edge afterwards, so the
// big matmuls stay node-count sized; gather_mix fuses the per-edge assembly.
ValueId message_sum(Tape& t, const TapedModel& m, const TapedGraph& g) {
    ValueId hw_self = t.matmul_nt(g.h, m.intra_w_self);
    ValueId hw_nbr = t.matmul_nt(g.h, m.intra_w_nbr);
    ValueId hidden = t.gather_mix(hw_self, hw_nbr, g.edge_part, m.intra.layers[0].b, g.dst, g.src);
    const MlpIds::Layer& l1 = m.intra.layers[1];
    ValueId per_edge = t.add_row(t.matmul_nt(hidden, l1.w), l1.b);
    if (l1.act == Activation::Relu) per_edge = t.relu(per_edge);
    return t.segment_sum_rows(per_edge, g.dst, g.n);
}

ValueId update_states(Tape& t, const TapedModel& m, const TapedGraph& g, ValueId msg,
                      ValueId cross) {
    ValueId acc = t.matmul_nt(g.h, m.update_w_self);
    if (msg >= 0) acc = t.add(acc, t.matmul_nt(msg, m.update_w_msg));
    acc = t.add(acc, t.matmul_nt(cross, m.update_w_cross));
    ValueId first = t.add_row(acc, m.update.layers[0].b);
    return finish_two_layer(t, m.update, first);
}

ValueId aggregate_on_tape(Tape& t, const TapedModel& m, ValueId h) {
    ValueId gates = t.sigmoid(mlp_apply(t, m.gate, h));
    ValueId vals = mlp_apply(t, m.value, h);
    ValueId pooled = t.sum_rows(t.mul(gates, vals));
    return mlp_apply(t, m.out, pooled);
}

}  // namespace

TapedGraph encode_on_tape(Tape& t, const TapedModel& m, const ModelConfig& cfg,
                          const LayoutGraph& g) {
    if (g.nodes.empty()) throw DataError("encode: graph \"" + g.layout_id + "\" has no nodes");
    const int64_t d = cfg.node_dim;
    TapedGraph tg;
    tg.n = int32_t(g.nodes.size());

    ValueId geo = mlp_apply(t, m.geo, t.constant(geometry_matrix(g, cfg.use_positions)));
    ValueId sem;
    if (g.semantics_masked) {
        sem = t.constant(Tensor({tg.n, d}, std::vector<double>(tg.n * d, 1.0)));
    } else if (!cfg.use_semantics) {
        sem = t.constant(Tensor::zeros({tg.n, d}));
    } else {
        std::vector<int32_t> cats(g.nodes.size());
        for (size_t i = 0; i < g.nodes.size(); ++i) {
            const int32_t c = g.nodes[i].category;
            if (c < 0 || c >= cfg.categories)
                throw DataError("encode: graph \"" + g.layout_id + "\" node " +
                                std::to_string(i) + " category " + std::to_string(c) +
                                " out of range [0, " + std::to_string(cfg.categories) + ")");
            cats[i] = c;
        }
        sem = t.gather_rows(m.table, std::move(cats));
    }
    tg.h = mlp_apply(t, m.node, t.concat_cols(geo, sem));

    if (cfg.use_edges && !g.edges.empty()) {
        tg.src.reserve(g.edges.size());
        tg.dst.reserve(g.edges.size());
        for (const GraphEdge& e : g.edges) {
            tg.src.push_back(e.src);
            tg.dst.push_back(e.dst);
        }
        tg.edge_codes = mlp_apply(t, m.edge, t.constant(edge_matrix(g)));
        // Edge codes never change across rounds, so their share of the
        // message MLP's first layer is computed once here.
        tg.edge_part = t.matmul_nt(tg.edge_codes, m.intra_w_edge);
    }
    return tg;
}

PairOnTape match_pair_on_tape(Tape& t, const TapedModel& m, const ModelConfig& cfg,
                              const LayoutGraph& a, const LayoutGraph& b) {
    if (a.categories != b.categories)
        throw DimError("match_pair: category counts differ (" + std::to_string(a.categories) +
                       " vs " + std::to_string(b.categories) + ")");
    TapedGraph g1 = encode_on_tape(t, m, cfg, a);
    TapedGraph g2 = encode_on_tape(t, m, cfg, b);
    return match_pair_from_states(t, m, cfg, std::move(g1), std::move(g2));
}

PairOnTape match_pair_from_states(Tape& t, const TapedModel& m, const ModelConfig& cfg,
                                  TapedGraph g1, TapedGraph g2) {
    PairOnTape out;
    for (int32_t round = 0; round < cfg.rounds; ++round) {
        ValueId msg1 = g1.edge_part >= 0 ? message_sum(t, m, g1) : -1;
        ValueId msg2 = g2.edge_part >= 0 ? message_sum(t, m, g2) : -1;
        ValueId attn12 = t.softmax_rows(t.matmul_nt(g1.h, g2.h));
        ValueId attn21 = t.softmax_rows(t.matmul_nt(g2.h, g1.h));
        ValueId cross1 = t.sub(g1.h, t.matmul(attn12, g2.h));
        ValueId cross2 = t.sub(g2.h, t.matmul(attn21, g1.h));
        ValueId h1_new = update_states(t, m, g1, msg1, cross1);
        ValueId h2_new = update_states(t, m, g2, msg2, cross2);
        g1.h = h1_new;
        g2.h = h2_new;
        out.attention.emplace_back(attn12, attn21);
    }
    out.hg1 = aggregate_on_tape(t, m, g1.h);
    out.hg2 = aggregate_on_tape(t, m, g2.h);
    out.dist = t.l2_norm(t.sub(out.hg1, out.hg2));
    return out;
}

MatchResult match_pair(const LayoutGraph& a, const LayoutGraph& b, const ModelParams& p) {
    Tape t;
    TapedModel m = register_model(t, p);
    PairOnTape pair = match_pair_on_tape(t, m, p.cfg, a, b);
    MatchResult r;
    r.h_g1 = t.val(pair.hg1);
    r.h_g2 = t.val(pair.hg2);
    r.distance = t.val(pair.dist).scalar_value();
    for (const auto& [a12, a21] : pair.attention) r.attention.emplace_back(t.val(a12), t.val(a21));
    return r;
}

std::vector<ValueId> model_leaf_ids(const TapedModel& m) {
    std::vector<ValueId> ids;
    ids.push_back(m.table);
    for (const MlpIds* mlp : {&m.geo, &m.node, &m.edge, &m.intra, &m.update, &m.gate, &m.value,
                              &m.out})
        for (const MlpIds::Layer& l : mlp->layers) {
            ids.push_back(l.w);
            ids.push_back(l.b);
        }
    return ids;
}

double pair_distance(const MatchResult& r) {
    if (!r.h_g1.same_shape(r.h_g2)) throw DimError("pair_distance: embedding shape mismatch");
    double s = 0.0;
    for (int64_t i = 0; i < r.h_g1.numel(); ++i) {
        const double d = r.h_g1.vec()[i] - r.h_g2.vec()[i];
        s += d * d;
    }
    return std::sqrt(s);
}

std::pair<Tensor, Tensor> encode(const LayoutGraph& g, const ModelParams& p) {
    Tape t;
    TapedModel m = register_model(t, p);
    TapedGraph tg = encode_on_tape(t, m, p.cfg, g);
    Tensor codes = tg.edge_codes >= 0 ? t.val(tg.edge_codes)
                                      : Tensor::zeros({0, p.cfg.node_dim});
    return {t.val(tg.h), std::move(codes)};
}

RoundResult propagate_round(const Tensor& h1, const LayoutGraph& g1, const Tensor& r1,
                            const Tensor& h2, const LayoutGraph& g2, const Tensor& r2,
                            const ModelParams& p) {
    Tape t;
    TapedModel m = register_model(t, p);
    auto prep = [&](const Tensor& h, const LayoutGraph& g, const Tensor& r) {
        TapedGraph tg;
        tg.n = int32_t(h.rows());
        tg.h = t.leaf(h);
        if (p.cfg.use_edges && r.rows() > 0) {
            if (int64_t(g.edges.size()) != r.rows())
                throw DimError("propagate_round: edge codes do not match edge list");
            for (const GraphEdge& e : g.edges) {
                tg.src.push_back(e.src);
                tg.dst.push_back(e.dst);
            }
            tg.edge_codes = t.leaf(r);
            tg.edge_part = t.matmul_nt(tg.edge_codes, m.intra_w_edge);
        }
        return tg;
    };
    TapedGraph a = prep(h1, g1, r1);
    TapedGraph b = prep(h2, g2, r2);
    ValueId msg1 = a.edge_part >= 0 ? message_sum(t, m, a) : -1;
    ValueId msg2 = b.edge_part >= 0 ? message_sum(t, m, b) : -1;
    ValueId attn12 = t.softmax_rows(t.matmul_nt(a.h, b.h));
    ValueId attn21 = t.softmax_rows(t.matmul_nt(b.h, a.h));
    ValueId cross1 = t.sub(a.h, t.matmul(attn12, b.h));
    ValueId cross2 = t.sub(b.h, t.matmul(attn21, a.h));
    RoundResult out;
    out.h1 = t.val(update_states(t, m, a, msg1, cross1));
    out.h2 = t.val(update_states(t, m, b, msg2, cross2));
    out.attn_12 = t.val(attn12);
    out.attn_21 = t.val(attn21);
    return out;
}

Tensor aggregate(const Tensor& h, const ModelParams& p) {
    Tape t;
    TapedModel m = register_model(t, p);
    return t.val(aggregate_on_tape(t, m, t.leaf(h)));
}

}  // namespace lsim
