#include "lsim/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <unordered_map>

#include "lsim/common.hpp"
#include "lsim/kernels.hpp"
#include "lsim/rng.hpp"

namespace lsim {

void TrainConfig::validate() const {
    if (!(margin > 0)) throw DataError("train config: margin must be > 0");
    if (!(positive_threshold > 0 && positive_threshold < 1))
        throw DataError("train config: positive_threshold must be in (0,1)");
    if (!(gap > 0)) throw DataError("train config: gap must be > 0");
    if (!(learning_rate >= 0)) throw DataError("train config: learning_rate must be >= 0");
    if (batch_size < 1) throw DataError("train config: batch_size must be >= 1");
    if (epochs < 0) throw DataError("train config: epochs must be >= 0");
}

TripletSet mine_triplets(const std::vector<Layout>& dataset, const TrainConfig& cfg,
                         int32_t resolution, int32_t max_per_anchor) {
    cfg.validate();
    if (dataset.size() < 3) throw DataError("mine_triplets: need at least 3 layouts");
    if (max_per_anchor < 1) throw DataError("mine_triplets: max_per_anchor must be >= 1");
    const int64_t n = int64_t(dataset.size());

    std::vector<MultiChannelMask> masks(n);
    const int threads = kern::max_threads();
#pragma omp parallel for schedule(static) num_threads(threads)
    for (int64_t i = 0; i < n; ++i) masks[i] = rasterize(dataset[i], resolution);

    std::vector<double> iou(n * n, 0.0);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = i + 1; j < n; ++j) {
            const double v = iou_from_masks(masks[i], masks[j], cfg.iou_mode);
            iou[i * n + j] = v;
            iou[j * n + i] = v;
        }

    Rng mine_rng(cfg.seed);
    Rng base = mine_rng.fork("mine");
    TripletSet out;
    for (int64_t a = 0; a < n; ++a) {
        std::vector<int64_t> positives;
        for (int64_t p = 0; p < n; ++p)
            if (p != a && iou[a * n + p] >= cfg.positive_threshold) positives.push_back(p);
        if (positives.empty()) continue;
        Rng ar = base.fork(dataset[a].id);
        std::set<std::pair<int64_t, int64_t>> seen;
        int32_t emitted = 0;
        for (int32_t attempt = 0; attempt < 4 * max_per_anchor && emitted < max_per_anchor;
             ++attempt) {
            const int64_t p = positives[int64_t(ar.uniform_int(positives.size()))];
            const double iou_ap = iou[a * n + p];
            const double limit = cfg.negative_rule == NegativeRule::Relative
                                     ? iou_ap - cfg.gap
                                     : cfg.positive_threshold - cfg.gap;
            std::vector<int64_t> negatives;
            for (int64_t x = 0; x < n; ++x)
                if (x != a && x != p && iou[a * n + x] <= limit) negatives.push_back(x);
            if (negatives.empty()) continue;
            const int64_t neg = negatives[int64_t(ar.uniform_int(negatives.size()))];
            if (!seen.insert({p, neg}).second) continue;
            out.push_back({dataset[a].id, dataset[p].id, dataset[neg].id, iou_ap,
                           iou[a * n + neg]});
            ++emitted;
        }
    }
    return out;
}

double triplet_loss(double d_ap, double d_an, double margin) {
    return std::max(0.0, margin + d_ap - d_an);
}

namespace {

struct Optimizer {
    OptimizerKind kind;
    double lr, b1, b2, eps;
    int64_t step_count = 0;
    std::vector<Tensor> m, v;

    void step(std::vector<std::pair<std::string, Tensor*>>& params,
              const std::vector<Tensor>& grads) {
        if (m.empty() && kind == OptimizerKind::Adam) {
            for (auto& [name, t] : params) {
                m.push_back(Tensor::zeros(t->shape()));
                v.push_back(Tensor::zeros(t->shape()));
            }
        }
        ++step_count;
        for (size_t i = 0; i < params.size(); ++i) {
            double* p = params[i].second->data();
            const double* g = grads[i].data();
            const int64_t len = grads[i].numel();
            if (kind == OptimizerKind::Sgd) {
                for (int64_t j = 0; j < len; ++j) p[j] -= lr * g[j];
                continue;
            }
            double* mi = m[i].data();
            double* vi = v[i].data();
            const double c1 = 1.0 - std::pow(b1, double(step_count));
            const double c2 = 1.0 - std::pow(b2, double(step_count));
            for (int64_t j = 0; j < len; ++j) {
                mi[j] = b1 * mi[j] + (1.0 - b1) * g[j];
                vi[j] = b2 * vi[j] + (1.0 - b2) * g[j] * g[j];
                p[j] -= lr * (mi[j] / c1) / (std::sqrt(vi[j] / c2) + eps);
            }
        }
    }
};

}  // namespace

std::vector<EpochLog> train(ModelParams& p, const std::vector<Layout>& dataset,
                            const TripletSet& triplets, const TrainConfig& cfg) {
    cfg.validate();
    p.validate();
    if (triplets.empty()) throw DataError("train: empty triplet set");

    std::unordered_map<std::string, size_t> by_id;
    for (size_t i = 0; i < dataset.size(); ++i) by_id[dataset[i].id] = i;
    std::vector<LayoutGraph> graphs(dataset.size());
    std::vector<bool> built(dataset.size(), false);
    auto graph_for = [&](const std::string& id) -> const LayoutGraph& {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw DataError("train: triplet references unknown layout \"" + id + "\"");
        if (!built[it->second]) {
            graphs[it->second] = build_graph(dataset[it->second], cfg.graph_mode, cfg.adjacency_eps);
            built[it->second] = true;
        }
        return graphs[it->second];
    };
    for (const Triplet& t : triplets) {
        graph_for(t.anchor_id);
        graph_for(t.positive_id);
        graph_for(t.negative_id);
    }

    auto params = p.named_tensors();
    Optimizer opt{cfg.optimizer, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
    Rng order_rng = Rng(cfg.seed).fork("train.order");
    std::vector<size_t> order(triplets.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<Tensor> batch_grads;
    for (auto& [name, t] : params) batch_grads.push_back(Tensor::zeros(t->shape()));

    std::vector<EpochLog> log;
    int64_t step = 0;
    for (int32_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        order_rng.shuffle(order);
        double loss_sum = 0.0;
        int64_t correct = 0;
        for (size_t start = 0; start < order.size(); start += size_t(cfg.batch_size)) {
            const size_t stop = std::min(order.size(), start + size_t(cfg.batch_size));
            const double inv_batch = 1.0 / double(stop - start);
            for (Tensor& g : batch_grads) std::fill(g.vec().begin(), g.vec().end(), 0.0);
            for (size_t bi = start; bi < stop; ++bi) {
                const Triplet& trip = triplets[order[bi]];
                ++step;
                try {
                    Tape tape;
                    TapedModel tm = register_model(tape, p);
                    TapedGraph anchor = encode_on_tape(tape, tm, p.cfg, graph_for(trip.anchor_id));
                    PairOnTape ap = match_pair_from_states(
                        tape, tm, p.cfg, anchor, encode_on_tape(tape, tm, p.cfg, graph_for(trip.positive_id)));
                    PairOnTape an = match_pair_from_states(
                        tape, tm, p.cfg, anchor, encode_on_tape(tape, tm, p.cfg, graph_for(trip.negative_id)));
                    ValueId loss_id =
                        tape.relu(tape.add_scalar(tape.sub(ap.dist, an.dist), cfg.margin));
                    const double d_ap = tape.val(ap.dist).scalar_value();
                    const double d_an = tape.val(an.dist).scalar_value();
                    const double loss = tape.val(loss_id).scalar_value();
                    if (!std::isfinite(loss)) throw NumericError("loss is not finite");
                    loss_sum += loss;
                    if (d_ap < d_an) ++correct;
                    if (loss > 0.0) {
                        // Inactive triplets have an exactly-zero gradient, so
                        // the backward sweep is skipped for them.
                        tape.backward(loss_id);
                        const auto leaf_ids = model_leaf_ids(tm);
                        for (size_t li = 0; li < leaf_ids.size(); ++li) {
                            const Tensor& g = tape.grad(leaf_ids[li]);
                            double* acc = batch_grads[li].data();
                            const double* src = g.data();
                            for (int64_t j = 0; j < g.numel(); ++j) acc[j] += inv_batch * src[j];
                        }
                    }
                } catch (const NumericError& e) {
                    throw NumericError("training step " + std::to_string(step) + " (anchor=" +
                                       trip.anchor_id + ", positive=" + trip.positive_id +
                                       ", negative=" + trip.negative_id + "): " + e.what());
                }
            }
            opt.step(params, batch_grads);
        }
        log.push_back({epoch, loss_sum / double(triplets.size()),
                       double(correct) / double(triplets.size())});
    }
    return log;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void save_triplets(const std::string& path, const TripletSet& ts) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    for (const Triplet& t : ts)
        out << t.anchor_id << '\t' << t.positive_id << '\t' << t.negative_id << '\t'
            << fmt_double(t.iou_ap) << '\t' << fmt_double(t.iou_an) << '\n';
}

TripletSet load_triplets(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    TripletSet out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        size_t pos = 0;
        while (true) {
            const size_t tab = line.find('\t', pos);
            fields.push_back(line.substr(pos, tab == std::string::npos ? tab : tab - pos));
            if (tab == std::string::npos) break;
            pos = tab + 1;
        }
        if (fields.size() != 5)
            throw DataError(path + ":" + std::to_string(lineno) + ": expected 5 tab-separated fields");
        Triplet t;
        t.anchor_id = fields[0];
        t.positive_id = fields[1];
        t.negative_id = fields[2];
        try {
            t.iou_ap = std::stod(fields[3]);
            t.iou_an = std::stod(fields[4]);
        } catch (const std::exception&) {
            throw DataError(path + ":" + std::to_string(lineno) + ": bad IoU value");
        }
        out.push_back(std::move(t));
    }
    return out;
}

void save_loss_log(const std::string& path, const std::vector<EpochLog>& log) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "epoch,mean_loss,triplet_accuracy\n";
    for (const EpochLog& e : log)
        out << e.epoch << ',' << fmt_double(e.mean_loss) << ',' << fmt_double(e.triplet_accuracy)
            << '\n';
}

}  // namespace lsim
