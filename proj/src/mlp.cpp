#include "lsim/mlp.hpp"

#include <cmath>

#include "lsim/common.hpp"
#include "lsim/kernels.hpp"

namespace lsim {

void MlpParams::validate() const {
    if (layers.empty()) throw DimError("mlp has no layers");
    for (size_t i = 0; i < layers.size(); ++i) {
        const MlpLayer& l = layers[i];
        if (l.w.shape().size() != 2)
            throw DimError("mlp layer " + std::to_string(i) + ": weight must be rank 2");
        if (l.b.rows() != 1 || l.b.cols() != l.w.rows())
            throw DimError("mlp layer " + std::to_string(i) + ": bias shape " + l.b.shape_str() +
                           " does not match weight " + l.w.shape_str());
        if (i > 0 && l.w.cols() != layers[i - 1].w.rows())
            throw DimError("mlp layer " + std::to_string(i) + ": input dim " +
                           std::to_string(l.w.cols()) + " does not chain with previous output " +
                           std::to_string(layers[i - 1].w.rows()));
    }
}

MlpParams make_mlp(const std::vector<int64_t>& dims, Rng rng) {
    if (dims.size() < 2) throw DimError("make_mlp needs at least [in, out]");
    MlpParams p;
    for (size_t i = 0; i + 1 < dims.size(); ++i) {
        const int64_t fan_in = dims[i];
        const int64_t fan_out = dims[i + 1];
        const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
        MlpLayer l;
        l.w = Tensor::zeros({fan_out, fan_in});
        Rng lr = rng.fork("layer" + std::to_string(i));
        for (double& v : l.w.vec()) v = lr.uniform(-limit, limit);
        l.b = Tensor::zeros({1, fan_out});
        l.act = (i + 2 < dims.size()) ? Activation::Relu : Activation::None;
        p.layers.push_back(std::move(l));
    }
    return p;
}

Tensor mlp_apply(const MlpParams& p, const Tensor& x) {
    p.validate();
    if (x.cols() != p.in_dim())
        throw DimError("mlp input " + x.shape_str() + " does not match in_dim " +
                       std::to_string(p.in_dim()));
    Tensor cur = x;
    for (const MlpLayer& l : p.layers) {
        Tensor next = Tensor::zeros({cur.rows(), l.w.rows()});
        kern::matmul_nt(cur.data(), l.w.data(), next.data(), cur.rows(), cur.cols(), l.w.rows());
        double* d = next.data();
        const double* b = l.b.data();
        const int64_t n = next.cols();
        for (int64_t i = 0; i < next.rows(); ++i)
            for (int64_t j = 0; j < n; ++j) d[i * n + j] += b[j];
        if (l.act == Activation::Relu)
            for (double& v : next.vec())
                if (v < 0.0) v = 0.0;
        cur = std::move(next);
    }
    return cur;
}

MlpIds register_mlp(Tape& t, const MlpParams& p) {
    p.validate();
    MlpIds ids;
    for (const MlpLayer& l : p.layers)
        ids.layers.push_back({t.leaf(l.w), t.leaf(l.b), l.act});
    return ids;
}

ValueId mlp_apply(Tape& t, const MlpIds& ids, ValueId x) {
    ValueId cur = x;
    for (const MlpIds::Layer& l : ids.layers) {
        cur = t.add_row(t.matmul_nt(cur, l.w), l.b);
        if (l.act == Activation::Relu) cur = t.relu(cur);
    }
    return cur;
}

}  // namespace lsim
