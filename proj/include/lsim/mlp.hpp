#pragma once

#include <cstdint>
#include <vector>

#include "lsim/rng.hpp"
#include "lsim/tape.hpp"
#include "lsim/tensor.hpp"

namespace lsim {

enum class Activation : uint8_t { None, Relu };

// Weights are out x in, biases 1 x out, matching y = x W^T + b on row batches.
struct MlpLayer {
    Tensor w;
    Tensor b;
    Activation act = Activation::None;
};

struct MlpParams {
    std::vector<MlpLayer> layers;

    int64_t in_dim() const { return layers.front().w.cols(); }
    int64_t out_dim() const { return layers.back().w.rows(); }

    // Consecutive layer dimensions must chain.
    void validate() const;
};

// Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases. Hidden
// layers get ReLU, the final layer none.
MlpParams make_mlp(const std::vector<int64_t>& dims, Rng rng);

// Plain forward pass, no tape.
Tensor mlp_apply(const MlpParams& p, const Tensor& x);

// Tape-recorded forward pass. Layer tensors are registered as leaves once
// per tape via register_mlp and reused across calls.
struct MlpIds {
    struct Layer {
        ValueId w, b;
        Activation act;
    };
    std::vector<Layer> layers;
};

MlpIds register_mlp(Tape& t, const MlpParams& p);
ValueId mlp_apply(Tape& t, const MlpIds& ids, ValueId x);

}  // namespace lsim
