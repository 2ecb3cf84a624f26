#pragma once

#include <cstdint>
#include <vector>

#include "lsim/tensor.hpp"

namespace lsim {

using ValueId = int32_t;

// Define-by-run tape for reverse-mode differentiation over matrix ops.
// A tape is built per forward pass, backward() walks it once in reverse,
// and the whole thing is discarded afterwards. Single-writer: one tape is
// never shared across threads (parallelism lives inside the kernels).
//
// leaf() nodes reference external parameter storage, which must outlive
// the tape; constant() nodes own a copy (or moved-in value) of their input.
class Tape {
public:
    // Differentiable leaf (a trainable parameter). Not copied.
    ValueId leaf(const Tensor& t);
    // Non-differentiable input. Owned by the tape.
    ValueId constant(Tensor t);

    ValueId matmul(ValueId a, ValueId b);     // [m,k]x[k,n] -> [m,n]
    ValueId matmul_nt(ValueId a, ValueId b);  // [m,k]x[n,k]^T -> [m,n]
    ValueId add(ValueId a, ValueId b);
    ValueId sub(ValueId a, ValueId b);
    ValueId mul(ValueId a, ValueId b);             // elementwise
    ValueId add_row(ValueId x, ValueId r);         // broadcast [1,n] over rows of [m,n]
    ValueId add_scalar(ValueId x, double s);
    ValueId relu(ValueId x);
    ValueId sigmoid(ValueId x);
    ValueId softmax_rows(ValueId x);
    ValueId concat_cols(ValueId a, ValueId b);     // [m,p],[m,q] -> [m,p+q]
    ValueId slice_cols(ValueId x, int64_t c0, int64_t c1);
    ValueId gather_rows(ValueId x, std::vector<int32_t> idx);
    // Fused relu(a[ia[e]] + b[ib[e]] + x[e] + bias): one node instead of the
    // two-gather / two-add / bias / relu chain, which would otherwise build
    // six row-count-of-x sized temporaries per message round.
    ValueId gather_mix(ValueId a, ValueId b, ValueId x, ValueId bias,
                       std::vector<int32_t> ia, std::vector<int32_t> ib);
    // out[seg[e]] += x[e]; rows of x grouped into n_out buckets
    ValueId segment_sum_rows(ValueId x, std::vector<int32_t> seg, int64_t n_out);
    ValueId sum_all(ValueId x);    // -> 1x1
    ValueId sum_rows(ValueId x);   // [m,n] -> [1,n], sum over rows
    ValueId l2_norm(ValueId x);    // -> 1x1, sqrt(sum of squares)

    const Tensor& val(ValueId id) const;

    // Reverse pass from a scalar loss. May be called once per tape.
    void backward(ValueId loss);

    // Gradient of the last backward()'s loss w.r.t. node `id`. Zero tensor if
    // the node does not influence the loss.
    const Tensor& grad(ValueId id);

    size_t size() const { return nodes_.size(); }

    // Scan each op output for NaN/Inf and throw NumericError immediately
    // (on by default; the scan is cheap next to the matmuls that feed it).
    void set_check_finite(bool v) { check_finite_ = v; }

private:
    enum class Op : uint8_t {
        Leaf,
        Constant,
        MatMul,
        MatMulNT,
        Add,
        Sub,
        Mul,
        AddRow,
        AddScalar,
        Relu,
        Sigmoid,
        SoftmaxRows,
        ConcatCols,
        SliceCols,
        GatherRows,
        GatherMix,
        SegmentSumRows,
        SumAll,
        SumRows,
        L2Norm,
    };

    struct Node {
        Op op;
        ValueId a = -1, b = -1;
        ValueId c = -1, d = -1;          // GatherMix extra operands
        Tensor value;                    // owned result (unused for Leaf)
        const Tensor* external = nullptr;  // Leaf storage
        std::vector<int32_t> idx;        // GatherRows / GatherMix / SegmentSumRows
        std::vector<int32_t> idx2;       // GatherMix second index set
        int64_t p0 = 0, p1 = 0;          // SliceCols range, segment n_out
        double s = 0.0;                  // AddScalar
    };

    ValueId push(Node n);
    const Tensor& v(ValueId id) const;
    void require(ValueId id, const char* who) const;
    Tensor& grad_buf(ValueId id);
    static const char* op_name(Op op);

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
    bool check_finite_ = true;
    bool ran_backward_ = false;
};

// Plain (untaped) versions of the core ops, for inference-style call sites
// and small utilities. Same kernels, same results.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor softmax_rows(const Tensor& x);

}  // namespace lsim
