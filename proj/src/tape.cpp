#include "lsim/tape.hpp"

#include <cmath>
#include <cstring>

#include "lsim/kernels.hpp"

namespace lsim {

namespace {

void softmax_rows_impl(const double* x, double* y, int64_t m, int64_t n) {
    for (int64_t i = 0; i < m; ++i) {
        const double* xi = x + i * n;
        double* yi = y + i * n;
        double mx = xi[0];
        for (int64_t j = 1; j < n; ++j) mx = std::max(mx, xi[j]);
        double sum = 0.0;
        for (int64_t j = 0; j < n; ++j) {
            yi[j] = std::exp(xi[j] - mx);
            sum += yi[j];
        }
        const double inv = 1.0 / sum;
        for (int64_t j = 0; j < n; ++j) yi[j] *= inv;
    }
}

}  // namespace

const char* Tape::op_name(Op op) {
    switch (op) {
        case Op::Leaf: return "leaf";
        case Op::Constant: return "constant";
        case Op::MatMul: return "matmul";
        case Op::MatMulNT: return "matmul_nt";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::AddRow: return "add_row";
        case Op::AddScalar: return "add_scalar";
        case Op::Relu: return "relu";
        case Op::Sigmoid: return "sigmoid";
        case Op::SoftmaxRows: return "softmax_rows";
        case Op::ConcatCols: return "concat_cols";
        case Op::SliceCols: return "slice_cols";
        case Op::GatherRows: return "gather_rows";
        case Op::GatherMix: return "gather_mix";
        case Op::SegmentSumRows: return "segment_sum_rows";
        case Op::SumAll: return "sum_all";
        case Op::SumRows: return "sum_rows";
        case Op::L2Norm: return "l2_norm";
    }
    return "?";
}

const Tensor& Tape::v(ValueId id) const {
    const Node& n = nodes_[static_cast<size_t>(id)];
    return n.external ? *n.external : n.value;
}

const Tensor& Tape::val(ValueId id) const {
    require(id, "val");
    return v(id);
}

void Tape::require(ValueId id, const char* who) const {
    if (id < 0 || static_cast<size_t>(id) >= nodes_.size())
        throw DimError(std::string(who) + ": value id " + std::to_string(id) + " not on tape");
}

ValueId Tape::push(Node n) {
    if (check_finite_ && n.op != Op::Leaf && n.op != Op::Constant && !n.value.all_finite())
        throw NumericError(std::string("non-finite result from tape op ") + op_name(n.op));
    nodes_.push_back(std::move(n));
    return static_cast<ValueId>(nodes_.size() - 1);
}

ValueId Tape::leaf(const Tensor& t) {
    Node n;
    n.op = Op::Leaf;
    n.external = &t;
    return push(std::move(n));
}

ValueId Tape::constant(Tensor t) {
    Node n;
    n.op = Op::Constant;
    n.value = std::move(t);
    return push(std::move(n));
}

ValueId Tape::matmul(ValueId a, ValueId b) {
    require(a, "matmul");
    require(b, "matmul");
    const Tensor& A = v(a);
    const Tensor& B = v(b);
    if (A.cols() != B.rows())
        throw DimError("matmul: inner dimensions differ, " + A.shape_str() + " x " + B.shape_str());
    Node n;
    n.op = Op::MatMul;
    n.a = a;
    n.b = b;
    n.value = Tensor::zeros({A.rows(), B.cols()});
    kern::matmul_nn(A.data(), B.data(), n.value.data(), A.rows(), A.cols(), B.cols());
    return push(std::move(n));
}

ValueId Tape::matmul_nt(ValueId a, ValueId b) {
    require(a, "matmul_nt");
    require(b, "matmul_nt");
    const Tensor& A = v(a);
    const Tensor& B = v(b);
    if (A.cols() != B.cols())
        throw DimError("matmul_nt: inner dimensions differ, " + A.shape_str() + " x " +
                       B.shape_str() + "^T");
    Node n;
    n.op = Op::MatMulNT;
    n.a = a;
    n.b = b;
    n.value = Tensor::zeros({A.rows(), B.rows()});
    kern::matmul_nt(A.data(), B.data(), n.value.data(), A.rows(), A.cols(), B.rows());
    return push(std::move(n));
}

ValueId Tape::add(ValueId a, ValueId b) {
    require(a, "add");
    require(b, "add");
    const Tensor& A = v(a);
    const Tensor& B = v(b);
    if (!A.same_shape(B))
        throw DimError("add: shape mismatch " + A.shape_str() + " vs " + B.shape_str());
    Node n;
    n.op = Op::Add;
    n.a = a;
    n.b = b;
    n.value = A;
    const double* pb = B.data();
    double* pv = n.value.data();
    for (int64_t i = 0, e = A.numel(); i < e; ++i) pv[i] += pb[i];
    return push(std::move(n));
}

ValueId Tape::sub(ValueId a, ValueId b) {
    require(a, "sub");
    require(b, "sub");
    const Tensor& A = v(a);
    const Tensor& B = v(b);
    if (!A.same_shape(B))
        throw DimError("sub: shape mismatch " + A.shape_str() + " vs " + B.shape_str());
    Node n;
    n.op = Op::Sub;
    n.a = a;
    n.b = b;
    n.value = A;
    const double* pb = B.data();
    double* pv = n.value.data();
    for (int64_t i = 0, e = A.numel(); i < e; ++i) pv[i] -= pb[i];
    return push(std::move(n));
}

ValueId Tape::mul(ValueId a, ValueId b) {
    require(a, "mul");
    require(b, "mul");
    const Tensor& A = v(a);
    const Tensor& B = v(b);
    if (!A.same_shape(B))
        throw DimError("mul: shape mismatch " + A.shape_str() + " vs " + B.shape_str());
    Node n;
    n.op = Op::Mul;
    n.a = a;
    n.b = b;
    n.value = A;
    const double* pb = B.data();
    double* pv = n.value.data();
    for (int64_t i = 0, e = A.numel(); i < e; ++i) pv[i] *= pb[i];
    return push(std::move(n));
}

ValueId Tape::add_row(ValueId x, ValueId r) {
    require(x, "add_row");
    require(r, "add_row");
    const Tensor& X = v(x);
    const Tensor& R = v(r);
    if (R.rows() != 1 || R.cols() != X.cols())
        throw DimError("add_row: row " + R.shape_str() + " does not broadcast over " +
                       X.shape_str());
    Node n;
    n.op = Op::AddRow;
    n.a = x;
    n.b = r;
    n.value = X;
    const int64_t m = X.rows(), c = X.cols();
    const double* pr = R.data();
    double* pv = n.value.data();
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < c; ++j) pv[i * c + j] += pr[j];
    return push(std::move(n));
}

ValueId Tape::add_scalar(ValueId x, double s) {
    require(x, "add_scalar");
    Node n;
    n.op = Op::AddScalar;
    n.a = x;
    n.s = s;
    n.value = v(x);
    for (double& d : n.value.vec()) d += s;
    return push(std::move(n));
}

ValueId Tape::relu(ValueId x) {
    require(x, "relu");
    Node n;
    n.op = Op::Relu;
    n.a = x;
    n.value = v(x);
    for (double& d : n.value.vec())
        if (d < 0.0) d = 0.0;
    return push(std::move(n));
}

ValueId Tape::sigmoid(ValueId x) {
    require(x, "sigmoid");
    Node n;
    n.op = Op::Sigmoid;
    n.a = x;
    n.value = v(x);
    for (double& d : n.value.vec()) d = 1.0 / (1.0 + std::exp(-d));
    return push(std::move(n));
}

ValueId Tape::softmax_rows(ValueId x) {
    require(x, "softmax_rows");
    const Tensor& X = v(x);
    Node n;
    n.op = Op::SoftmaxRows;
    n.a = x;
    n.value = Tensor::zeros(X.shape());
    softmax_rows_impl(X.data(), n.value.data(), X.rows(), X.cols());
    return push(std::move(n));
}

ValueId Tape::concat_cols(ValueId a, ValueId b) {
    require(a, "concat_cols");
    require(b, "concat_cols");
    const Tensor& A = v(a);
    const Tensor& B = v(b);
    if (A.rows() != B.rows())
        throw DimError("concat_cols: row counts differ, " + A.shape_str() + " vs " +
                       B.shape_str());
    const int64_t m = A.rows(), p = A.cols(), q = B.cols();
    Node n;
    n.op = Op::ConcatCols;
    n.a = a;
    n.b = b;
    n.value = Tensor::zeros({m, p + q});
    double* pv = n.value.data();
    for (int64_t i = 0; i < m; ++i) {
        std::memcpy(pv + i * (p + q), A.data() + i * p, sizeof(double) * p);
        std::memcpy(pv + i * (p + q) + p, B.data() + i * q, sizeof(double) * q);
    }
    return push(std::move(n));
}

ValueId Tape::slice_cols(ValueId x, int64_t c0, int64_t c1) {
    require(x, "slice_cols");
    const Tensor& X = v(x);
    if (c0 < 0 || c1 > X.cols() || c0 >= c1)
        throw DimError("slice_cols: range [" + std::to_string(c0) + "," + std::to_string(c1) +
                       ") invalid for " + X.shape_str());
    const int64_t m = X.rows(), c = X.cols(), w = c1 - c0;
    Node n;
    n.op = Op::SliceCols;
    n.a = x;
    n.p0 = c0;
    n.p1 = c1;
    n.value = Tensor::zeros({m, w});
    double* pv = n.value.data();
    for (int64_t i = 0; i < m; ++i)
        std::memcpy(pv + i * w, X.data() + i * c + c0, sizeof(double) * w);
    return push(std::move(n));
}

ValueId Tape::gather_rows(ValueId x, std::vector<int32_t> idx) {
    require(x, "gather_rows");
    const Tensor& X = v(x);
    const int64_t m = X.rows(), c = X.cols();
    for (int32_t i : idx)
        if (i < 0 || i >= m)
            throw DimError("gather_rows: index " + std::to_string(i) + " out of range for " +
                           X.shape_str());
    Node n;
    n.op = Op::GatherRows;
    n.a = x;
    n.value = Tensor::zeros({static_cast<int64_t>(idx.size()), c});
    double* pv = n.value.data();
    for (size_t e = 0; e < idx.size(); ++e)
        std::memcpy(pv + e * c, X.data() + static_cast<int64_t>(idx[e]) * c, sizeof(double) * c);
    n.idx = std::move(idx);
    return push(std::move(n));
}

ValueId Tape::gather_mix(ValueId a, ValueId b, ValueId x, ValueId bias,
                         std::vector<int32_t> ia, std::vector<int32_t> ib) {
    for (ValueId id : {a, b, x, bias}) require(id, "gather_mix");
    const Tensor& A = v(a);
    const Tensor& B = v(b);
    const Tensor& X = v(x);
    const Tensor& R = v(bias);
    const int64_t c = X.cols(), e_cnt = X.rows();
    if (A.cols() != c || B.cols() != c || R.cols() != c || R.rows() != 1)
        throw DimError("gather_mix: column widths differ, " + A.shape_str() + " / " +
                       B.shape_str() + " / " + X.shape_str() + " / bias " + R.shape_str());
    if (static_cast<int64_t>(ia.size()) != e_cnt || static_cast<int64_t>(ib.size()) != e_cnt)
        throw DimError("gather_mix: " + std::to_string(ia.size()) + "/" +
                       std::to_string(ib.size()) + " indices for " + X.shape_str());
    for (int32_t i : ia)
        if (i < 0 || i >= A.rows())
            throw DimError("gather_mix: index " + std::to_string(i) + " out of range for " +
                           A.shape_str());
    for (int32_t i : ib)
        if (i < 0 || i >= B.rows())
            throw DimError("gather_mix: index " + std::to_string(i) + " out of range for " +
                           B.shape_str());
    Node n;
    n.op = Op::GatherMix;
    n.a = a;
    n.b = b;
    n.c = x;
    n.d = bias;
    n.value = Tensor::zeros({e_cnt, c});
    double* pv = n.value.data();
    const double* pr = R.data();
    for (int64_t e = 0; e < e_cnt; ++e) {
        const double* ra = A.data() + static_cast<int64_t>(ia[static_cast<size_t>(e)]) * c;
        const double* rb = B.data() + static_cast<int64_t>(ib[static_cast<size_t>(e)]) * c;
        const double* rx = X.data() + e * c;
        double* out = pv + e * c;
        for (int64_t j = 0; j < c; ++j) {
            const double pre = ((ra[j] + rb[j]) + rx[j]) + pr[j];
            out[j] = pre < 0.0 ? 0.0 : pre;  // same zero/NaN convention as relu
        }
    }
    n.idx = std::move(ia);
    n.idx2 = std::move(ib);
    return push(std::move(n));
}

ValueId Tape::segment_sum_rows(ValueId x, std::vector<int32_t> seg, int64_t n_out) {
    require(x, "segment_sum_rows");
    const Tensor& X = v(x);
    if (static_cast<int64_t>(seg.size()) != X.rows())
        throw DimError("segment_sum_rows: " + std::to_string(seg.size()) + " segments for " +
                       X.shape_str());
    for (int32_t s : seg)
        if (s < 0 || s >= n_out)
            throw DimError("segment_sum_rows: segment " + std::to_string(s) + " out of range [0," +
                           std::to_string(n_out) + ")");
    const int64_t c = X.cols();
    Node n;
    n.op = Op::SegmentSumRows;
    n.a = x;
    n.p0 = n_out;
    n.value = Tensor::zeros({n_out, c});
    double* pv = n.value.data();
    for (size_t e = 0; e < seg.size(); ++e) {
        const double* xe = X.data() + static_cast<int64_t>(e) * c;
        double* out = pv + static_cast<int64_t>(seg[e]) * c;
        for (int64_t j = 0; j < c; ++j) out[j] += xe[j];
    }
    n.idx = std::move(seg);
    return push(std::move(n));
}

ValueId Tape::sum_all(ValueId x) {
    require(x, "sum_all");
    const Tensor& X = v(x);
    double acc = 0.0;
    for (double d : X.vec()) acc += d;
    Node n;
    n.op = Op::SumAll;
    n.a = x;
    n.value = Tensor::scalar(acc);
    return push(std::move(n));
}

ValueId Tape::sum_rows(ValueId x) {
    require(x, "sum_rows");
    const Tensor& X = v(x);
    const int64_t m = X.rows(), c = X.cols();
    Node n;
    n.op = Op::SumRows;
    n.a = x;
    n.value = Tensor::zeros({1, c});
    double* pv = n.value.data();
    for (int64_t i = 0; i < m; ++i) {
        const double* xi = X.data() + i * c;
        for (int64_t j = 0; j < c; ++j) pv[j] += xi[j];
    }
    return push(std::move(n));
}

ValueId Tape::l2_norm(ValueId x) {
    require(x, "l2_norm");
    const Tensor& X = v(x);
    double acc = 0.0;
    for (double d : X.vec()) acc += d * d;
    Node n;
    n.op = Op::L2Norm;
    n.a = x;
    n.value = Tensor::scalar(std::sqrt(acc));
    return push(std::move(n));
}

Tensor& Tape::grad_buf(ValueId id) {
    Tensor& g = grads_[static_cast<size_t>(id)];
    if (g.numel() == 0) g = Tensor::zeros(v(id).shape());
    return g;
}

const Tensor& Tape::grad(ValueId id) {
    require(id, "grad");
    if (!ran_backward_) throw Error("grad: backward() has not been run");
    return grad_buf(id);
}

void Tape::backward(ValueId loss) {
    require(loss, "backward");
    if (ran_backward_) throw Error("backward: tape already differentiated");
    const Tensor& L = v(loss);
    if (!L.is_scalar()) throw DimError("backward: loss has shape " + L.shape_str() + ", not 1x1");
    ran_backward_ = true;
    grads_.assign(nodes_.size(), Tensor());
    grads_[static_cast<size_t>(loss)] = Tensor::scalar(1.0);

    for (ValueId i = loss; i >= 0; --i) {
        const Node& n = nodes_[static_cast<size_t>(i)];
        const Tensor& g = grads_[static_cast<size_t>(i)];
        if (g.numel() == 0) continue;  // node does not reach the loss
        switch (n.op) {
            case Op::Leaf:
            case Op::Constant:
                break;
            case Op::MatMul: {
                const Tensor& A = v(n.a);
                const Tensor& B = v(n.b);
                // dA += g * B^T ; dB += A^T * g
                kern::matmul_nt_acc(g.data(), B.data(), grad_buf(n.a).data(), A.rows(), B.cols(),
                                    A.cols());
                kern::matmul_tn_acc(A.data(), g.data(), grad_buf(n.b).data(), A.rows(), A.cols(),
                                    B.cols());
                break;
            }
            case Op::MatMulNT: {
                const Tensor& A = v(n.a);
                const Tensor& B = v(n.b);
                // C = A * B^T: dA += g * B ; dB += g^T * A
                kern::matmul_nn_acc(g.data(), B.data(), grad_buf(n.a).data(), A.rows(), B.rows(),
                                    A.cols());
                kern::matmul_tn_acc(g.data(), A.data(), grad_buf(n.b).data(), A.rows(), B.rows(),
                                    A.cols());
                break;
            }
            case Op::Add: {
                Tensor& ga = grad_buf(n.a);
                Tensor& gb = grad_buf(n.b);
                for (int64_t e = 0, c = g.numel(); e < c; ++e) {
                    ga.data()[e] += g.data()[e];
                    gb.data()[e] += g.data()[e];
                }
                break;
            }
            case Op::Sub: {
                Tensor& ga = grad_buf(n.a);
                Tensor& gb = grad_buf(n.b);
                for (int64_t e = 0, c = g.numel(); e < c; ++e) {
                    ga.data()[e] += g.data()[e];
                    gb.data()[e] -= g.data()[e];
                }
                break;
            }
            case Op::Mul: {
                const Tensor& A = v(n.a);
                const Tensor& B = v(n.b);
                Tensor& ga = grad_buf(n.a);
                Tensor& gb = grad_buf(n.b);
                for (int64_t e = 0, c = g.numel(); e < c; ++e) {
                    ga.data()[e] += g.data()[e] * B.data()[e];
                    gb.data()[e] += g.data()[e] * A.data()[e];
                }
                break;
            }
            case Op::AddRow: {
                const int64_t m = g.rows(), c = g.cols();
                Tensor& gx = grad_buf(n.a);
                Tensor& gr = grad_buf(n.b);
                for (int64_t e = 0; e < m * c; ++e) gx.data()[e] += g.data()[e];
                for (int64_t r = 0; r < m; ++r)
                    for (int64_t j = 0; j < c; ++j) gr.data()[j] += g.data()[r * c + j];
                break;
            }
            case Op::AddScalar: {
                Tensor& gx = grad_buf(n.a);
                for (int64_t e = 0, c = g.numel(); e < c; ++e) gx.data()[e] += g.data()[e];
                break;
            }
            case Op::Relu: {
                const Tensor& X = v(n.a);
                Tensor& gx = grad_buf(n.a);
                for (int64_t e = 0, c = g.numel(); e < c; ++e)
                    if (X.data()[e] > 0.0) gx.data()[e] += g.data()[e];
                break;
            }
            case Op::Sigmoid: {
                const Tensor& Y = n.value;
                Tensor& gx = grad_buf(n.a);
                for (int64_t e = 0, c = g.numel(); e < c; ++e) {
                    const double y = Y.data()[e];
                    gx.data()[e] += g.data()[e] * y * (1.0 - y);
                }
                break;
            }
            case Op::SoftmaxRows: {
                const Tensor& Y = n.value;
                const int64_t m = Y.rows(), c = Y.cols();
                Tensor& gx = grad_buf(n.a);
                for (int64_t r = 0; r < m; ++r) {
                    const double* yr = Y.data() + r * c;
                    const double* gr = g.data() + r * c;
                    double dot = 0.0;
                    for (int64_t j = 0; j < c; ++j) dot += gr[j] * yr[j];
                    double* out = gx.data() + r * c;
                    for (int64_t j = 0; j < c; ++j) out[j] += yr[j] * (gr[j] - dot);
                }
                break;
            }
            case Op::ConcatCols: {
                const Tensor& A = v(n.a);
                const int64_t m = g.rows(), p = A.cols(), q = g.cols() - p;
                Tensor& ga = grad_buf(n.a);
                Tensor& gb = grad_buf(n.b);
                for (int64_t r = 0; r < m; ++r) {
                    const double* gr = g.data() + r * (p + q);
                    double* par = ga.data() + r * p;
                    double* pbr = gb.data() + r * q;
                    for (int64_t j = 0; j < p; ++j) par[j] += gr[j];
                    for (int64_t j = 0; j < q; ++j) pbr[j] += gr[p + j];
                }
                break;
            }
            case Op::SliceCols: {
                const Tensor& X = v(n.a);
                const int64_t m = X.rows(), c = X.cols(), w = n.p1 - n.p0;
                Tensor& gx = grad_buf(n.a);
                for (int64_t r = 0; r < m; ++r) {
                    const double* gr = g.data() + r * w;
                    double* xr = gx.data() + r * c + n.p0;
                    for (int64_t j = 0; j < w; ++j) xr[j] += gr[j];
                }
                break;
            }
            case Op::GatherRows: {
                const int64_t c = g.cols();
                Tensor& gx = grad_buf(n.a);
                for (size_t e = 0; e < n.idx.size(); ++e) {
                    const double* gr = g.data() + static_cast<int64_t>(e) * c;
                    double* xr = gx.data() + static_cast<int64_t>(n.idx[e]) * c;
                    for (int64_t j = 0; j < c; ++j) xr[j] += gr[j];
                }
                break;
            }
            case Op::GatherMix: {
                const int64_t c = g.cols();
                const Tensor& Y = n.value;  // relu output: positive iff pre-relu was
                Tensor& ga = grad_buf(n.a);
                Tensor& gb = grad_buf(n.b);
                Tensor& gx = grad_buf(n.c);
                Tensor& gr = grad_buf(n.d);
                for (size_t e = 0; e < n.idx.size(); ++e) {
                    const double* ge = g.data() + static_cast<int64_t>(e) * c;
                    const double* ye = Y.data() + static_cast<int64_t>(e) * c;
                    double* pa = ga.data() + static_cast<int64_t>(n.idx[e]) * c;
                    double* pb = gb.data() + static_cast<int64_t>(n.idx2[e]) * c;
                    double* px = gx.data() + static_cast<int64_t>(e) * c;
                    for (int64_t j = 0; j < c; ++j) {
                        if (!(ye[j] > 0.0)) continue;
                        pa[j] += ge[j];
                        pb[j] += ge[j];
                        px[j] += ge[j];
                        gr.data()[j] += ge[j];
                    }
                }
                break;
            }
            case Op::SegmentSumRows: {
                const int64_t c = g.cols();
                Tensor& gx = grad_buf(n.a);
                for (size_t e = 0; e < n.idx.size(); ++e) {
                    const double* gr = g.data() + static_cast<int64_t>(n.idx[e]) * c;
                    double* xr = gx.data() + static_cast<int64_t>(e) * c;
                    for (int64_t j = 0; j < c; ++j) xr[j] += gr[j];
                }
                break;
            }
            case Op::SumAll: {
                const double gs = g.scalar_value();
                Tensor& gx = grad_buf(n.a);
                for (double& d : gx.vec()) d += gs;
                break;
            }
            case Op::SumRows: {
                const Tensor& X = v(n.a);
                const int64_t m = X.rows(), c = X.cols();
                Tensor& gx = grad_buf(n.a);
                for (int64_t r = 0; r < m; ++r)
                    for (int64_t j = 0; j < c; ++j) gx.data()[r * c + j] += g.data()[j];
                break;
            }
            case Op::L2Norm: {
                const double norm = n.value.scalar_value();
                if (norm > 0.0) {
                    const double gs = g.scalar_value() / norm;
                    const Tensor& X = v(n.a);
                    Tensor& gx = grad_buf(n.a);
                    for (int64_t e = 0, cnt = X.numel(); e < cnt; ++e)
                        gx.data()[e] += gs * X.data()[e];
                }
                break;
            }
        }
    }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows())
        throw DimError("matmul: inner dimensions differ, " + a.shape_str() + " x " +
                       b.shape_str());
    Tensor c = Tensor::zeros({a.rows(), b.cols()});
    kern::matmul_nn(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
    return c;
}

Tensor softmax_rows(const Tensor& x) {
    Tensor y = Tensor::zeros(x.shape());
    softmax_rows_impl(x.data(), y.data(), x.rows(), x.cols());
    return y;
}

}  // namespace lsim
