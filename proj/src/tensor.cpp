#include "lsim/tensor.hpp"

#include <cmath>
#include <sstream>

namespace lsim {

namespace {
int64_t product(const std::vector<int64_t>& shape) {
    int64_t p = 1;
    for (int64_t d : shape) p *= d;
    return p;
}
}  // namespace

Tensor::Tensor(std::vector<int64_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (product(shape_) != static_cast<int64_t>(data_.size()))
        throw DimError("tensor data size " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str());
}

Tensor Tensor::zeros(std::vector<int64_t> shape) {
    int64_t n = product(shape);
    if (n < 0) throw DimError("negative dimension in tensor shape");
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_.assign(static_cast<size_t>(n), 0.0);
    return t;
}

Tensor Tensor::row(std::vector<double> v) {
    int64_t n = static_cast<int64_t>(v.size());
    return Tensor({1, n}, std::move(v));
}

double Tensor::scalar_value() const {
    if (!is_scalar()) throw DimError("expected scalar tensor, got shape " + shape_str());
    return data_[0];
}

int64_t Tensor::rows() const {
    if (shape_.size() != 2) throw DimError("expected rank-2 tensor, got shape " + shape_str());
    return shape_[0];
}

int64_t Tensor::cols() const {
    if (shape_.size() != 2) throw DimError("expected rank-2 tensor, got shape " + shape_str());
    return shape_[1];
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
    os << "]";
    return os.str();
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void Tensor::ensure_finite(const std::string& what) const {
    if (!all_finite()) throw NumericError("non-finite value in " + what);
}

}  // namespace lsim
