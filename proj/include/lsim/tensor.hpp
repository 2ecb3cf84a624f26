#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lsim/common.hpp"

namespace lsim {

// Dense row-major tensor of 64-bit floats. In practice everything in the
// model is rank 2; scalars are 1x1.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::vector<int64_t> shape, std::vector<double> data);
    static Tensor zeros(std::vector<int64_t> shape);
    static Tensor scalar(double v) { return Tensor({1, 1}, {v}); }
    static Tensor row(std::vector<double> v);

    const std::vector<int64_t>& shape() const { return shape_; }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    bool is_scalar() const { return numel() == 1; }
    double scalar_value() const;

    // Rank-2 accessors
    int64_t rows() const;
    int64_t cols() const;
    double at(int64_t i, int64_t j) const { return data_[i * cols() + j]; }
    double& at(int64_t i, int64_t j) { return data_[i * cols() + j]; }

    const double* data() const { return data_.data(); }
    double* data() { return data_.data(); }
    const std::vector<double>& vec() const { return data_; }
    std::vector<double>& vec() { return data_; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    std::string shape_str() const;

    // Throws NumericError naming `what` if any entry is NaN or Inf.
    void ensure_finite(const std::string& what) const;
    bool all_finite() const;

    bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

private:
    std::vector<int64_t> shape_;
    std::vector<double> data_;
};

}  // namespace lsim
