#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lsim/tensor.hpp"

namespace lsim {

// Central-difference gradient verification. The caller evaluates the loss
// through loss_fn (which must read the current contents of the parameter
// tensors) and supplies analytic gradients computed at the unperturbed point.
struct FdOptions {
    double eps = 1e-5;
    // 0 checks every entry; otherwise at most this many per tensor, chosen
    // evenly spaced over the eligible entries (deterministic).
    int64_t max_entries_per_tensor = 0;
    // Entries whose analytic gradient magnitude falls below this are skipped
    // when sampling; 0 disables the floor.
    double min_grad_magnitude = 0.0;
};

struct FdReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    int64_t worst_index = -1;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    int64_t entries_checked = 0;
};

// Relative error uses max(|analytic|, |numeric|, 1e-8) as denominator.
FdReport finite_diff_check(const std::vector<std::pair<std::string, Tensor*>>& params,
                           const std::vector<Tensor>& analytic,
                           const std::function<double()>& loss_fn, const FdOptions& opt = {});

}  // namespace lsim
