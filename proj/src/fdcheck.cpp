#include "lsim/fdcheck.hpp"

#include <algorithm>
#include <cmath>

#include "lsim/common.hpp"

namespace lsim {

FdReport finite_diff_check(const std::vector<std::pair<std::string, Tensor*>>& params,
                           const std::vector<Tensor>& analytic,
                           const std::function<double()>& loss_fn, const FdOptions& opt) {
    if (params.size() != analytic.size())
        throw DimError("finite_diff_check: params/analytic size mismatch");
    FdReport rep;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& t = *params[pi].second;
        const Tensor& g = analytic[pi];
        if (!t.same_shape(g))
            throw DimError("finite_diff_check: gradient shape mismatch for " + params[pi].first);
        const int64_t n = t.numel();

        std::vector<int64_t> idx;
        if (opt.max_entries_per_tensor > 0 || opt.min_grad_magnitude > 0.0) {
            std::vector<int64_t> eligible;
            for (int64_t i = 0; i < n; ++i)
                if (std::abs(g.data()[i]) >= opt.min_grad_magnitude) eligible.push_back(i);
            if (eligible.empty()) continue;
            const int64_t want = opt.max_entries_per_tensor > 0
                                     ? std::min<int64_t>(opt.max_entries_per_tensor,
                                                         int64_t(eligible.size()))
                                     : int64_t(eligible.size());
            for (int64_t k = 0; k < want; ++k)
                idx.push_back(eligible[(k * eligible.size()) / want]);
        } else {
            idx.resize(n);
            for (int64_t i = 0; i < n; ++i) idx[i] = i;
        }

        for (int64_t i : idx) {
            double& p = t.data()[i];
            const double saved = p;
            p = saved + opt.eps;
            const double fp = loss_fn();
            p = saved - opt.eps;
            const double fm = loss_fn();
            p = saved;
            const double numeric = (fp - fm) / (2.0 * opt.eps);
            const double a = g.data()[i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            const double rel = std::abs(a - numeric) / denom;
            ++rep.entries_checked;
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_param = params[pi].first;
                rep.worst_index = i;
                rep.worst_analytic = a;
                rep.worst_numeric = numeric;
            }
        }
    }
    return rep;
}

}  // namespace lsim
