#include "dynrec/grad_check.hpp"

#include <cmath>

#include "dynrec/errors.hpp"

namespace dynrec {

GradCheckResult grad_check(const std::function<Value()>& build, const std::vector<Value>& leaves,
                           double eps) {
    if (eps < 1e-7 || eps > 1e-3) throw ContractViolation("grad_check: eps must lie in [1e-7, 1e-3]");
    GradCheckResult res;

    for (const auto& l : leaves) l->grad = Array::zeros(l->val.shape);
    Value out = build();
    if (out->val.numel() != 1) throw DimensionError("grad_check: computation must be scalar-valued");
    backward(out);

    std::vector<Array> analytic;
    analytic.reserve(leaves.size());
    for (const auto& l : leaves) analytic.push_back(l->grad);

    NoGradGuard ng;  // numeric probes need values only
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        const Value& l = leaves[li];
        for (std::size_t i = 0; i < l->val.numel(); ++i) {
            const double orig = l->val[i];
            l->val[i] = orig + eps;
            const double fp = build()->val[0];
            l->val[i] = orig - eps;
            const double fm = build()->val[0];
            l->val[i] = orig;

            const double numeric = (fp - fm) / (2.0 * eps);
            const double a = analytic[li][i];
            if (!std::isfinite(numeric) || !std::isfinite(a)) {
                res.finite = false;
                res.failure = "non-finite gradient at " +
                              (l->name.empty() ? std::string("<input>") : l->name) + "[" +
                              std::to_string(i) + "]";
                return res;
            }
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            const double rel = std::abs(a - numeric) / denom;
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.worst = (l->name.empty() ? std::string("<input>") : l->name) + "[" +
                            std::to_string(i) + "]";
            }
        }
    }
    return res;
}

}  // namespace dynrec
