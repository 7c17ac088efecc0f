#pragma once

#include <functional>
#include <map>
#include <string>

#include "milsent/registry.hpp"
#include "milsent/tensor.hpp"

namespace milsent {

// Central-finite-difference check of reverse-mode gradients. `f` must be a
// deterministic scalar function of the registered parameters (dropout off,
// rng fixed). Report-only: nothing throws on disagreement.
struct GradCheckReport {
    // per-parameter max of |analytic - numeric| / max(|analytic|, |numeric|, 1e-12)
    std::map<std::string, double> max_rel_error;
    double worst = 0.0;
    std::string worst_param;

    bool passes(double tol) const { return worst < tol; }
};

GradCheckReport grad_check(const std::function<Tensor()>& f, ParamRegistry& params,
                           double eps = 1e-5);

} // namespace milsent
