#pragma once

// Shared helpers for the test suites. The finite-difference helpers here are
// the independent oracle for backward rules: they only ever call forward
// evaluation, never the tape.

#include <cmath>
#include <functional>
#include <vector>

#include "milsent/rng.hpp"
#include "milsent/tensor.hpp"

namespace milsent::testing {

// central differences of a scalar functional w.r.t. every element of x,
// perturbing x's storage in place
inline std::vector<double> numeric_grad(const std::function<double()>& f, Tensor x,
                                        double eps = 1e-5) {
    NoGradGuard ng;
    std::vector<double> g(x.size());
    auto& vals = x.values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const Real saved = vals[i];
        vals[i] = saved + eps;
        const double up = f();
        vals[i] = saved - eps;
        const double down = f();
        vals[i] = saved;
        g[i] = (up - down) / (2.0 * eps);
    }
    return g;
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12});
}

inline double max_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, rel_err(a[i], b[i]));
    return worst;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = false) {
    Tensor t = Tensor::zeros(std::move(shape), requires_grad);
    for (auto& v : t.values()) v = rng.uniform(lo, hi);
    return t;
}

} // namespace milsent::testing
