#include "milsent/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace milsent {

GradCheckReport grad_check(const std::function<Tensor()>& f, ParamRegistry& params, double eps) {
    Tape& tape = Tape::active();

    // analytic pass
    tape.clear();
    params.zero_grad();
    Tensor loss = f();
    tape.backward(loss);
    std::map<std::string, std::vector<Real>> analytic;
    for (const std::string& name : params.trainable_names())
        analytic[name] = params.get(name).grad();
    tape.clear();

    GradCheckReport report;
    NoGradGuard no_grad; // numeric probes do not need the tape
    for (const std::string& name : params.trainable_names()) {
        Tensor t = params.get(name);
        auto& vals = t.values();
        const auto& a = analytic[name];
        double worst = 0.0;
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const Real saved = vals[i];
            vals[i] = saved + eps;
            const Real up = f().item();
            vals[i] = saved - eps;
            const Real down = f().item();
            vals[i] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double denom = std::max({std::abs(a[i]), std::abs(numeric), 1e-12});
            worst = std::max(worst, std::abs(a[i] - numeric) / denom);
        }
        report.max_rel_error[name] = worst;
        if (worst > report.worst) {
            report.worst = worst;
            report.worst_param = name;
        }
    }
    return report;
}

} // namespace milsent
