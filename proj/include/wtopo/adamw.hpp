#pragma once

#include <cmath>

#include "wtopo/errors.hpp"
#include "wtopo/grid.hpp"

namespace wtopo {

// AdamW with decoupled weight decay. Defaults: rho1 = 0.9, rho2 = 0.999,
// eps_stab = 1e-8; learning rate / decay are problem-specific.
struct AdamWParams {
    double learning_rate = 0.01; // tau
    double weight_decay = 0.01;  // nu
    double rho1 = 0.9;
    double rho2 = 0.999;
    double eps_stab = 1e-8;
};

struct AdamWState {
    ScalarField m; // first moment
    ScalarField s; // second moment
    long step = 0;

    AdamWState() = default;
    AdamWState(int w, int h) : m(w, h, 0.0), s(w, h, 0.0) {}
};

// One step: moment updates, bias correction with exponent step+1, then
// param' = (1 - tau*nu) * param - tau * m_hat / (sqrt(s_hat) + eps).
inline ScalarField adamw_step(AdamWState& state, const ScalarField& param,
                              const ScalarField& grad, const AdamWParams& hp) {
    if (!param.same_shape(grad) || !param.same_shape(state.m))
        throw invariant_error("adamw_step: shape mismatch");
    if (!grad.all_finite()) throw invariant_error("adamw_step: non-finite gradient");

    ++state.step;
    const double c1 = 1.0 - std::pow(hp.rho1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(hp.rho2, static_cast<double>(state.step));
    ScalarField out(param.width, param.height);
    for (int i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        state.m[i] = hp.rho1 * state.m[i] + (1.0 - hp.rho1) * g;
        state.s[i] = hp.rho2 * state.s[i] + (1.0 - hp.rho2) * g * g;
        const double m_hat = state.m[i] / c1;
        const double s_hat = state.s[i] / c2;
        out[i] = (1.0 - hp.learning_rate * hp.weight_decay) * param[i] -
                 hp.learning_rate * (m_hat / (std::sqrt(s_hat) + hp.eps_stab));
    }
    return out;
}

} // namespace wtopo
