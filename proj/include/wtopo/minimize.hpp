#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include "wtopo/adamw.hpp"
#include "wtopo/errors.hpp"
#include "wtopo/grid.hpp"
#include "wtopo/persistence.hpp"
#include "wtopo/topo_energy.hpp"

namespace wtopo {

enum class EnergyVariant { ph, wt };

struct MinimizeResult {
    ScalarField field;
    std::vector<double> energy_trace; // one entry per iteration, before the step
};

// Direct energy minimization on an image: each iteration recomputes the
// diagram and critical sets from the current field, takes one AdamW step on
// the width-aware surrogate (WT) or on the pointwise critical-pixel energy
// (PH), then clamps back to [0,1]. The optional callback sees each iterate
// (for snapshots).
inline MinimizeResult minimize_energy(
    const ScalarField& input, const TopoParams& params, const AdamWParams& adamw, int iters,
    EnergyVariant variant,
    const std::function<void(int, const ScalarField&)>& on_iterate = nullptr) {
    if (!input.all_finite()) throw invariant_error("minimize_energy: non-finite field");

    MinimizeResult result;
    result.field = input;
    AdamWState state(input.width, input.height);

    for (int t = 0; t < iters; ++t) {
        const PersistenceDiagram diagram = compute_superlevel_persistence(result.field);
        const FrozenCriticalSets sets = freeze_critical_sets(diagram, params);

        double energy;
        ScalarField grad;
        if (variant == EnergyVariant::wt) {
            energy = surrogate_energy(result.field, sets, params);
            grad = surrogate_gradient(result.field, sets, params);
        } else {
            energy = 0.0;
            for (int k = 0; k < 2; ++k)
                energy += params.mu(k) * (2.0 * bar_energy(diagram, k, params.beta(k)) -
                                          bar_energy(diagram, k, 0));
            grad = plain_critical_gradient(sets, params);
        }
        result.energy_trace.push_back(energy);

        result.field = adamw_step(state, result.field, grad, adamw);
        for (double& v : result.field.values) v = std::clamp(v, 0.0, 1.0);
        if (on_iterate) on_iterate(t, result.field);
    }
    return result;
}

} // namespace wtopo
