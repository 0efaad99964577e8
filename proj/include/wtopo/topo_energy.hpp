#pragma once

#include <array>
#include <fstream>
#include <string>
#include <vector>

#include "wtopo/errors.hpp"
#include "wtopo/grid.hpp"
#include "wtopo/morphology.hpp"
#include "wtopo/persistence.hpp"

namespace wtopo {

// Topological prior: per-dimension weights mu_k, target counts beta_k of
// encouraged finite pairs (essential classes never enter the energies), and
// the smoothing parameters shared with the morphology kernels.
struct TopoParams {
    double mu0 = 1.0;
    double mu1 = 0.0;
    int beta0 = 0;
    int beta1 = 0;
    SmoothParams smooth;

    double mu(int dim) const { return dim == 0 ? mu0 : mu1; }
    int beta(int dim) const { return dim == 0 ? beta0 : beta1; }
};

// Critical pixels captured from a reference field's diagram. Only the pixel
// sets are frozen; the smooth kernels are always re-evaluated on the current
// field, which is what makes the gradient of the surrogate exact.
struct CriticalPixelSet {
    std::vector<PixelIndex> births;
    std::vector<PixelIndex> deaths;

    bool empty() const { return births.empty() && deaths.empty(); }
};

struct FrozenCriticalSets {
    int width = 0;
    int height = 0;
    std::array<CriticalPixelSet, 2> encouraged; // indexed by dimension
    std::array<CriticalPixelSet, 2> penalized;

    bool empty() const {
        for (int k = 0; k < 2; ++k)
            if (!encouraged[k].empty() || !penalized[k].empty()) return false;
        return true;
    }

    bool shape_matches(const ScalarField& f) const {
        return width == f.width && height == f.height;
    }
};

// Sum of persistences of the finite dim-k pairs ranked below beta:
// sum_{j > beta} (b_j - d_j). Zero once beta covers every finite pair.
inline double bar_energy(const PersistenceDiagram& diagram, int dim, int beta) {
    double total = 0.0;
    int rank = 0;
    for (const auto& p : diagram.pairs) {
        if (p.dim != dim || p.essential) continue;
        if (rank >= beta) total += p.persistence();
        ++rank;
    }
    return total;
}

// Plain persistence energy sum_k mu_k (2 B(beta_k) - B(0)) on a fresh
// diagram of the field. Penalized bars enter positively, encouraged bars
// negatively.
inline double ph_energy(const ScalarField& f, const TopoParams& params) {
    const PersistenceDiagram diagram = compute_superlevel_persistence(f);
    double total = 0.0;
    for (int k = 0; k < 2; ++k)
        total += params.mu(k) * (2.0 * bar_energy(diagram, k, params.beta(k)) -
                                 bar_energy(diagram, k, 0));
    return total;
}

inline FrozenCriticalSets freeze_critical_sets(const PersistenceDiagram& diagram,
                                               const TopoParams& params) {
    FrozenCriticalSets frozen;
    frozen.width = diagram.width;
    frozen.height = diagram.height;
    for (int k = 0; k < 2; ++k) {
        const CriticalSplit split = critical_sets(diagram, k, params.beta(k));
        for (const auto& p : split.encouraged) {
            frozen.encouraged[static_cast<size_t>(k)].births.push_back(p.birth_pixel);
            frozen.encouraged[static_cast<size_t>(k)].deaths.push_back(p.death_pixel);
        }
        for (const auto& p : split.penalized) {
            frozen.penalized[static_cast<size_t>(k)].births.push_back(p.birth_pixel);
            frozen.penalized[static_cast<size_t>(k)].deaths.push_back(p.death_pixel);
        }
    }
    return frozen;
}

namespace detail {

inline double smooth_bar_sum(const ScalarField& u, const CriticalPixelSet& set,
                             const SmoothParams& sp) {
    double total = 0.0;
    for (const auto& y : set.births) total += smooth_dilation_value(u, y, sp);
    for (const auto& z : set.deaths) total -= smooth_erosion_value(u, z, sp);
    return total;
}

} // namespace detail

// Width-aware surrogate: smooth dilation values over frozen birth pixels
// minus smooth erosion values over frozen death pixels, combined as
// sum_k mu_k (2 Q(beta_k) - Q(0)) = sum_k mu_k (Q_pen - Q_enc).
inline double surrogate_energy(const ScalarField& u, const FrozenCriticalSets& frozen,
                               const TopoParams& params) {
    if (!frozen.shape_matches(u))
        throw invariant_error("surrogate_energy: field/frozen-set shape mismatch");
    double total = 0.0;
    for (int k = 0; k < 2; ++k) {
        const double pen = detail::smooth_bar_sum(u, frozen.penalized[static_cast<size_t>(k)],
                                                  params.smooth);
        const double enc = detail::smooth_bar_sum(u, frozen.encouraged[static_cast<size_t>(k)],
                                                  params.smooth);
        total += params.mu(k) * (pen - enc);
    }
    return total;
}

// Analytic gradient of surrogate_energy with the pixel sets held fixed:
// softmax kernel mass around birth pixels, softmin mass around death pixels,
// signs matching the penalized/encouraged algebra. Contributions from
// repeated pixels add linearly.
inline ScalarField surrogate_gradient(const ScalarField& u, const FrozenCriticalSets& frozen,
                                      const TopoParams& params) {
    if (!frozen.shape_matches(u))
        throw invariant_error("surrogate_gradient: field/frozen-set shape mismatch");
    ScalarField grad(u.width, u.height, 0.0);
    const SmoothParams& sp = params.smooth;

    auto scatter_kernel = [&](PixelIndex center, ExtremeMode mode, double coeff) {
        const std::vector<double> weights = smooth_kernel(u, center, sp, mode);
        size_t j = 0;
        detail::for_window(u, center.row, center.col, sp.nb,
                           [&](int row, int col, double) { grad.at(row, col) += coeff * weights[j++]; });
    };

    for (int k = 0; k < 2; ++k) {
        const double mu = params.mu(k);
        if (mu == 0.0) continue;
        for (const auto& y : frozen.penalized[static_cast<size_t>(k)].births)
            scatter_kernel(y, ExtremeMode::max, mu);
        for (const auto& z : frozen.penalized[static_cast<size_t>(k)].deaths)
            scatter_kernel(z, ExtremeMode::min, -mu);
        for (const auto& y : frozen.encouraged[static_cast<size_t>(k)].births)
            scatter_kernel(y, ExtremeMode::max, -mu);
        for (const auto& z : frozen.encouraged[static_cast<size_t>(k)].deaths)
            scatter_kernel(z, ExtremeMode::min, mu);
    }
    return grad;
}

// epsilon -> 0 baseline: unit mass exactly at the critical pixels, the
// gradient of the plain persistence energy.
inline ScalarField plain_critical_gradient(const FrozenCriticalSets& frozen,
                                           const TopoParams& params) {
    ScalarField grad(frozen.width, frozen.height, 0.0);
    for (int k = 0; k < 2; ++k) {
        const double mu = params.mu(k);
        if (mu == 0.0) continue;
        for (const auto& y : frozen.penalized[static_cast<size_t>(k)].births) grad.at(y) += mu;
        for (const auto& z : frozen.penalized[static_cast<size_t>(k)].deaths) grad.at(z) -= mu;
        for (const auto& y : frozen.encouraged[static_cast<size_t>(k)].births) grad.at(y) -= mu;
        for (const auto& z : frozen.encouraged[static_cast<size_t>(k)].deaths) grad.at(z) += mu;
    }
    return grad;
}

struct WtEnergy {
    double value = 0.0;
    FrozenCriticalSets sets;
};

// Width-aware topological energy of a field: fresh diagram, critical-set
// split at beta_k, smooth surrogate evaluated on the field itself. The sets
// are returned so a caller's gradient step can reuse them.
inline WtEnergy wt_energy(const ScalarField& f, const TopoParams& params) {
    const PersistenceDiagram diagram = compute_superlevel_persistence(f);
    WtEnergy result;
    result.sets = freeze_critical_sets(diagram, params);
    result.value = surrogate_energy(f, result.sets, params);
    return result;
}

// Critical-set export: diagram CSV columns plus an `encouraged` flag.
inline void write_critical_sets_csv(const PersistenceDiagram& diagram, const TopoParams& params,
                                    std::ostream& out) {
    out << "dim,birth,death,birth_row,birth_col,death_row,death_col,essential,encouraged\n";
    for (int k = 0; k < 2; ++k) {
        const CriticalSplit split = critical_sets(diagram, k, params.beta(k));
        for (const auto& p : split.encouraged) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%d,%d,%d,%d,0,1", p.dim, p.birth,
                          p.death, p.birth_pixel.row, p.birth_pixel.col, p.death_pixel.row,
                          p.death_pixel.col);
            out << buf << "\n";
        }
        for (const auto& p : split.penalized) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%d,%d,%d,%d,0,0", p.dim, p.birth,
                          p.death, p.birth_pixel.row, p.birth_pixel.col, p.death_pixel.row,
                          p.death_pixel.col);
            out << buf << "\n";
        }
    }
}

} // namespace wtopo
