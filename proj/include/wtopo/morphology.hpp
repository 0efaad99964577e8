#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "wtopo/grid.hpp"
#include "wtopo/parallel.hpp"

namespace wtopo {

// Smoothing configuration: epsilon controls how far the soft extrema spread
// inside the structuring element; the neighborhood carries the radius.
struct SmoothParams {
    double epsilon = 0.0625;
    NeighborhoodSpec nb;
};

enum class ExtremeMode { min, max };

namespace detail {

// Applies fn(row, col, value) over the clipped window around (row0, col0).
template <typename Fn>
inline void for_window(const ScalarField& f, int row0, int col0, const NeighborhoodSpec& spec,
                       Fn&& fn) {
    const int r = spec.radius;
    const long r2 = static_cast<long>(r) * r;
    const bool disc = spec.shape == NeighborhoodSpec::Shape::disc;
    const int rlo = std::max(0, row0 - r), rhi = std::min(f.height - 1, row0 + r);
    for (int row = rlo; row <= rhi; ++row) {
        const int dr = row - row0;
        const int clo = std::max(0, col0 - r), chi = std::min(f.width - 1, col0 + r);
        for (int col = clo; col <= chi; ++col) {
            const int dc = col - col0;
            if (disc && static_cast<long>(dr) * dr + static_cast<long>(dc) * dc > r2) continue;
            fn(row, col, f.at(row, col));
        }
    }
}

} // namespace detail

inline ScalarField erode(const ScalarField& f, const NeighborhoodSpec& nb) {
    ScalarField out(f.width, f.height);
    parallel_for(0, f.size(), [&](int idx) {
        const int row = idx / f.width, col = idx % f.width;
        double m = f[idx];
        detail::for_window(f, row, col, nb, [&](int, int, double v) { m = std::min(m, v); });
        out[idx] = m;
    });
    return out;
}

inline ScalarField dilate(const ScalarField& f, const NeighborhoodSpec& nb) {
    ScalarField out(f.width, f.height);
    parallel_for(0, f.size(), [&](int idx) {
        const int row = idx / f.width, col = idx % f.width;
        double m = f[idx];
        detail::for_window(f, row, col, nb, [&](int, int, double v) { m = std::max(m, v); });
        out[idx] = m;
    });
    return out;
}

// u - erosion(u): nonzero just inside edges.
inline ScalarField internal_gradient(const ScalarField& f, const NeighborhoodSpec& nb) {
    ScalarField e = erode(f, nb);
    for (int i = 0; i < f.size(); ++i) e[i] = f[i] - e[i];
    return e;
}

// dilation(u) - u: nonzero just outside edges.
inline ScalarField external_gradient(const ScalarField& f, const NeighborhoodSpec& nb) {
    ScalarField d = dilate(f, nb);
    for (int i = 0; i < d.size(); ++i) d[i] = d[i] - f[i];
    return d;
}

// Softmax/softmin weights of u/eps over the clipped window, aligned with
// neighborhood(x, ...). Shift-invariant form, so finite fields never
// overflow; weights sum to 1 and vanish outside the window.
inline std::vector<double> smooth_kernel(const ScalarField& f, PixelIndex x,
                                         const SmoothParams& sp, ExtremeMode mode) {
    std::vector<double> weights;
    double extreme = mode == ExtremeMode::max ? -std::numeric_limits<double>::infinity()
                                              : std::numeric_limits<double>::infinity();
    detail::for_window(f, x.row, x.col, sp.nb, [&](int, int, double v) {
        extreme = mode == ExtremeMode::max ? std::max(extreme, v) : std::min(extreme, v);
    });
    double sum = 0.0;
    detail::for_window(f, x.row, x.col, sp.nb, [&](int, int, double v) {
        const double e = mode == ExtremeMode::max ? std::exp((v - extreme) / sp.epsilon)
                                                  : std::exp((extreme - v) / sp.epsilon);
        weights.push_back(e);
        sum += e;
    });
    for (double& wgt : weights) wgt /= sum;
    return weights;
}

// Soft maximum over the window: eps * ln sum exp(u/eps), evaluated in
// max-shifted form. Equals <k_M, u> - eps <k_M, ln k_M> for the softmax
// kernel; lies in [max, max + eps ln n].
inline double smooth_dilation_value(const ScalarField& f, PixelIndex x, const SmoothParams& sp) {
    double mx = -std::numeric_limits<double>::infinity();
    detail::for_window(f, x.row, x.col, sp.nb, [&](int, int, double v) { mx = std::max(mx, v); });
    double s = 0.0;
    detail::for_window(f, x.row, x.col, sp.nb,
                       [&](int, int, double v) { s += std::exp((v - mx) / sp.epsilon); });
    return mx + sp.epsilon * std::log(s);
}

// Soft minimum: -eps * ln sum exp(-u/eps). Exact dual of the dilation value,
// smooth_erosion_value(u) == -smooth_dilation_value(-u) bit for bit.
inline double smooth_erosion_value(const ScalarField& f, PixelIndex x, const SmoothParams& sp) {
    double mn = std::numeric_limits<double>::infinity();
    detail::for_window(f, x.row, x.col, sp.nb, [&](int, int, double v) { mn = std::min(mn, v); });
    double s = 0.0;
    detail::for_window(f, x.row, x.col, sp.nb,
                       [&](int, int, double v) { s += std::exp((mn - v) / sp.epsilon); });
    return mn - sp.epsilon * std::log(s);
}

inline ScalarField smooth_external_gradient(const ScalarField& f, const SmoothParams& sp) {
    ScalarField out(f.width, f.height);
    parallel_for(0, f.size(), [&](int idx) {
        const PixelIndex x{idx / f.width, idx % f.width};
        out[idx] = smooth_dilation_value(f, x, sp) - f[idx];
    });
    return out;
}

inline ScalarField smooth_internal_gradient(const ScalarField& f, const SmoothParams& sp) {
    ScalarField out(f.width, f.height);
    parallel_for(0, f.size(), [&](int idx) {
        const PixelIndex x{idx / f.width, idx % f.width};
        out[idx] = f[idx] - smooth_erosion_value(f, x, sp);
    });
    return out;
}

} // namespace wtopo
