#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "wtopo/grid.hpp"

namespace fixtures {

using wtopo::PixelIndex;
using wtopo::ScalarField;

// Field realizing the textbook superlevel event sequence: three components
// born at 243, merges at 241 and 65, two loops born at 198 and 26 that fill
// at 1; stored as value/255. 9 columns x 10 rows.
inline ScalarField staircase_rings_field() {
    const int w = 9, h = 10;
    std::vector<int> v(static_cast<size_t>(w) * h, 0);
    auto set = [&](int row, int col, int value) { v[static_cast<size_t>(row) * w + col] = value; };

    // upper ring, weak link 198 at (3,3), interior at 1
    for (int col = 1; col <= 5; ++col) set(1, col, 243);
    set(2, 1, 243);
    set(2, 5, 243);
    for (int col = 1; col <= 5; ++col) set(3, col, 243);
    set(3, 3, 198);
    for (int col = 2; col <= 4; ++col) set(2, col, 1);

    // vertical connector joining the rings at 65
    set(4, 1, 65);
    set(5, 1, 65);

    // lower ring, weak link 26 at (8,3), interior at 1
    for (int col = 1; col <= 5; ++col) set(6, col, 243);
    set(7, 1, 243);
    set(7, 5, 243);
    for (int col = 1; col <= 5; ++col) set(8, col, 243);
    set(8, 3, 26);
    for (int col = 2; col <= 4; ++col) set(7, col, 1);

    // third blob bridged to the lower ring at 241
    set(7, 6, 241);
    set(7, 7, 243);

    ScalarField f(w, h);
    for (int i = 0; i < f.size(); ++i) f[i] = static_cast<double>(v[static_cast<size_t>(i)]) / 255.0;
    return f;
}

// Two cone-profile blobs with plateau cores on a low background; a unique
// saddle sits at the midpoint (row 16, col 24). One finite dim-0 pair.
inline ScalarField two_blob_image(int width = 48, int height = 32) {
    const double cr = 16.0;
    const double c1 = 12.0, c2 = 36.0;
    ScalarField f(width, height);
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            const double d1 = std::hypot(r - cr, c - c1);
            const double d2 = std::hypot(r - cr, c - c2);
            auto profile = [](double d) {
                if (d <= 5.0) return 1.0;
                return std::max(0.0, 1.0 - (d - 5.0) / 9.0);
            };
            f.at(r, c) = std::max({profile(d1), profile(d2), 0.05});
        }
    }
    return f;
}

// Two bright half-planes split by a one-pixel dark slit whose brightest
// pixel sits at the center: the single merge saddle of the image. The slit
// values step down by 0.35 per row away from the center.
inline ScalarField single_saddle_image(int size = 11) {
    ScalarField f(size, size, 1.0);
    const int mid = size / 2;
    for (int r = 0; r < size; ++r)
        f.at(r, mid) = std::max(0.8 - 0.35 * std::abs(r - mid), 0.05);
    return f;
}

// Two value-1 plateau squares on a constant 0.1 background. Every critical
// pixel of the superlevel diagram is an extremum of its own window, so the
// smooth energy converges to the plain persistence energy as epsilon -> 0.
inline ScalarField plateau_blobs_image() {
    ScalarField f(20, 12, 0.1);
    for (int r = 3; r <= 8; ++r)
        for (int c = 2; c <= 7; ++c) f.at(r, c) = 1.0;
    for (int r = 3; r <= 8; ++r)
        for (int c = 12; c <= 17; ++c) f.at(r, c) = 1.0;
    return f;
}

inline ScalarField random_levels_field(std::mt19937& rng, int max_side, int max_levels) {
    std::uniform_int_distribution<int> side(1, max_side);
    std::uniform_int_distribution<int> nlevels(1, max_levels);
    const int w = side(rng), h = side(rng), k = nlevels(rng);
    std::uniform_int_distribution<int> level(0, k - 1);
    ScalarField f(w, h);
    for (int i = 0; i < f.size(); ++i)
        f[i] = static_cast<double>(level(rng)) / std::max(1, max_levels - 1);
    return f;
}

// All pixel values pairwise distinct, in (0,1).
inline ScalarField random_distinct_field(std::mt19937& rng, int w, int h) {
    std::vector<int> perm(static_cast<size_t>(w) * h);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    ScalarField f(w, h);
    for (int i = 0; i < f.size(); ++i)
        f[i] = (perm[static_cast<size_t>(i)] + 0.5) / static_cast<double>(w * h);
    return f;
}

inline ScalarField random_uniform_field(std::mt19937& rng, int w, int h, double lo = 0.0,
                                        double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    ScalarField f(w, h);
    for (int i = 0; i < f.size(); ++i) f[i] = dist(rng);
    return f;
}

inline std::vector<double> sorted_distinct_values(const ScalarField& f) {
    std::vector<double> vals(f.values);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    return vals;
}

} // namespace fixtures
