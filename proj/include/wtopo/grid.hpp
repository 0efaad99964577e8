#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "wtopo/errors.hpp"

namespace wtopo {

struct PixelIndex {
    int row = 0;
    int col = 0;

    friend bool operator==(PixelIndex a, PixelIndex b) {
        return a.row == b.row && a.col == b.col;
    }
};

inline int linear_index(PixelIndex p, int width) { return p.row * width + p.col; }

inline PixelIndex pixel_from_linear(int idx, int width) {
    return PixelIndex{idx / width, idx % width};
}

// W x H grid of real values, row-major. Normalized image channels live in
// [0,1]; feature channels may hold any finite value.
struct ScalarField {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    ScalarField() = default;
    ScalarField(int w, int h, double fill = 0.0)
        : width(w), height(h), values(static_cast<size_t>(w) * h, fill) {}

    int size() const { return width * height; }

    double& at(int row, int col) { return values[static_cast<size_t>(row) * width + col]; }
    double at(int row, int col) const { return values[static_cast<size_t>(row) * width + col]; }
    double& at(PixelIndex p) { return at(p.row, p.col); }
    double at(PixelIndex p) const { return at(p.row, p.col); }
    double& operator[](int idx) { return values[static_cast<size_t>(idx)]; }
    double operator[](int idx) const { return values[static_cast<size_t>(idx)]; }

    bool same_shape(const ScalarField& other) const {
        return width == other.width && height == other.height;
    }

    bool in_bounds(PixelIndex p) const {
        return p.row >= 0 && p.row < height && p.col >= 0 && p.col < width;
    }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }

    double min_value() const {
        double m = values.empty() ? 0.0 : values[0];
        for (double v : values) m = std::min(m, v);
        return m;
    }

    double max_value() const {
        double m = values.empty() ? 0.0 : values[0];
        for (double v : values) m = std::max(m, v);
        return m;
    }
};

// Structuring element: all pixels within Chebyshev (square) or Euclidean
// (disc) distance r. Clipped at image borders, so the window always contains
// its center and never invents values.
struct NeighborhoodSpec {
    enum class Shape { square, disc };
    Shape shape = Shape::square;
    int radius = 1;
};

// Unclipped window offsets, ordered by (row, col) so that the clipped pixel
// list below comes out sorted by linear index.
inline std::vector<std::pair<int, int>> neighborhood_offsets(const NeighborhoodSpec& spec) {
    std::vector<std::pair<int, int>> offs;
    const int r = spec.radius;
    const long r2 = static_cast<long>(r) * r;
    for (int dr = -r; dr <= r; ++dr) {
        for (int dc = -r; dc <= r; ++dc) {
            if (spec.shape == NeighborhoodSpec::Shape::disc &&
                static_cast<long>(dr) * dr + static_cast<long>(dc) * dc > r2)
                continue;
            offs.emplace_back(dr, dc);
        }
    }
    return offs;
}

inline std::vector<PixelIndex> neighborhood(PixelIndex x, const NeighborhoodSpec& spec,
                                            int width, int height) {
    std::vector<PixelIndex> out;
    const int r = spec.radius;
    const long r2 = static_cast<long>(r) * r;
    for (int dr = -r; dr <= r; ++dr) {
        const int row = x.row + dr;
        if (row < 0 || row >= height) continue;
        for (int dc = -r; dc <= r; ++dc) {
            const int col = x.col + dc;
            if (col < 0 || col >= width) continue;
            if (spec.shape == NeighborhoodSpec::Shape::disc &&
                static_cast<long>(dr) * dr + static_cast<long>(dc) * dc > r2)
                continue;
            out.push_back(PixelIndex{row, col});
        }
    }
    return out;
}

// L stacked channels summing to one at every pixel.
struct SoftSegmentation {
    std::vector<ScalarField> channels;

    int num_classes() const { return static_cast<int>(channels.size()); }
    int width() const { return channels.empty() ? 0 : channels[0].width; }
    int height() const { return channels.empty() ? 0 : channels[0].height; }

    bool satisfies_simplex(double tol = 1e-9) const {
        if (channels.size() < 2) return false;
        const int n = channels[0].size();
        for (const auto& c : channels)
            if (!c.same_shape(channels[0])) return false;
        for (int i = 0; i < n; ++i) {
            double sum = 0.0;
            for (const auto& c : channels) {
                const double v = c[i];
                if (v < -tol || v > 1.0 + tol) return false;
                sum += v;
            }
            if (std::abs(sum - 1.0) > tol) return false;
        }
        return true;
    }
};

// Per-pixel renormalization of nonnegative channels; an all-zero pixel
// becomes uniform 1/L. Used only for input sanitation, the solver updates
// stay on the simplex by construction.
inline SoftSegmentation project_simplex(std::vector<ScalarField> channels) {
    if (channels.size() < 2)
        throw invariant_error("project_simplex: need at least 2 channels");
    const int n = channels[0].size();
    for (const auto& c : channels)
        if (!c.same_shape(channels[0]))
            throw invariant_error("project_simplex: channel shape mismatch");
    const double uniform = 1.0 / static_cast<double>(channels.size());
    for (int i = 0; i < n; ++i) {
        double sum = 0.0;
        for (const auto& c : channels) {
            if (c[i] < 0.0)
                throw invariant_error("project_simplex: negative channel value");
            sum += c[i];
        }
        if (sum == 0.0) {
            for (auto& c : channels) c[i] = uniform;
        } else {
            for (auto& c : channels) c[i] /= sum;
        }
    }
    return SoftSegmentation{std::move(channels)};
}

} // namespace wtopo
