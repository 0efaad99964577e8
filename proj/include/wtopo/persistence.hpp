#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "wtopo/errors.hpp"
#include "wtopo/grid.hpp"

namespace wtopo {

// Persistent homology of the superlevel-set filtration {x : u(x) >= t} of a
// 2D grid, dimensions 0 and 1, with critical pixels.
//
// Construction (V-construction): a pixel enters at its own value; edges and
// squares enter at the minimum of their vertices. Superlevel components use
// 4-connectivity, the complement uses 8-connectivity — the dual pair that
// keeps 2D grid topology consistent.
//
// Dimension 0 is a union-find sweep over pixels in decreasing value order.
// At a merge the component with the smaller birth value dies (elder rule;
// ties broken toward the smaller birth-pixel linear index). The component of
// the global maximum survives as the single essential class.
//
// Dimension 1 uses planar duality: a hole of the superlevel set is a bounded
// 8-connected component of the complement. Running union-find over pixels in
// increasing value order, with a virtual outside node joined to every border
// pixel, computes exactly those bars: a complement component born at its
// interior minimum m is absorbed at a saddle value s, which in the superlevel
// filtration is a hole born at b = s (saddle pixel) and dead at d = m
// (interior minimum pixel). Zero-persistence pairs are discarded.

struct PersistencePair {
    int dim = 0;
    double birth = 0.0;
    double death = 0.0; // -inf for essential pairs
    PixelIndex birth_pixel;
    PixelIndex death_pixel; // meaningful only when !essential
    bool essential = false;

    double persistence() const { return birth - death; }
};

struct PersistenceDiagram {
    // Sorted within each dimension by persistence descending, ties broken by
    // (birth descending, birth-pixel linear index ascending). Essential pairs
    // have infinite persistence and therefore lead their dimension.
    std::vector<PersistencePair> pairs;
    int width = 0;
    int height = 0;

    int finite_count(int dim) const {
        int n = 0;
        for (const auto& p : pairs)
            if (p.dim == dim && !p.essential) ++n;
        return n;
    }

    std::vector<PersistencePair> finite_pairs(int dim) const {
        std::vector<PersistencePair> out;
        for (const auto& p : pairs)
            if (p.dim == dim && !p.essential) out.push_back(p);
        return out;
    }
};

namespace detail {

struct UnionFind {
    std::vector<int> parent;
    std::vector<int> rank_;

    explicit UnionFind(int n) : parent(static_cast<size_t>(n)), rank_(static_cast<size_t>(n), 0) {
        std::iota(parent.begin(), parent.end(), 0);
    }

    int find(int a) {
        int root = a;
        while (parent[static_cast<size_t>(root)] != root) root = parent[static_cast<size_t>(root)];
        while (parent[static_cast<size_t>(a)] != root) {
            int next = parent[static_cast<size_t>(a)];
            parent[static_cast<size_t>(a)] = root;
            a = next;
        }
        return root;
    }

    // Links two roots, returns the new root.
    int link(int a, int b) {
        if (rank_[static_cast<size_t>(a)] < rank_[static_cast<size_t>(b)]) std::swap(a, b);
        parent[static_cast<size_t>(b)] = a;
        if (rank_[static_cast<size_t>(a)] == rank_[static_cast<size_t>(b)]) ++rank_[static_cast<size_t>(a)];
        return a;
    }
};

} // namespace detail

inline PersistenceDiagram compute_superlevel_persistence(const ScalarField& f) {
    if (!f.all_finite())
        throw invariant_error("compute_superlevel_persistence: non-finite field");
    const int w = f.width, h = f.height, n = f.size();
    PersistenceDiagram diagram;
    diagram.width = w;
    diagram.height = h;
    if (n == 0) return diagram;

    const double neg_inf = -std::numeric_limits<double>::infinity();
    auto px = [&](int idx) { return pixel_from_linear(idx, w); };

    // ---- dimension 0: superlevel sweep, 4-connectivity ----
    {
        std::vector<int> order(static_cast<size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            if (f[a] != f[b]) return f[a] > f[b];
            return a < b;
        });

        detail::UnionFind uf(n);
        std::vector<double> birth_val(static_cast<size_t>(n));
        std::vector<int> birth_px(static_cast<size_t>(n));
        std::vector<char> active(static_cast<size_t>(n), 0);

        for (int idx : order) {
            const int row = idx / w, col = idx % w;
            const double v = f[idx];
            birth_val[static_cast<size_t>(idx)] = v;
            birth_px[static_cast<size_t>(idx)] = idx;
            active[static_cast<size_t>(idx)] = 1;

            const int nbs[4] = {row > 0 ? idx - w : -1, col > 0 ? idx - 1 : -1,
                                col + 1 < w ? idx + 1 : -1, row + 1 < h ? idx + w : -1};
            for (int nb : nbs) {
                if (nb < 0 || !active[static_cast<size_t>(nb)]) continue;
                int ra = uf.find(idx);
                int rb = uf.find(nb);
                if (ra == rb) continue;
                // Elder rule: smaller birth value dies; tie -> larger birth
                // pixel index dies.
                int survivor = ra, dier = rb;
                if (birth_val[static_cast<size_t>(ra)] < birth_val[static_cast<size_t>(rb)] ||
                    (birth_val[static_cast<size_t>(ra)] == birth_val[static_cast<size_t>(rb)] &&
                     birth_px[static_cast<size_t>(ra)] > birth_px[static_cast<size_t>(rb)])) {
                    survivor = rb;
                    dier = ra;
                }
                if (birth_val[static_cast<size_t>(dier)] != v) {
                    // Death pixel: the lower-valued endpoint of the merging
                    // edge; equal values pick the smaller linear index.
                    const int death_px = (f[nb] == v && nb < idx) ? nb : idx;
                    PersistencePair pair;
                    pair.dim = 0;
                    pair.birth = birth_val[static_cast<size_t>(dier)];
                    pair.death = v;
                    pair.birth_pixel = px(birth_px[static_cast<size_t>(dier)]);
                    pair.death_pixel = px(death_px);
                    diagram.pairs.push_back(pair);
                }
                const int root = uf.link(ra, rb);
                birth_val[static_cast<size_t>(root)] = birth_val[static_cast<size_t>(survivor)];
                birth_px[static_cast<size_t>(root)] = birth_px[static_cast<size_t>(survivor)];
            }
        }

        const int root = uf.find(order.back());
        PersistencePair essential;
        essential.dim = 0;
        essential.birth = birth_val[static_cast<size_t>(root)];
        essential.death = neg_inf;
        essential.birth_pixel = px(birth_px[static_cast<size_t>(root)]);
        essential.essential = true;
        diagram.pairs.push_back(essential);
    }

    // ---- dimension 1: dual sublevel sweep over the complement, 8-conn ----
    {
        std::vector<int> order(static_cast<size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            if (f[a] != f[b]) return f[a] < f[b];
            return a < b;
        });

        const int outside = n;
        detail::UnionFind uf(n + 1);
        std::vector<double> birth_val(static_cast<size_t>(n) + 1);
        std::vector<int> birth_px(static_cast<size_t>(n) + 1, -1);
        std::vector<char> active(static_cast<size_t>(n) + 1, 0);
        birth_val[static_cast<size_t>(outside)] = neg_inf;
        active[static_cast<size_t>(outside)] = 1;

        auto do_union = [&](int a, int b, double v, int saddle_px) {
            int ra = uf.find(a);
            int rb = uf.find(b);
            if (ra == rb) return;
            // Sublevel elder rule: smaller birth (the outside node is -inf
            // and always survives); tie -> smaller birth pixel index.
            int survivor = ra, dier = rb;
            if (birth_val[static_cast<size_t>(ra)] > birth_val[static_cast<size_t>(rb)] ||
                (birth_val[static_cast<size_t>(ra)] == birth_val[static_cast<size_t>(rb)] &&
                 birth_px[static_cast<size_t>(ra)] > birth_px[static_cast<size_t>(rb)])) {
                survivor = rb;
                dier = ra;
            }
            if (birth_val[static_cast<size_t>(dier)] != v) {
                // A complement component born at its minimum dies at this
                // saddle: in the superlevel filtration that hole is born at
                // the saddle value and filled at the interior minimum.
                PersistencePair pair;
                pair.dim = 1;
                pair.birth = v;
                pair.death = birth_val[static_cast<size_t>(dier)];
                pair.birth_pixel = px(saddle_px);
                pair.death_pixel = px(birth_px[static_cast<size_t>(dier)]);
                diagram.pairs.push_back(pair);
            }
            const int root = uf.link(ra, rb);
            birth_val[static_cast<size_t>(root)] = birth_val[static_cast<size_t>(survivor)];
            birth_px[static_cast<size_t>(root)] = birth_px[static_cast<size_t>(survivor)];
        };

        for (int idx : order) {
            const int row = idx / w, col = idx % w;
            const double v = f[idx];
            birth_val[static_cast<size_t>(idx)] = v;
            birth_px[static_cast<size_t>(idx)] = idx;
            active[static_cast<size_t>(idx)] = 1;

            if (row == 0 || row == h - 1 || col == 0 || col == w - 1)
                do_union(idx, outside, v, idx);

            for (int dr = -1; dr <= 1; ++dr) {
                const int r2 = row + dr;
                if (r2 < 0 || r2 >= h) continue;
                for (int dc = -1; dc <= 1; ++dc) {
                    if (dr == 0 && dc == 0) continue;
                    const int c2 = col + dc;
                    if (c2 < 0 || c2 >= w) continue;
                    const int nb = r2 * w + c2;
                    if (!active[static_cast<size_t>(nb)]) continue;
                    const int saddle_px = (f[nb] == v && nb < idx) ? nb : idx;
                    do_union(idx, nb, v, saddle_px);
                }
            }
        }
    }

    std::sort(diagram.pairs.begin(), diagram.pairs.end(),
              [&](const PersistencePair& a, const PersistencePair& b) {
                  if (a.dim != b.dim) return a.dim < b.dim;
                  const double pa = a.persistence(), pb = b.persistence();
                  if (pa != pb) return pa > pb;
                  if (a.birth != b.birth) return a.birth > b.birth;
                  return linear_index(a.birth_pixel, w) < linear_index(b.birth_pixel, w);
              });
    return diagram;
}

// Number of dim-k features alive at threshold t: pairs with b >= t > d,
// essential pairs counted whenever b >= t.
inline int betti_at_threshold(const PersistenceDiagram& diagram, double t, int dim) {
    int count = 0;
    for (const auto& p : diagram.pairs) {
        if (p.dim != dim) continue;
        if (p.birth >= t && (p.essential || t > p.death)) ++count;
    }
    return count;
}

// Split of the finite dim-k pairs at rank beta: the beta most persistent
// pairs are encouraged, the rest penalized. Essential pairs never appear.
struct CriticalSplit {
    std::vector<PersistencePair> encouraged;
    std::vector<PersistencePair> penalized;
};

inline CriticalSplit critical_sets(const PersistenceDiagram& diagram, int dim, int beta) {
    if (beta < 0) throw invariant_error("critical_sets: beta must be >= 0");
    CriticalSplit split;
    int rank = 0;
    for (const auto& p : diagram.pairs) {
        if (p.dim != dim || p.essential) continue;
        if (rank < beta)
            split.encouraged.push_back(p);
        else
            split.penalized.push_back(p);
        ++rank;
    }
    return split;
}

namespace detail {

inline void write_pair_csv_row(std::ostream& out, const PersistencePair& p) {
    char buf[160];
    if (p.essential) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,-inf,%d,%d,,,1", p.dim, p.birth,
                      p.birth_pixel.row, p.birth_pixel.col);
    } else {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%d,%d,%d,%d,0", p.dim, p.birth,
                      p.death, p.birth_pixel.row, p.birth_pixel.col, p.death_pixel.row,
                      p.death_pixel.col);
    }
    out << buf << "\n";
}

} // namespace detail

inline void write_diagram_csv(const PersistenceDiagram& diagram, std::ostream& out) {
    out << "dim,birth,death,birth_row,birth_col,death_row,death_col,essential\n";
    for (const auto& p : diagram.pairs) detail::write_pair_csv_row(out, p);
}

inline void write_diagram_csv(const PersistenceDiagram& diagram, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    write_diagram_csv(diagram, out);
}

} // namespace wtopo
