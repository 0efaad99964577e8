#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "wtopo/adamw.hpp"
#include "wtopo/errors.hpp"
#include "wtopo/grid.hpp"
#include "wtopo/parallel.hpp"
#include "wtopo/persistence.hpp"
#include "wtopo/topo_energy.hpp"

namespace wtopo {

// Gaussian-mixture nonlocal weight (dense-CRF style): bilateral terms
// omega0 * exp(-|I(x)-I(y)|^2/alpha1 - |x-y|^2/alpha2) plus spatial terms
// omega1 * exp(-|x-y|^2/alpha3), truncated outside a Chebyshev window.
// Symmetric and nonnegative by construction.
struct WeightModel {
    std::vector<double> omega0{1.0};
    std::vector<double> omega1{0.0};
    std::vector<double> alpha1{1.0};
    std::vector<double> alpha2{1.0};
    std::vector<double> alpha3{1.0};
    int window_radius = 7;
    ScalarField image;

    int components() const { return static_cast<int>(omega0.size()); }

    void validate() const {
        const size_t n = omega0.size();
        if (n == 0 || omega1.size() != n || alpha1.size() != n || alpha2.size() != n ||
            alpha3.size() != n)
            throw config_error("weight model: mixture arrays must share one length");
        for (size_t i = 0; i < n; ++i) {
            if (omega0[i] < 0.0 || omega1[i] < 0.0)
                throw config_error("weight model: omega terms must be >= 0");
            if (alpha1[i] <= 0.0 || alpha2[i] <= 0.0 || alpha3[i] <= 0.0)
                throw config_error("weight model: alpha bandwidths must be > 0");
        }
        if (window_radius < 1) throw config_error("weight model: window radius must be >= 1");
    }
};

inline double weight(PixelIndex x, PixelIndex y, const WeightModel& model) {
    const int dr = x.row - y.row, dc = x.col - y.col;
    if (std::abs(dr) > model.window_radius || std::abs(dc) > model.window_radius) return 0.0;
    const double d2 = static_cast<double>(dr) * dr + static_cast<double>(dc) * dc;
    const double di = model.image.at(x) - model.image.at(y);
    const double color2 = di * di;
    double total = 0.0;
    for (int i = 0; i < model.components(); ++i) {
        const size_t j = static_cast<size_t>(i);
        total += model.omega0[j] * std::exp(-color2 / model.alpha1[j] - d2 / model.alpha2[j]) +
                 model.omega1[j] * std::exp(-d2 / model.alpha3[j]);
    }
    return total;
}

// Baked per-pixel stencils of the truncated weight, so each solver iteration
// pays window-sized multiply-adds instead of exp calls.
class NonlocalWeights {
public:
    explicit NonlocalWeights(const WeightModel& model)
        : width_(model.image.width), height_(model.image.height), radius_(model.window_radius) {
        model.validate();
        const int span = 2 * radius_ + 1;
        stencil_size_ = span * span;
        stencils_.assign(static_cast<size_t>(width_) * height_ * stencil_size_, 0.0);
        parallel_for(0, width_ * height_, [&](int idx) {
            const PixelIndex x{idx / width_, idx % width_};
            double* cell = &stencils_[static_cast<size_t>(idx) * stencil_size_];
            int j = 0;
            for (int dr = -radius_; dr <= radius_; ++dr) {
                for (int dc = -radius_; dc <= radius_; ++dc, ++j) {
                    const PixelIndex y{x.row + dr, x.col + dc};
                    if (y.row < 0 || y.row >= height_ || y.col < 0 || y.col >= width_) continue;
                    cell[j] = weight(x, y, model);
                }
            }
        });
    }

    int width() const { return width_; }
    int height() const { return height_; }
    int radius() const { return radius_; }

    // out(x) = sum_y w(x,y) f(y)
    ScalarField convolve(const ScalarField& f) const {
        if (f.width != width_ || f.height != height_)
            throw invariant_error("NonlocalWeights::convolve: shape mismatch");
        ScalarField out(width_, height_, 0.0);
        parallel_for(0, width_ * height_, [&](int idx) {
            const int row = idx / width_, col = idx % width_;
            const double* cell = &stencils_[static_cast<size_t>(idx) * stencil_size_];
            double acc = 0.0;
            int j = 0;
            for (int dr = -radius_; dr <= radius_; ++dr) {
                const int r2 = row + dr;
                for (int dc = -radius_; dc <= radius_; ++dc, ++j) {
                    const int c2 = col + dc;
                    if (r2 < 0 || r2 >= height_ || c2 < 0 || c2 >= width_) continue;
                    acc += cell[j] * f.at(r2, c2);
                }
            }
            out[idx] = acc;
        });
        return out;
    }

private:
    int width_, height_, radius_, stencil_size_ = 0;
    std::vector<double> stencils_;
};

namespace detail {

inline double zeta_at(const std::vector<double>& zeta, int l, int lp, int num_classes) {
    if (zeta.empty()) return l == lp ? 1.0 : 0.0;
    return zeta[static_cast<size_t>(l) * num_classes + lp];
}

inline double lambda_at(const std::vector<double>& lambda, int l) {
    return lambda.size() == 1 ? lambda[0] : lambda[static_cast<size_t>(l)];
}

inline ScalarField one_minus(const ScalarField& f) {
    ScalarField out(f.width, f.height);
    for (int i = 0; i < f.size(); ++i) out[i] = 1.0 - f[i];
    return out;
}

} // namespace detail

// [N(u)]_l(x) = lambda_l sum_{l'} zeta_{l,l'} sum_y w(x,y) (1 - u_{l'}(y))
inline std::vector<ScalarField> nonlocal_N(const SoftSegmentation& u, const NonlocalWeights& w,
                                           const std::vector<double>& lambda,
                                           const std::vector<double>& zeta) {
    const int num_classes = u.num_classes();
    std::vector<ScalarField> conv;
    conv.reserve(static_cast<size_t>(num_classes));
    for (int lp = 0; lp < num_classes; ++lp)
        conv.push_back(w.convolve(detail::one_minus(u.channels[static_cast<size_t>(lp)])));

    std::vector<ScalarField> out(static_cast<size_t>(num_classes),
                                 ScalarField(u.width(), u.height(), 0.0));
    for (int l = 0; l < num_classes; ++l) {
        const double lam = detail::lambda_at(lambda, l);
        for (int lp = 0; lp < num_classes; ++lp) {
            const double z = detail::zeta_at(zeta, l, lp, num_classes);
            if (z == 0.0) continue;
            auto& dst = out[static_cast<size_t>(l)];
            const auto& src = conv[static_cast<size_t>(lp)];
            for (int i = 0; i < dst.size(); ++i) dst[i] += lam * z * src[i];
        }
    }
    return out;
}

// R(u) = <u, N(u)>
inline double nonlocal_R(const SoftSegmentation& u, const NonlocalWeights& w,
                         const std::vector<double>& lambda, const std::vector<double>& zeta) {
    const std::vector<ScalarField> n = nonlocal_N(u, w, lambda, zeta);
    double total = 0.0;
    for (int l = 0; l < u.num_classes(); ++l) {
        const auto& ul = u.channels[static_cast<size_t>(l)];
        const auto& nl = n[static_cast<size_t>(l)];
        for (int i = 0; i < ul.size(); ++i) total += ul[i] * nl[i];
    }
    return total;
}

// Exact gradient of R for symmetric w (two-term form; collapses to
// lambda_l sum_{l'} zeta_{l,l'} w*(1-2u_{l'}) for symmetric zeta and
// uniform lambda).
inline std::vector<ScalarField> subgradient_p(const SoftSegmentation& u, const NonlocalWeights& w,
                                              const std::vector<double>& lambda,
                                              const std::vector<double>& zeta) {
    const int num_classes = u.num_classes();
    std::vector<ScalarField> conv_one_minus, conv_u;
    conv_one_minus.reserve(static_cast<size_t>(num_classes));
    conv_u.reserve(static_cast<size_t>(num_classes));
    for (int lp = 0; lp < num_classes; ++lp) {
        conv_one_minus.push_back(w.convolve(detail::one_minus(u.channels[static_cast<size_t>(lp)])));
        conv_u.push_back(w.convolve(u.channels[static_cast<size_t>(lp)]));
    }

    std::vector<ScalarField> out(static_cast<size_t>(num_classes),
                                 ScalarField(u.width(), u.height(), 0.0));
    for (int l = 0; l < num_classes; ++l) {
        auto& dst = out[static_cast<size_t>(l)];
        const double lam_l = detail::lambda_at(lambda, l);
        for (int lp = 0; lp < num_classes; ++lp) {
            const double z_llp = detail::zeta_at(zeta, l, lp, num_classes);
            const double z_lpl = detail::zeta_at(zeta, lp, l, num_classes);
            const double lam_lp = detail::lambda_at(lambda, lp);
            const auto& a = conv_one_minus[static_cast<size_t>(lp)];
            const auto& b = conv_u[static_cast<size_t>(lp)];
            for (int i = 0; i < dst.size(); ++i)
                dst[i] += lam_l * z_llp * a[i] - lam_lp * z_lpl * b[i];
        }
    }
    return out;
}

// Proximal dual step, projected onto the unit box.
inline ScalarField dual_q_update(const ScalarField& q, const ScalarField& v,
                                 const ScalarField& u) {
    if (!q.same_shape(v) || !q.same_shape(u))
        throw invariant_error("dual_q_update: shape mismatch");
    ScalarField out(q.width, q.height);
    for (int i = 0; i < q.size(); ++i)
        out[i] = std::clamp(q[i] + (v[i] - u[i]), -1.0, 1.0);
    return out;
}

// One AdamW step on the v-subproblem: gradient of the frozen-set surrogate
// plus the dual coupling eta*q.
inline ScalarField v_update(const ScalarField& v, const ScalarField& q,
                            const FrozenCriticalSets& frozen, const TopoParams& topo,
                            AdamWState& state, const AdamWParams& hp, double eta) {
    ScalarField grad = surrogate_gradient(v, frozen, topo);
    for (int i = 0; i < grad.size(); ++i) grad[i] += eta * q[i];
    return adamw_step(state, v, grad, hp);
}

// Closed-form CCCP step: u = softmax((o - p + eta*q_bar)/gamma), q_bar
// nonzero only in the topological channel. Softmax keeps every iterate on
// the simplex.
inline SoftSegmentation u_update(const std::vector<ScalarField>& o,
                                 const std::vector<ScalarField>& p, const ScalarField& q,
                                 double eta, double gamma, int topo_channel) {
    if (gamma <= 0.0) throw config_error("u_update: gamma must be > 0");
    const int num_classes = static_cast<int>(o.size());
    const int w = o[0].width, h = o[0].height;
    SoftSegmentation u;
    u.channels.assign(static_cast<size_t>(num_classes), ScalarField(w, h));
    std::vector<double> e(static_cast<size_t>(num_classes));
    for (int i = 0; i < w * h; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int l = 0; l < num_classes; ++l) {
            const size_t sl = static_cast<size_t>(l);
            double arg = o[sl][i] - p[sl][i];
            if (l == topo_channel) arg += eta * q[i];
            e[sl] = arg / gamma;
            mx = std::max(mx, e[sl]);
        }
        double sum = 0.0;
        for (int l = 0; l < num_classes; ++l) {
            e[static_cast<size_t>(l)] = std::exp(e[static_cast<size_t>(l)] - mx);
            sum += e[static_cast<size_t>(l)];
        }
        for (int l = 0; l < num_classes; ++l)
            u.channels[static_cast<size_t>(l)][i] = e[static_cast<size_t>(l)] / sum;
    }
    return u;
}

inline SoftSegmentation softmax_channels(const std::vector<ScalarField>& o) {
    const int num_classes = static_cast<int>(o.size());
    std::vector<ScalarField> zeros(static_cast<size_t>(num_classes),
                                   ScalarField(o[0].width, o[0].height, 0.0));
    return u_update(o, zeros, ScalarField(o[0].width, o[0].height, 0.0), 0.0, 1.0, 0);
}

struct SolverConfig {
    std::vector<double> lambda{1.0}; // scalar broadcast or one per class
    double gamma = 0.3;
    std::vector<double> zeta; // row-major LxL; empty = identity
    double eta = 0.0;
    int topo_channel = 0;
    int max_iters = 300;
    double tol = 1e-4;
    int v_init_steps = 25;
    int recompute_every = 1;
    TopoParams topo;
    AdamWParams adamw{0.003, 0.01, 0.9, 0.999, 1e-8};
    WeightModel weights;

    void validate(int num_classes) const {
        if (gamma <= 0.0) throw config_error("nlstd: gamma must be > 0");
        if (eta < 0.0) throw config_error("nlstd: eta must be >= 0");
        if (topo_channel < 0 || topo_channel >= num_classes)
            throw config_error("nlstd: topo_channel out of range");
        if (lambda.size() != 1 && lambda.size() != static_cast<size_t>(num_classes))
            throw config_error("nlstd: lambda must be scalar or one per class");
        for (double l : lambda)
            if (l <= 0.0) throw config_error("nlstd: lambda must be > 0");
        if (!zeta.empty()) {
            if (zeta.size() != static_cast<size_t>(num_classes) * num_classes)
                throw config_error("nlstd: zeta must be LxL");
            for (int a = 0; a < num_classes; ++a)
                for (int b = 0; b < num_classes; ++b)
                    if (zeta[static_cast<size_t>(a) * num_classes + b] !=
                        zeta[static_cast<size_t>(b) * num_classes + a])
                        throw config_error("nlstd: zeta must be symmetric");
        }
        if (max_iters < 1 || v_init_steps < 0 || recompute_every < 1)
            throw config_error("nlstd: bad loop controls");
    }
};

struct IterateRecord {
    int iter = 0;
    double energy_f = 0.0;
    double energy_s = 0.0;
    double energy_r = 0.0;
    double energy_t = 0.0;
    double l1_gap = 0.0;
    double delta_u_inf = 0.0;
};

struct SolveResult {
    SoftSegmentation u;
    ScalarField v;
    ScalarField q;
    std::vector<IterateRecord> log;
};

namespace detail {

inline double fidelity_energy(const std::vector<ScalarField>& o, const SoftSegmentation& u) {
    double total = 0.0;
    for (size_t l = 0; l < o.size(); ++l)
        for (int i = 0; i < o[l].size(); ++i) total -= o[l][i] * u.channels[l][i];
    return total;
}

// gamma <u, ln u>; the log argument is floored at 1e-12 (evaluation only,
// the softmax update itself never produces zeros).
inline double entropy_energy(const SoftSegmentation& u, double gamma) {
    double total = 0.0;
    for (const auto& c : u.channels)
        for (int i = 0; i < c.size(); ++i) total += c[i] * std::log(std::max(c[i], 1e-12));
    return gamma * total;
}

} // namespace detail

// Algorithm: init u = softmax(o), v by AdamW steps on the surrogate frozen
// at u0, q = clamp(v - u); then iterate (dual step, AdamW v-step with
// critical sets recomputed from the current v, closed-form CCCP u-step)
// until ||u' - u||_inf < tol or max_iters.
inline SolveResult run_topo_nlstd(const std::vector<ScalarField>& features,
                                  const ScalarField& image, const SolverConfig& config) {
    const int num_classes = static_cast<int>(features.size());
    if (num_classes < 2) throw config_error("nlstd: need at least two feature channels");
    for (const auto& f : features) {
        if (!f.same_shape(features[0]) || !f.same_shape(image))
            throw invariant_error("nlstd: feature/image shape mismatch");
        if (!f.all_finite()) throw invariant_error("nlstd: non-finite features");
    }
    config.validate(num_classes);

    WeightModel model = config.weights;
    model.image = image;
    const NonlocalWeights w(model);
    const int width = image.width, height = image.height;
    const int lstar = config.topo_channel;

    SolveResult result;
    result.u = softmax_channels(features);

    // v0 ~ argmin of the surrogate frozen at u0.
    result.v = result.u.channels[static_cast<size_t>(lstar)];
    {
        const FrozenCriticalSets frozen =
            freeze_critical_sets(compute_superlevel_persistence(result.v), config.topo);
        AdamWState init_state(width, height);
        for (int i = 0; i < config.v_init_steps; ++i) {
            const ScalarField grad = surrogate_gradient(result.v, frozen, config.topo);
            result.v = adamw_step(init_state, result.v, grad, config.adamw);
        }
    }
    result.q = ScalarField(width, height, 0.0);
    result.q = dual_q_update(result.q, result.v, result.u.channels[static_cast<size_t>(lstar)]);

    AdamWState v_state(width, height);
    FrozenCriticalSets frozen;
    for (int t = 0; t < config.max_iters; ++t) {
        result.q = dual_q_update(result.q, result.v, result.u.channels[static_cast<size_t>(lstar)]);

        if (t % config.recompute_every == 0)
            frozen = freeze_critical_sets(compute_superlevel_persistence(result.v), config.topo);
        result.v = v_update(result.v, result.q, frozen, config.topo, v_state, config.adamw,
                            config.eta);

        const std::vector<ScalarField> p = subgradient_p(result.u, w, config.lambda, config.zeta);
        SoftSegmentation u_next =
            u_update(features, p, result.q, config.eta, config.gamma, lstar);

        IterateRecord rec;
        rec.iter = t;
        rec.energy_f = detail::fidelity_energy(features, u_next);
        rec.energy_s = detail::entropy_energy(u_next, config.gamma);
        rec.energy_r = nonlocal_R(u_next, w, config.lambda, config.zeta);
        rec.energy_t = surrogate_energy(result.v, frozen, config.topo);
        double l1 = 0.0, dinf = 0.0;
        const auto& u_next_l = u_next.channels[static_cast<size_t>(lstar)];
        for (int i = 0; i < result.v.size(); ++i) l1 += std::abs(result.v[i] - u_next_l[i]);
        for (int l = 0; l < num_classes; ++l)
            for (int i = 0; i < u_next_l.size(); ++i)
                dinf = std::max(dinf, std::abs(u_next.channels[static_cast<size_t>(l)][i] -
                                               result.u.channels[static_cast<size_t>(l)][i]));
        rec.l1_gap = l1;
        rec.delta_u_inf = dinf;
        result.log.push_back(rec);

        result.u = std::move(u_next);
        if (dinf < config.tol) break;
    }
    return result;
}

inline void write_iterate_log_csv(const std::vector<IterateRecord>& log, std::ostream& out) {
    out << "iter,energy_F,energy_S,energy_R,energy_T,l1_gap,delta_u_inf\n";
    for (const auto& r : log) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", r.iter,
                      r.energy_f, r.energy_s, r.energy_r, r.energy_t, r.l1_gap, r.delta_u_inf);
        out << buf << "\n";
    }
}

// ---- losses and evaluation metrics ----

// 1 - mean over channels of 2<u,g>/(|u|^2+|g|^2); an all-zero channel pair
// contributes a perfect-match term.
inline double dice_loss(const SoftSegmentation& u, const SoftSegmentation& g) {
    if (u.num_classes() != g.num_classes() || u.num_classes() == 0)
        throw invariant_error("dice_loss: channel count mismatch");
    double mean_term = 0.0;
    for (int l = 0; l < u.num_classes(); ++l) {
        const auto& ul = u.channels[static_cast<size_t>(l)];
        const auto& gl = g.channels[static_cast<size_t>(l)];
        if (!ul.same_shape(gl)) throw invariant_error("dice_loss: shape mismatch");
        double inter = 0.0, denom = 0.0;
        for (int i = 0; i < ul.size(); ++i) {
            inter += ul[i] * gl[i];
            denom += ul[i] * ul[i] + gl[i] * gl[i];
        }
        mean_term += denom == 0.0 ? 1.0 : 2.0 * inter / denom;
    }
    return 1.0 - mean_term / u.num_classes();
}

inline double topo_loss(const SoftSegmentation& u, const SoftSegmentation& g, double alpha,
                        const TopoParams& topo, int topo_channel) {
    double loss = dice_loss(u, g);
    if (alpha != 0.0)
        loss += alpha * wt_energy(u.channels[static_cast<size_t>(topo_channel)], topo).value;
    return loss;
}

struct MetricsReport {
    double accuracy = 0.0;
    double dice = 0.0;
    double iou = 0.0;
    double betti_error_0 = 0.0;
    double betti_error_1 = 0.0;
};

// Pixel metrics on 0.5-binarized fields plus Betti errors from the
// persistence diagrams at threshold 0.5.
inline MetricsReport compute_metrics(const ScalarField& pred, const ScalarField& truth,
                                     std::optional<int> beta0_target = std::nullopt,
                                     std::optional<int> beta1_target = std::nullopt) {
    if (!pred.same_shape(truth)) throw invariant_error("metrics: shape mismatch");
    ScalarField pb(pred.width, pred.height), tb(pred.width, pred.height);
    for (int i = 0; i < pred.size(); ++i) {
        pb[i] = pred[i] >= 0.5 ? 1.0 : 0.0;
        tb[i] = truth[i] >= 0.5 ? 1.0 : 0.0;
    }
    long inter = 0, p_size = 0, t_size = 0, match = 0;
    for (int i = 0; i < pb.size(); ++i) {
        const bool p = pb[i] > 0.5, t = tb[i] > 0.5;
        if (p) ++p_size;
        if (t) ++t_size;
        if (p && t) ++inter;
        if (p == t) ++match;
    }
    MetricsReport report;
    report.accuracy = static_cast<double>(match) / pb.size();
    report.dice = (p_size + t_size) == 0
                      ? 1.0
                      : 2.0 * static_cast<double>(inter) / static_cast<double>(p_size + t_size);
    const long uni = p_size + t_size - inter;
    report.iou = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);

    const PersistenceDiagram dp = compute_superlevel_persistence(pb);
    const int pred_b0 = betti_at_threshold(dp, 0.5, 0);
    const int pred_b1 = betti_at_threshold(dp, 0.5, 1);
    int truth_b0, truth_b1;
    if (beta0_target || beta1_target) {
        truth_b0 = beta0_target.value_or(pred_b0);
        truth_b1 = beta1_target.value_or(pred_b1);
    } else {
        const PersistenceDiagram dt = compute_superlevel_persistence(tb);
        truth_b0 = betti_at_threshold(dt, 0.5, 0);
        truth_b1 = betti_at_threshold(dt, 0.5, 1);
    }
    report.betti_error_0 = std::abs(pred_b0 - truth_b0);
    report.betti_error_1 = std::abs(pred_b1 - truth_b1);
    return report;
}

} // namespace wtopo
