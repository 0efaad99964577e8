#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "wtopo/nlstd.hpp"

using namespace wtopo;

namespace {

WeightModel small_model(const ScalarField& image, int radius = 3) {
    WeightModel m;
    m.omega0 = {1.0};
    m.omega1 = {0.5};
    m.alpha1 = {0.5};
    m.alpha2 = {2.0};
    m.alpha3 = {3.0};
    m.window_radius = radius;
    m.image = image;
    return m;
}

SoftSegmentation random_segmentation(std::mt19937& rng, int w, int h, int num_classes) {
    std::vector<ScalarField> channels;
    std::uniform_real_distribution<double> dist(0.05, 1.0);
    for (int l = 0; l < num_classes; ++l) {
        ScalarField c(w, h);
        for (int i = 0; i < c.size(); ++i) c[i] = dist(rng);
        channels.push_back(std::move(c));
    }
    return project_simplex(std::move(channels));
}

double weight_row_sum(PixelIndex x, const WeightModel& m) {
    double sum = 0.0;
    for (int r = 0; r < m.image.height; ++r)
        for (int c = 0; c < m.image.width; ++c) sum += weight(x, PixelIndex{r, c}, m);
    return sum;
}

} // namespace

TEST_CASE("pairwise weight basics") {
    std::mt19937 rng(5);
    const ScalarField image = fixtures::random_uniform_field(rng, 9, 9);
    const WeightModel m = small_model(image);

    const PixelIndex x{4, 4};
    REQUIRE(weight(x, x, m) == Catch::Approx(1.0 + 0.5).epsilon(1e-15));
    REQUIRE(weight(x, PixelIndex{4, 8}, m) == 0.0); // outside the truncation window

    // constant image, single Gaussian, |x-y|^2 = 2 -> e^{-1}
    WeightModel g;
    g.omega0 = {1.0};
    g.omega1 = {0.0};
    g.alpha1 = {1.0};
    g.alpha2 = {2.0};
    g.alpha3 = {1.0};
    g.window_radius = 3;
    g.image = ScalarField(6, 6, 0.5);
    REQUIRE(weight(PixelIndex{2, 2}, PixelIndex{3, 3}, g) == Catch::Approx(std::exp(-1.0)).epsilon(1e-15));

    // symmetry
    std::uniform_int_distribution<int> coord(0, 8);
    for (int trial = 0; trial < 100; ++trial) {
        const PixelIndex a{coord(rng), coord(rng)};
        const PixelIndex b{coord(rng), coord(rng)};
        REQUIRE(weight(a, b, m) == weight(b, a, m));
    }
}

TEST_CASE("nonlocal operator N") {
    std::mt19937 rng(7);
    const ScalarField image = fixtures::random_uniform_field(rng, 6, 6);
    const WeightModel m = small_model(image, 2);
    const NonlocalWeights w(m);
    const std::vector<double> lambda{0.7};
    const std::vector<double> identity; // empty = identity

    // all channels at one: N vanishes
    SoftSegmentation all_ones;
    all_ones.channels = {ScalarField(6, 6, 1.0), ScalarField(6, 6, 1.0)};
    for (const auto& field : nonlocal_N(all_ones, w, lambda, identity))
        for (double v : field.values) REQUIRE(v == 0.0);

    // uniform 1/L with identity zeta: N_l(x) = lambda (1 - 1/L) sum_y w(x,y)
    SoftSegmentation uniform;
    uniform.channels = {ScalarField(6, 6, 0.5), ScalarField(6, 6, 0.5)};
    const auto n_uniform = nonlocal_N(uniform, w, lambda, identity);
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) {
            const double expected = 0.7 * 0.5 * weight_row_sum(PixelIndex{r, c}, m);
            REQUIRE(n_uniform[0].at(r, c) == Catch::Approx(expected).epsilon(1e-12));
        }

    // brute-force quadruple loop oracle
    const SoftSegmentation u = random_segmentation(rng, 6, 6, 2);
    const std::vector<double> lambdas{0.7, 1.3};
    const std::vector<double> zeta{1.0, 0.25, 0.25, 1.0};
    const auto n = nonlocal_N(u, w, lambdas, zeta);
    for (int l = 0; l < 2; ++l)
        for (int r = 0; r < 6; ++r)
            for (int c = 0; c < 6; ++c) {
                double expected = 0.0;
                for (int lp = 0; lp < 2; ++lp) {
                    double inner = 0.0;
                    for (int r2 = 0; r2 < 6; ++r2)
                        for (int c2 = 0; c2 < 6; ++c2)
                            inner += weight(PixelIndex{r, c}, PixelIndex{r2, c2}, m) *
                                     (1.0 - u.channels[static_cast<size_t>(lp)].at(r2, c2));
                    expected += zeta[static_cast<size_t>(l) * 2 + lp] * inner;
                }
                expected *= lambdas[static_cast<size_t>(l)];
                REQUIRE(n[static_cast<size_t>(l)].at(r, c) == Catch::Approx(expected).epsilon(1e-12));
            }
}

TEST_CASE("subgradient of the nonlocal regularizer") {
    std::mt19937 rng(11);
    const ScalarField image = fixtures::random_uniform_field(rng, 6, 6);
    const WeightModel m = small_model(image, 2);
    const NonlocalWeights w(m);
    const std::vector<double> lambda{0.8};
    const std::vector<double> identity;

    // u = 1/2 everywhere: 1 - 2u = 0
    SoftSegmentation half;
    half.channels = {ScalarField(6, 6, 0.5), ScalarField(6, 6, 0.5)};
    for (const auto& field : subgradient_p(half, w, lambda, identity))
        for (double v : field.values) REQUIRE(std::abs(v) <= 1e-15);

    // u = 1 everywhere: p_l(x) = -lambda sum_zeta sum_y w(x,y)
    SoftSegmentation all_ones;
    all_ones.channels = {ScalarField(6, 6, 1.0), ScalarField(6, 6, 1.0)};
    const auto p_ones = subgradient_p(all_ones, w, lambda, identity);
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c)
            REQUIRE(p_ones[0].at(r, c) ==
                    Catch::Approx(-0.8 * weight_row_sum(PixelIndex{r, c}, m)).epsilon(1e-12));

    // matches central finite differences of R(u) = <u, N(u)>
    const SoftSegmentation u = random_segmentation(rng, 6, 6, 2);
    const std::vector<double> lambdas{0.8, 0.8};
    const std::vector<double> zeta{1.0, 0.3, 0.3, 1.0};
    const auto p = subgradient_p(u, w, lambdas, zeta);
    const double h = 1e-6;
    for (int l = 0; l < 2; ++l)
        for (int i = 0; i < 36; ++i) {
            SoftSegmentation probe = u;
            probe.channels[static_cast<size_t>(l)][i] += h;
            const double up = nonlocal_R(probe, w, lambdas, zeta);
            probe.channels[static_cast<size_t>(l)][i] -= 2.0 * h;
            const double down = nonlocal_R(probe, w, lambdas, zeta);
            const double fd = (up - down) / (2.0 * h);
            REQUIRE(p[static_cast<size_t>(l)][i] ==
                    Catch::Approx(fd).epsilon(1e-6).margin(1e-8));
        }
}

TEST_CASE("dual update is a clamped proximal step") {
    ScalarField q(2, 2, 0.0), v(2, 2, 0.4), u(2, 2, 0.4);
    REQUIRE(dual_q_update(q, v, u).values == std::vector<double>(4, 0.0));

    ScalarField q2(1, 1, 0.9), v2(1, 1, 0.8), u2(1, 1, 0.2);
    REQUIRE(dual_q_update(q2, v2, u2)[0] == 1.0);

    std::mt19937 rng(13);
    ScalarField qr = fixtures::random_uniform_field(rng, 5, 5, -1.0, 1.0);
    for (int step = 0; step < 20; ++step) {
        const ScalarField vr = fixtures::random_uniform_field(rng, 5, 5, -2.0, 2.0);
        const ScalarField ur = fixtures::random_uniform_field(rng, 5, 5);
        qr = dual_q_update(qr, vr, ur);
        for (double val : qr.values) {
            REQUIRE(val <= 1.0);
            REQUIRE(val >= -1.0);
        }
    }
}

TEST_CASE("v update") {
    std::mt19937 rng(17);
    TopoParams topo;
    topo.mu0 = 1.0;
    topo.mu1 = 0.5;
    topo.beta0 = 1;
    topo.beta1 = 0;
    topo.smooth.epsilon = 0.0625;
    topo.smooth.nb.radius = 2;
    AdamWParams hp;
    hp.learning_rate = 0.003;
    hp.weight_decay = 0.01;

    // empty frozen sets and q = 0: only weight decay moves v
    {
        ScalarField v(6, 6, 0.5);
        FrozenCriticalSets empty;
        empty.width = empty.height = 6;
        AdamWState state(6, 6);
        const ScalarField q(6, 6, 0.0);
        const ScalarField next = v_update(v, q, empty, topo, state, hp, 2.0);
        for (double val : next.values)
            REQUIRE(val == Catch::Approx(0.5 * (1.0 - hp.learning_rate * hp.weight_decay)));
    }

    // large eta with q = 1: first step decreases v everywhere
    {
        ScalarField v(6, 6, 0.5);
        FrozenCriticalSets empty;
        empty.width = empty.height = 6;
        AdamWState state(6, 6);
        const ScalarField q(6, 6, 1.0);
        const ScalarField next = v_update(v, q, empty, topo, state, hp, 50.0);
        for (int i = 0; i < next.size(); ++i) REQUIRE(next[i] < v[i]);
    }

    // gradient equals finite differences of surrogate + eta<q, v>
    {
        const ScalarField v = fixtures::random_distinct_field(rng, 12, 12);
        const double eta = 1.7;
        const ScalarField q = fixtures::random_uniform_field(rng, 12, 12, -1.0, 1.0);
        const FrozenCriticalSets frozen =
            freeze_critical_sets(compute_superlevel_persistence(v), topo);
        ScalarField grad = surrogate_gradient(v, frozen, topo);
        for (int i = 0; i < grad.size(); ++i) grad[i] += eta * q[i];

        const double h = 1e-6;
        ScalarField probe = v;
        for (int i = 0; i < v.size(); ++i) {
            probe[i] = v[i] + h;
            double up = surrogate_energy(probe, frozen, topo);
            for (int j = 0; j < v.size(); ++j) up += eta * q[j] * probe[j];
            probe[i] = v[i] - h;
            double down = surrogate_energy(probe, frozen, topo);
            for (int j = 0; j < v.size(); ++j) down += eta * q[j] * probe[j];
            probe[i] = v[i];
            const double fd = (up - down) / (2.0 * h);
            REQUIRE(grad[i] == Catch::Approx(fd).epsilon(1e-5).margin(1e-7));
        }
    }
}

TEST_CASE("u update closed form") {
    const int w = 3, h = 2;
    std::vector<ScalarField> o{ScalarField(w, h, 0.0), ScalarField(w, h, 0.0)};
    std::vector<ScalarField> p{ScalarField(w, h, 0.0), ScalarField(w, h, 0.0)};
    const ScalarField q(w, h, 0.0);

    const SoftSegmentation even = u_update(o, p, q, 0.0, 0.3, 0);
    for (int i = 0; i < w * h; ++i) {
        REQUIRE(even.channels[0][i] == Catch::Approx(0.5));
        REQUIRE(even.channels[1][i] == Catch::Approx(0.5));
    }

    const double gamma = 0.45;
    o[0] = ScalarField(w, h, gamma * std::log(3.0));
    const SoftSegmentation skew = u_update(o, p, q, 0.0, gamma, 0);
    for (int i = 0; i < w * h; ++i) {
        REQUIRE(skew.channels[0][i] == Catch::Approx(0.75).epsilon(1e-12));
        REQUIRE(skew.channels[1][i] == Catch::Approx(0.25).epsilon(1e-12));
    }

    // simplex holds and a per-pixel shift of o leaves u unchanged
    std::mt19937 rng(19);
    std::vector<ScalarField> o_rand{fixtures::random_uniform_field(rng, 5, 4, -3.0, 3.0),
                                    fixtures::random_uniform_field(rng, 5, 4, -3.0, 3.0)},
        p_rand{fixtures::random_uniform_field(rng, 5, 4, -1.0, 1.0),
               fixtures::random_uniform_field(rng, 5, 4, -1.0, 1.0)};
    const ScalarField q_rand = fixtures::random_uniform_field(rng, 5, 4, -1.0, 1.0);
    const SoftSegmentation a = u_update(o_rand, p_rand, q_rand, 2.0, 0.3, 1);
    REQUIRE(a.satisfies_simplex(1e-12));

    const ScalarField shift = fixtures::random_uniform_field(rng, 5, 4, -5.0, 5.0);
    for (auto& ch : o_rand)
        for (int i = 0; i < ch.size(); ++i) ch[i] += shift[i];
    const SoftSegmentation b = u_update(o_rand, p_rand, q_rand, 2.0, 0.3, 1);
    for (int l = 0; l < 2; ++l)
        for (int i = 0; i < 20; ++i)
            REQUIRE(b.channels[static_cast<size_t>(l)][i] ==
                    Catch::Approx(a.channels[static_cast<size_t>(l)][i]).epsilon(1e-12));
}

TEST_CASE("solver reduces to threshold dynamics and descends") {
    std::mt19937 rng(23);
    const ScalarField image = fixtures::random_uniform_field(rng, 24, 24);

    SolverConfig cfg;
    cfg.lambda = {0.5};
    cfg.gamma = 0.5;
    cfg.eta = 0.0;
    cfg.topo.mu0 = 0.0;
    cfg.topo.mu1 = 0.0;
    cfg.topo.smooth.nb.radius = 2;
    cfg.max_iters = 25;
    cfg.tol = 0.0;
    cfg.v_init_steps = 2;
    cfg.weights.omega0 = {0.0};
    cfg.weights.omega1 = {1.0};
    cfg.weights.alpha1 = {1.0};
    cfg.weights.alpha2 = {1.0};
    cfg.weights.alpha3 = {2.0};
    cfg.weights.window_radius = 5;

    std::vector<ScalarField> features{fixtures::random_uniform_field(rng, 24, 24),
                                      fixtures::random_uniform_field(rng, 24, 24)};
    const SolveResult result = run_topo_nlstd(features, image, cfg);
    REQUIRE(result.log.size() >= 2);
    for (size_t i = 1; i < result.log.size(); ++i) {
        const double prev =
            result.log[i - 1].energy_f + result.log[i - 1].energy_s + result.log[i - 1].energy_r;
        const double cur = result.log[i].energy_f + result.log[i].energy_s + result.log[i].energy_r;
        REQUIRE(cur <= prev + 1e-10);
    }
    REQUIRE(result.u.satisfies_simplex(1e-9));
    for (double v : result.q.values) REQUIRE(std::abs(v) <= 1.0);
}

TEST_CASE("solver rejects inconsistent configuration") {
    std::mt19937 rng(29);
    const ScalarField image = fixtures::random_uniform_field(rng, 8, 8);
    std::vector<ScalarField> features{fixtures::random_uniform_field(rng, 8, 8),
                                      fixtures::random_uniform_field(rng, 8, 8)};
    SolverConfig cfg;
    cfg.weights.omega0 = {1.0};
    cfg.weights.omega1 = {0.0};
    cfg.weights.alpha1 = {1.0};
    cfg.weights.alpha2 = {1.0};
    cfg.weights.alpha3 = {1.0};

    SolverConfig bad = cfg;
    bad.topo_channel = 5;
    REQUIRE_THROWS_AS(run_topo_nlstd(features, image, bad), config_error);

    bad = cfg;
    bad.zeta = {1.0, 0.5, 0.2, 1.0}; // asymmetric
    REQUIRE_THROWS_AS(run_topo_nlstd(features, image, bad), config_error);

    bad = cfg;
    bad.gamma = 0.0;
    REQUIRE_THROWS_AS(run_topo_nlstd(features, image, bad), config_error);

    auto nan_features = features;
    nan_features[0][3] = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(run_topo_nlstd(nan_features, image, cfg), invariant_error);
}

TEST_CASE("dice and topo losses") {
    ScalarField g0(4, 4, 0.0), g1(4, 4, 1.0);
    for (int i = 0; i < 8; ++i) {
        g0[i] = 1.0;
        g1[i] = 0.0;
    }
    SoftSegmentation truth{{g0, g1}};

    REQUIRE(dice_loss(truth, truth) == Catch::Approx(0.0).margin(1e-15));

    SoftSegmentation inverted{{g1, g0}};
    REQUIRE(dice_loss(inverted, truth) == Catch::Approx(1.0).epsilon(1e-15));

    TopoParams topo;
    topo.mu0 = 1.0;
    topo.smooth.nb.radius = 1;
    REQUIRE(topo_loss(inverted, truth, 0.0, topo, 0) == dice_loss(inverted, truth));
    // alpha != 0 adds the width-aware energy of the designated channel
    const double wt = wt_energy(inverted.channels[0], topo).value;
    REQUIRE(topo_loss(inverted, truth, 0.5, topo, 0) ==
            Catch::Approx(dice_loss(inverted, truth) + 0.5 * wt));

    // an all-zero channel pair counts as a perfect match
    SoftSegmentation with_empty{{ScalarField(4, 4, 0.0), ScalarField(4, 4, 1.0)}};
    REQUIRE(dice_loss(with_empty, with_empty) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("metric report") {
    std::mt19937 rng(31);
    ScalarField truth(8, 8, 0.0);
    for (int r = 2; r <= 5; ++r)
        for (int c = 2; c <= 5; ++c) truth.at(r, c) = 1.0;

    const MetricsReport same = compute_metrics(truth, truth);
    REQUIRE(same.accuracy == 1.0);
    REQUIRE(same.dice == 1.0);
    REQUIRE(same.iou == 1.0);
    REQUIRE(same.betti_error_0 == 0.0);
    REQUIRE(same.betti_error_1 == 0.0);

    const ScalarField empty(8, 8, 0.0);
    const MetricsReport none = compute_metrics(empty, truth);
    REQUIRE(none.dice == 0.0);
    REQUIRE(none.iou == 0.0);

    // counting oracle on random binary pairs
    for (int trial = 0; trial < 20; ++trial) {
        ScalarField a(8, 8), b(8, 8);
        std::bernoulli_distribution coin(0.5);
        for (int i = 0; i < 64; ++i) {
            a[i] = coin(rng) ? 1.0 : 0.0;
            b[i] = coin(rng) ? 1.0 : 0.0;
        }
        const MetricsReport r = compute_metrics(a, b);
        int inter = 0, pa = 0, pb = 0, match = 0;
        for (int i = 0; i < 64; ++i) {
            if (a[i] > 0.5) ++pa;
            if (b[i] > 0.5) ++pb;
            if (a[i] > 0.5 && b[i] > 0.5) ++inter;
            if ((a[i] > 0.5) == (b[i] > 0.5)) ++match;
        }
        REQUIRE(r.accuracy == Catch::Approx(match / 64.0));
        if (pa + pb > 0) REQUIRE(r.dice == Catch::Approx(2.0 * inter / double(pa + pb)));
        if (pa + pb - inter > 0)
            REQUIRE(r.iou == Catch::Approx(inter / double(pa + pb - inter)));
    }

    // explicit Betti targets
    const MetricsReport targeted = compute_metrics(truth, truth, 3, 1);
    REQUIRE(targeted.betti_error_0 == 2.0); // one component vs target 3
    REQUIRE(targeted.betti_error_1 == 1.0); // no holes vs target 1
}
