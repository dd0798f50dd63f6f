#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "dpgen/distortion.hpp"
#include "dpgen/error.hpp"
#include "test_support.hpp"

using namespace dpgen;

namespace {

double loop_loss(const Tensor& z, const Tensor& ds, const Tensor& mask, double lambda) {
    const std::size_t b = z.rows();
    double acc = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < b; ++j) {
            if (i != j && mask(i, j) != 0.0) {
                acc += std::abs(testing::naive_distance(z, i, j) - lambda * ds(i, j));
            }
        }
    }
    return acc / static_cast<double>(b * b);
}

// Coordinates padded with zero columns to the latent width, then scaled.
Tensor embed(const Tensor& coords, std::size_t width, double factor) {
    Tensor z({coords.rows(), width});
    for (std::size_t i = 0; i < coords.rows(); ++i) {
        for (std::size_t c = 0; c < coords.cols(); ++c) {
            z(i, c) = factor * coords(i, c);
        }
    }
    return z;
}

double loss_value(const Tensor& z, const Tensor& ds, const Tensor& mask, double lambda) {
    return masked_distortion_loss(ad::Var::constant(z), ds, mask, ad::Var::constant(Tensor::scalar(lambda))).item();
}

}  // namespace

TEST_CASE("distortion loss hand examples") {
    Rng rng(1);
    const Tensor s = testing::random_matrix(12, 2, rng, 0, 10);
    const Tensor ds = pairwise_distances(s);
    for (double lambda : {0.1, 1.0, 3.7}) {
        CHECK(distortion_loss(embed(s, 4, lambda), ds, lambda) <= 1e-12);
    }

    const Tensor z = Tensor::matrix({{0, 0}, {3, 0}});
    const Tensor ds2 = Tensor::matrix({{0, 1}, {1, 0}});
    CHECK(distortion_loss(z, ds2, 2.0) == doctest::Approx(0.5).epsilon(1e-15));

    CHECK_THROWS_AS(distortion_loss(Tensor::matrix({{1, 2}}), Tensor::matrix({{0}}), 1.0), ConfigError);
    CHECK_THROWS_AS(distortion_loss(z, ds2, 0.0), DomainError);
}

TEST_CASE("distortion loss matches loop oracles") {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t b = 2 + rng.below(15);
        const Tensor z = testing::random_normal(b, 4, rng);
        const Tensor ds = pairwise_distances(testing::random_matrix(b, 2, rng, 0, 5));
        const double lambda = rng.uniform(0.1, 2.0);
        CHECK(std::abs(distortion_loss(z, ds, lambda) - loop_loss(z, ds, complete_mask(b), lambda)) <= 1e-12);

        Tensor mask({b, b});
        std::vector<MaskGraph::Edge> edges;
        for (std::size_t i = 0; i < b; ++i) {
            for (std::size_t j = i + 1; j < b; ++j) {
                if (rng.uniform() < 0.4) {
                    mask(i, j) = mask(j, i) = 1.0;
                    edges.emplace_back(i, j);
                }
            }
        }
        const double oracle = loop_loss(z, ds, mask, lambda);
        CHECK(std::abs(loss_value(z, ds, mask, lambda) - oracle) <= 1e-12);
        CHECK(std::abs(masked_distortion_loss(z, ds, MaskGraph(b, edges), lambda) - oracle) <= 1e-12);

        CHECK(loss_value(z, ds, complete_mask(b), lambda) == distortion_loss(z, ds, lambda));
        CHECK(masked_distortion_loss(z, ds, MaskGraph::complete(b), lambda) == distortion_loss(z, ds, lambda));
        CHECK(loss_value(z, ds, Tensor({b, b}), lambda) == 0.0);
    }
}

TEST_CASE("distortion loss is invariant to batch relabeling and differentiable") {
    Rng rng(3);
    const Tensor z = testing::random_normal(8, 3, rng);
    const Tensor s = testing::random_matrix(8, 2, rng);
    const std::vector<std::size_t> perm{5, 2, 7, 0, 1, 6, 3, 4};
    CHECK(distortion_loss(z.gather_rows(perm), pairwise_distances(s.gather_rows(perm)), 0.8) ==
          doctest::Approx(distortion_loss(z, pairwise_distances(s), 0.8)).epsilon(1e-13));

    const Tensor ds = pairwise_distances(s);
    const Tensor mask = knn_mask(s, 3).dense();
    const ad::GraphFn f = [&](std::span<const ad::Var> v) {
        return masked_distortion_loss(v[0], ds, mask, ad::exp(v[1]));
    };
    const std::vector<Tensor> inputs{z, Tensor::scalar(0.2)};
    CHECK(ad::finite_difference_check(f, inputs) <= 1e-6);
}

TEST_CASE("estimate_m1_m2") {
    const Tensor square = Tensor::matrix({{0, 0}, {1, 0}, {0, 1}, {1, 1}});
    const auto q = estimate_m1_m2(pairwise_distances(square), 1e-6);
    CHECK(q.m1 == 1.0);
    CHECK(q.m2 == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK(q.coverage == 1.0);

    const Tensor triangle = Tensor::matrix({{0, 0}, {2, 0}, {1, std::sqrt(3.0)}});
    const auto eq = estimate_m1_m2(pairwise_distances(triangle), 0.5);
    CHECK(eq.m1 == doctest::Approx(2.0));
    CHECK(eq.m2 == doctest::Approx(2.0));

    CHECK_THROWS_AS(estimate_m1_m2(Tensor({3, 3}), 0.1), DomainError);
    CHECK_THROWS_AS(estimate_m1_m2(pairwise_distances(square), 0.0), ConfigError);

    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const Tensor ds = pairwise_distances(testing::random_matrix(30, 2, rng, 0, 10));
        std::vector<double> all;
        for (std::size_t i = 0; i < 30; ++i) {
            for (std::size_t j = i + 1; j < 30; ++j) {
                all.push_back(ds(i, j));
            }
        }
        std::sort(all.begin(), all.end());
        const double p = static_cast<double>(all.size());
        const auto got = estimate_m1_m2(ds, 0.1);
        CHECK(got.m1 == all[static_cast<std::size_t>(std::floor(p * 0.05))]);
        CHECK(got.m2 == all[static_cast<std::size_t>(std::ceil(p * 0.95)) - 1]);
        CHECK(got.m1 <= got.m2);
        std::size_t inside = 0;
        for (double d : all) {
            inside += (d >= got.m1 && d <= got.m2) ? 1 : 0;
        }
        CHECK(static_cast<double>(inside) / p >= 0.9);
        CHECK(got.coverage == doctest::Approx(static_cast<double>(inside) / p));
    }
}

TEST_CASE("estimate_distortion_constant on exact encoders") {
    Rng rng(5);
    const Tensor s = testing::random_matrix(15, 2, rng, 0, 10);
    const Tensor ds = pairwise_distances(s);
    const double lambda = 0.7;
    for (double eps : {0.01, 0.05, 0.5}) {
        const LatentSampler exact = [&](const Tensor&, Rng&) { return embed(s, 4, lambda); };
        const auto est = estimate_distortion_constant(exact, s, ds, lambda, eps, 2, rng);
        CHECK(est.l_hat == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(est.coverage == 1.0);
        CHECK(est.lower_bound_ok);
        CHECK(est.l_dis <= 1e-12);
    }
    const LatentSampler doubled = [&](const Tensor&, Rng&) { return embed(s, 3, 2.0 * lambda); };
    const auto est = estimate_distortion_constant(doubled, s, ds, lambda, 0.05, 1, rng);
    CHECK(est.l_hat == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(est.coverage == 1.0);

    const LatentSampler shrunk = [&](const Tensor&, Rng&) { return embed(s, 3, 0.5 * lambda); };
    const auto bad = estimate_distortion_constant(shrunk, s, ds, lambda, 0.05, 1, rng);
    CHECK(std::isinf(bad.l_hat));
    CHECK_FALSE(bad.lower_bound_ok);
    CHECK(bad.lower_bound_fraction == 0.0);
}

TEST_CASE("estimate_distortion_constant matches an exhaustive ratio oracle") {
    Rng rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 10 + rng.below(10);
        const Tensor s = testing::random_matrix(n, 2, rng, 0, 5);
        const Tensor ds = pairwise_distances(s);
        const double lambda = rng.uniform(0.5, 2.0);
        const double scale = rng.uniform(1.0, 1.6);
        const double noise = rng.uniform(0.01, 0.3);
        const LatentSampler sampler = [&](const Tensor& y, Rng& r) {
            Tensor z = embed(y, 3, scale * lambda);
            for (double& v : z.data()) {
                v += noise * r.normal();
            }
            return z;
        };
        const std::size_t draws = 3;
        const double eps = 0.1;

        // Replay the same draws for the oracle.
        Rng replay = rng;
        std::vector<double> ratios;
        double dev = 0.0;
        std::size_t pairs = 0;
        for (std::size_t d = 0; d < draws; ++d) {
            const Tensor z = sampler(s, replay);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    if (i != j) {
                        const double dz = testing::naive_distance(z, i, j);
                        ratios.push_back(dz / (lambda * ds(i, j)));
                        dev += std::abs(dz - lambda * ds(i, j));
                        ++pairs;
                    }
                }
            }
        }
        const auto est = estimate_distortion_constant(sampler, s, ds, lambda, eps, draws, rng);
        CHECK(est.l_dis == doctest::Approx(dev / static_cast<double>(pairs)).epsilon(1e-12));

        // Smallest candidate L (among the ratios) reaching the target fraction in [1, L].
        const double total = static_cast<double>(ratios.size());
        std::vector<double> sorted = ratios;
        std::sort(sorted.begin(), sorted.end());
        double oracle = std::numeric_limits<double>::infinity();
        for (double cand : sorted) {
            if (cand < 1.0) {
                continue;
            }
            std::size_t inside = 0;
            for (double r : ratios) {
                inside += (r >= 1.0 - ratio_tolerance && r <= cand * (1.0 + ratio_tolerance)) ? 1 : 0;
            }
            if (static_cast<double>(inside) >= (1.0 - eps) * total) {
                oracle = cand;
                break;
            }
        }
        CHECK(est.l_hat == oracle);
        if (std::isfinite(oracle)) {
            CHECK(est.coverage >= 1.0 - eps);
        }
    }
}

TEST_CASE("theorem1_bound") {
    CHECK(theorem1_bound(0.0, 1.0, 1.0, std::sqrt(2.0), 0.05, 0.05) == std::sqrt(2.0));
    CHECK(theorem1_bound(1.0, 1.0, 1.0, 1.0, 0.5, 0.5) == doctest::Approx(5.0).epsilon(1e-15));
    const double a = theorem1_bound(0.3, 1.0, 0.5, 2.0, 0.1, 0.2) - 4.0;
    const double b = theorem1_bound(0.3, 2.0, 0.5, 2.0, 0.1, 0.2) - 4.0;
    CHECK(b == doctest::Approx(a / 2.0).epsilon(1e-14));
    CHECK_THROWS_AS(theorem1_bound(1.0, 1.0, 0.0, 1.0, 0.1, 0.1), DomainError);
    CHECK_THROWS_AS(theorem1_bound(1.0, 0.0, 1.0, 1.0, 0.1, 0.1), DomainError);
    CHECK_THROWS_AS(theorem1_bound(1.0, 1.0, 1.0, 1.0, 1.0, 0.1), ConfigError);

    CHECK(theorem1_bound_derivation_form(1.0, 1.0, 1.0, 1.0, 0.5, 0.25) == doctest::Approx(5.0));
    CHECK(std::isinf(theorem1_bound_derivation_form(1.0, 1.0, 1.0, 1.0, 0.05, 0.05)));
}

TEST_CASE("verify_bound on a noisy isometry") {
    Rng rng(7);
    const Tensor s = testing::grid_coords(6);
    const LatentSampler sampler = [&](const Tensor& y, Rng& r) {
        Tensor z = embed(y, 4, 1.3);
        for (double& v : z.data()) {
            v += 0.05 * r.normal();
        }
        return z;
    };
    const auto report = verify_bound(sampler, s, s, 1.0, 0.05, 0.05, 4, rng);
    CHECK(report.lower_bound_ok);
    CHECK(report.m1 == 1.0);
    CHECK(report.l_hat <= report.l_bound);
    CHECK(report.bound_holds);
    CHECK(report.pairs == 4u * 36u * 35u);
}
