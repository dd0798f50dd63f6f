#include <cmath>
#include <numeric>

#include "doctest.h"
#include "dpgen/error.hpp"
#include "dpgen/metrics.hpp"
#include "test_support.hpp"

using namespace dpgen;

namespace {

// Direct formulas over a dense weight matrix built by brute force.
Tensor dense_knn_weights(const Tensor& coords, std::size_t k) {
    const std::size_t n = coords.rows();
    Tensor w({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::pair<double, std::size_t>> order;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                order.emplace_back(testing::naive_distance(coords, i, j), j);
            }
        }
        std::sort(order.begin(), order.end());
        for (std::size_t r = 0; r < k; ++r) {
            w(i, order[r].second) = 1.0;
        }
    }
    return w;
}

std::pair<double, double> oracle_stats(const std::vector<double>& x, const Tensor& w) {
    const std::size_t n = x.size();
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    double total = 0.0, cross = 0.0, diff = 0.0, denom = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        denom += (x[i] - mean) * (x[i] - mean);
        for (std::size_t j = 0; j < n; ++j) {
            total += w(i, j);
            cross += w(i, j) * (x[i] - mean) * (x[j] - mean);
            diff += w(i, j) * (x[i] - x[j]) * (x[i] - x[j]);
        }
    }
    const double nd = static_cast<double>(n);
    return {nd / total * cross / denom, (nd - 1.0) / (2.0 * total) * diff / denom};
}

// Encoder and decoder that pass their input through exactly, using
// leaky(x) - leaky(-x) = 1.01 x.
ModelParams identity_model(std::size_t dim) {
    ModelParams p = ModelParams::zeros({dim, 2 * dim, dim});
    for (std::size_t i = 0; i < dim; ++i) {
        p.enc_w1(i, i) = 1.0;
        p.enc_w1(i, dim + i) = -1.0;
        p.enc_w2(i, i) = 1.0 / 1.01;
        p.enc_w2(dim + i, i) = -1.0 / 1.01;
        p.dec_w1(i, i) = 1.0;
        p.dec_w1(i, dim + i) = -1.0;
        p.dec_w2(i, i) = 1.0 / 1.01;
        p.dec_w2(dim + i, i) = -1.0 / 1.01;
    }
    return p;
}

}  // namespace

TEST_CASE("chessboard") {
    const Tensor grid = testing::grid_coords(2);
    const std::vector<double> x{1, -1, -1, 1};
    CHECK(std::abs(morans_i(x, grid, 2) - (-1.0)) <= 1e-10);
    CHECK(std::abs(gearys_c(x, grid, 2) - 1.5) <= 1e-10);
    const auto w = SpatialWeights::knn(grid, 2);
    CHECK(w.total() == 8.0);
}

TEST_CASE("smooth field and the formula oracle") {
    const Tensor grid = testing::grid_coords(20);
    std::vector<double> x(400);
    for (std::size_t i = 0; i < 400; ++i) {
        x[i] = 0.3 * grid(i, 0) + 0.7 * grid(i, 1);
    }
    const double i_val = morans_i(x, grid, 5);
    const double c_val = gearys_c(x, grid, 5);
    CHECK(i_val > 0.9);
    CHECK(c_val < 0.2);
    const auto [oi, oc] = oracle_stats(x, dense_knn_weights(grid, 5));
    CHECK(std::abs(i_val - oi) <= 1e-10);
    CHECK(std::abs(c_val - oc) <= 1e-10);

    Rng rng(1);
    const Tensor scattered = testing::random_matrix(60, 2, rng, 0, 10);
    std::vector<double> y(60);
    for (double& v : y) {
        v = rng.normal();
    }
    const auto [si, sc] = oracle_stats(y, dense_knn_weights(scattered, 4));
    CHECK(std::abs(morans_i(y, scattered, 4) - si) <= 1e-10);
    CHECK(std::abs(gearys_c(y, scattered, 4) - sc) <= 1e-10);
}

TEST_CASE("permutation null") {
    const Tensor grid = testing::grid_coords(20);
    const auto w = SpatialWeights::knn(grid, 5);
    Rng rng(2);
    std::vector<double> x(400);
    for (double& v : x) {
        v = rng.normal();
    }
    double sum_i = 0.0, sum_c = 0.0;
    for (int p = 0; p < 200; ++p) {
        rng.shuffle(x);
        sum_i += morans_i(x, w);
        const double c = gearys_c(x, w);
        CHECK(c >= 0.0);
        sum_c += c;
    }
    CHECK(std::abs(sum_i / 200.0 + 1.0 / 399.0) <= 0.05);
    CHECK(std::abs(sum_c / 200.0 - 1.0) <= 0.05);
}

TEST_CASE("affine invariance and errors") {
    const Tensor grid = testing::grid_coords(8);
    Rng rng(3);
    std::vector<double> x(64), y(64);
    for (std::size_t i = 0; i < 64; ++i) {
        x[i] = rng.normal() + 0.1 * grid(i, 0);
        y[i] = -3.5 * x[i] + 12.0;
    }
    CHECK(std::abs(morans_i(x, grid) - morans_i(y, grid)) <= 1e-10);
    CHECK(std::abs(gearys_c(x, grid) - gearys_c(y, grid)) <= 1e-10);

    const std::vector<double> flat(64, 2.5);
    try {
        morans_i(flat, grid);
        FAIL("expected an error");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("zero variance") != std::string::npos);
    }
    CHECK_THROWS_AS(gearys_c(flat, grid), DomainError);
    CHECK_THROWS_AS(morans_i(std::vector<double>(10, 1.0), grid), ShapeError);
}

TEST_CASE("reconstruction_mse") {
    Rng rng(4);
    const Tensor y = testing::random_normal(12, 5, rng);
    CHECK(reconstruction_mse(identity_model(5), y) <= 1e-24);

    ModelParams zero = ModelParams::initialize({5, 7, 2}, rng);
    zero.dec_w2.fill(0.0);
    double sq = 0.0;
    for (double v : y.data()) {
        sq += v * v;
    }
    CHECK(reconstruction_mse(zero, y) == doctest::Approx(sq / 60.0).epsilon(1e-14));

    const ModelParams random = ModelParams::initialize({5, 7, 2}, rng);
    const Tensor recon = decode(random, encode(random, y).first);
    double acc = 0.0;
    for (std::size_t i = 0; i < 12; ++i) {
        for (std::size_t j = 0; j < 5; ++j) {
            acc += (recon(i, j) - y(i, j)) * (recon(i, j) - y(i, j));
        }
    }
    CHECK(std::abs(reconstruction_mse(random, y) - acc / 60.0) <= 1e-12);
    CHECK_THROWS_AS(reconstruction_mse(random, testing::random_normal(3, 4, rng)), ShapeError);
}

TEST_CASE("latent autocorrelation") {
    const Tensor grid = testing::grid_coords(10);
    const auto w = SpatialWeights::knn(grid, 5);

    // Coordinates as the latent: each dim is a linear field.
    const auto coords_stats = column_autocorrelation(grid, w);
    std::vector<double> col0(100), col1(100);
    for (std::size_t i = 0; i < 100; ++i) {
        col0[i] = grid(i, 0);
        col1[i] = grid(i, 1);
    }
    CHECK(coords_stats.morans_i[0] == morans_i(col0, w));
    CHECK(coords_stats.morans_i_mean == doctest::Approx((morans_i(col0, w) + morans_i(col1, w)) / 2.0));
    CHECK(coords_stats.morans_i_mean > 0.8);

    Tensor with_flat({100, 3});
    for (std::size_t i = 0; i < 100; ++i) {
        with_flat(i, 0) = grid(i, 1);
        with_flat(i, 1) = 4.0;
    }
    with_flat(0, 2) = 1.0;
    const auto partial = column_autocorrelation(with_flat, w);
    CHECK(partial.excluded_dims == 1);
    CHECK(std::isnan(partial.morans_i[1]));
    CHECK(partial.gearys_c_mean ==
          doctest::Approx((partial.gearys_c[0] + partial.gearys_c[2]) / 2.0));

    Tensor single({100, 1});
    for (std::size_t i = 0; i < 100; ++i) {
        single(i, 0) = std::sin(0.3 * grid(i, 0));
    }
    const auto one = column_autocorrelation(single, w);
    CHECK(one.morans_i_mean == one.morans_i[0]);
    CHECK(one.gearys_c_mean == one.gearys_c[0]);

    CHECK_THROWS_AS(column_autocorrelation(Tensor({100, 2}, 1.0), w), DomainError);

    // Encoder means of the identity model are the features themselves.
    const auto via_model = latent_autocorrelation(identity_model(2), grid, grid, 5);
    CHECK(via_model.morans_i_mean == doctest::Approx(coords_stats.morans_i_mean).epsilon(1e-10));
}
