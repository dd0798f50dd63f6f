#include "dpgen/distortion.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dpgen/error.hpp"

namespace dpgen {

using ad::Var;

namespace {

void check_probability(double p, const char* name) {
    if (!(p > 0.0 && p < 1.0)) {
        throw ConfigError(std::string(name) + " must lie in (0, 1), got " + std::to_string(p));
    }
}

double row_distance(const Tensor& z, std::size_t i, std::size_t j) {
    double acc = 0.0;
    for (std::size_t c = 0; c < z.cols(); ++c) {
        const double d = z(i, c) - z(j, c);
        acc += d * d;
    }
    return std::sqrt(acc);
}

}  // namespace

Tensor complete_mask(std::size_t n) {
    Tensor mask({n, n}, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        mask(i, i) = 0.0;
    }
    return mask;
}

Var masked_distortion_loss(const Var& z, const Tensor& spatial_dist, const Tensor& mask, const Var& lambda) {
    if (z.value().rank() != 2) {
        throw ShapeError("distortion_loss: latent batch must be a matrix, got " + z.value().shape_str());
    }
    const std::size_t b = z.value().rows();
    if (b < 2) {
        throw ConfigError("distortion_loss: need at least two samples, got " + std::to_string(b));
    }
    const Tensor::Shape square{b, b};
    if (spatial_dist.shape() != square || mask.shape() != square) {
        throw ShapeError("distortion_loss: batch of " + std::to_string(b) + " with spatial distances " +
                         spatial_dist.shape_str() + " and mask " + mask.shape_str());
    }
    if (lambda.value().size() != 1 || !(lambda.item() > 0.0)) {
        throw DomainError("distortion_loss: lambda must be a positive scalar");
    }
    Tensor off_diagonal = mask;
    for (std::size_t i = 0; i < b; ++i) {
        off_diagonal(i, i) = 0.0;
    }
    const Var deviation = ad::pairwise_dist(z) - lambda * Var::constant(spatial_dist);
    const double norm = 1.0 / static_cast<double>(b * b);
    return ad::sum(ad::abs(ad::mask_mul(deviation, off_diagonal))) * norm;
}

Var distortion_loss(const Var& z, const Tensor& spatial_dist, const Var& lambda) {
    const std::size_t b = z.value().rank() == 2 ? z.value().rows() : 0;
    return masked_distortion_loss(z, spatial_dist, complete_mask(b), lambda);
}

double distortion_loss(const Tensor& z, const Tensor& spatial_dist, double lambda) {
    return distortion_loss(Var::constant(z), spatial_dist, Var::constant(Tensor::scalar(lambda))).item();
}

double masked_distortion_loss(const Tensor& z, const Tensor& spatial_dist, const MaskGraph& mask, double lambda) {
    if (z.rank() != 2 || mask.size() != z.rows()) {
        throw ShapeError("masked_distortion_loss: mask over " + std::to_string(mask.size()) +
                         " spots for latent batch " + z.shape_str());
    }
    return masked_distortion_loss(Var::constant(z), spatial_dist, mask.dense(),
                                  Var::constant(Tensor::scalar(lambda)))
        .item();
}

DistanceQuantiles estimate_m1_m2(const Tensor& spatial_dist, double delta) {
    check_probability(delta, "estimate_m1_m2: delta");
    const std::size_t n = spatial_dist.rows();
    std::vector<double> distances;
    distances.reserve(n * (n > 0 ? n - 1 : 0) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (spatial_dist(i, j) > 0.0) {
                distances.push_back(spatial_dist(i, j));
            }
        }
    }
    if (distances.empty()) {
        throw DomainError("estimate_m1_m2: all spatial distances are zero");
    }
    std::sort(distances.begin(), distances.end());
    const double count = static_cast<double>(distances.size());
    const auto lo = static_cast<std::size_t>(std::floor(count * delta / 2.0));
    auto hi = static_cast<std::size_t>(std::ceil(count * (1.0 - delta / 2.0)));
    hi = std::clamp<std::size_t>(hi, lo + 1, distances.size()) - 1;

    DistanceQuantiles q;
    q.m1 = distances[lo];
    q.m2 = distances[hi];
    const auto first = std::lower_bound(distances.begin(), distances.end(), q.m1);
    const auto last = std::upper_bound(distances.begin(), distances.end(), q.m2);
    q.coverage = static_cast<double>(last - first) / count;
    return q;
}

DistortionEstimate estimate_distortion_constant(const LatentSampler& sampler, const Tensor& y,
                                                const Tensor& spatial_dist, double lambda, double epsilon,
                                                std::size_t n_draws, Rng& rng) {
    check_probability(epsilon, "estimate_distortion_constant: epsilon");
    if (!(lambda > 0.0)) {
        throw DomainError("estimate_distortion_constant: lambda must be positive");
    }
    if (n_draws < 1) {
        throw ConfigError("estimate_distortion_constant: need at least one draw");
    }
    const std::size_t n = spatial_dist.rows();
    if (spatial_dist.shape() != Tensor::Shape{n, n} || y.rows() != n) {
        throw ShapeError("estimate_distortion_constant: " + std::to_string(y.rows()) + " inputs vs distances " +
                         spatial_dist.shape_str());
    }

    std::vector<double> ratios;
    ratios.reserve(n_draws * n * (n > 0 ? n - 1 : 0));
    double deviation_sum = 0.0;
    std::size_t pair_count = 0;
    for (std::size_t draw = 0; draw < n_draws; ++draw) {
        const Tensor z = sampler(y, rng);
        if (z.rank() != 2 || z.rows() != n) {
            throw ShapeError("estimate_distortion_constant: sampler returned " + z.shape_str());
        }
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) {
                    continue;
                }
                const double dz = row_distance(z, i, j);
                const double ds = spatial_dist(i, j);
                deviation_sum += std::abs(dz - lambda * ds);
                ++pair_count;
                if (ds > 0.0) {
                    ratios.push_back(dz / (lambda * ds));
                }
            }
        }
    }
    if (ratios.empty()) {
        throw DomainError("estimate_distortion_constant: all spatial distances are zero");
    }

    std::sort(ratios.begin(), ratios.end());
    const std::size_t total = ratios.size();
    const auto needed = static_cast<std::size_t>(std::ceil((1.0 - epsilon) * static_cast<double>(total) - 1e-9));
    const auto first_ok = static_cast<std::size_t>(
        std::lower_bound(ratios.begin(), ratios.end(), 1.0 - ratio_tolerance) - ratios.begin());
    const std::size_t ok = total - first_ok;

    DistortionEstimate est;
    est.ratio_count = total;
    est.l_dis = deviation_sum / static_cast<double>(pair_count);
    est.lower_bound_fraction = static_cast<double>(ok) / static_cast<double>(total);
    if (ok < needed || needed == 0) {
        est.lower_bound_ok = needed == 0;
        est.l_hat = needed == 0 ? 1.0 : std::numeric_limits<double>::infinity();
        est.coverage = est.lower_bound_fraction;
        return est;
    }
    est.lower_bound_ok = true;
    est.l_hat = std::max(1.0, ratios[first_ok + needed - 1]);
    const auto inside_end = std::upper_bound(ratios.begin(), ratios.end(), est.l_hat * (1.0 + ratio_tolerance)) - ratios.begin();
    est.coverage = static_cast<double>(static_cast<std::size_t>(inside_end) - first_ok) / static_cast<double>(total);
    return est;
}

double theorem1_bound(double l_dis, double lambda, double m1, double m2, double epsilon, double delta) {
    check_probability(epsilon, "theorem1_bound: epsilon");
    check_probability(delta, "theorem1_bound: delta");
    if (!(m1 > 0.0) || !(lambda > 0.0)) {
        throw DomainError("theorem1_bound: m1 and lambda must be positive");
    }
    return m2 / m1 + l_dis / (lambda * m1 * epsilon * (1.0 - delta));
}

double theorem1_bound_derivation_form(double l_dis, double lambda, double m1, double m2, double epsilon,
                                      double delta) {
    check_probability(epsilon, "theorem1_bound: epsilon");
    check_probability(delta, "theorem1_bound: delta");
    if (!(m1 > 0.0) || !(lambda > 0.0)) {
        throw DomainError("theorem1_bound: m1 and lambda must be positive");
    }
    if (epsilon <= delta) {
        return std::numeric_limits<double>::infinity();
    }
    return m2 / m1 + l_dis / (lambda * m1 * (epsilon - delta));
}

DistortionReport verify_bound(const LatentSampler& sampler, const Tensor& y, const Tensor& coords, double lambda,
                              double epsilon, double delta, std::size_t n_draws, Rng& rng) {
    const Tensor spatial = pairwise_distances(coords);
    const DistanceQuantiles q = estimate_m1_m2(spatial, delta);
    const DistortionEstimate est = estimate_distortion_constant(sampler, y, spatial, lambda, epsilon, n_draws, rng);

    DistortionReport r;
    r.l_dis = est.l_dis;
    r.lambda = lambda;
    r.coverage = est.coverage;
    r.lower_bound_fraction = est.lower_bound_fraction;
    r.lower_bound_ok = est.lower_bound_ok;
    r.l_hat = est.l_hat;
    r.m1 = q.m1;
    r.m2 = q.m2;
    r.epsilon = epsilon;
    r.delta = delta;
    r.draws = n_draws;
    r.pairs = est.ratio_count;
    r.l_bound = theorem1_bound(est.l_dis, lambda, q.m1, q.m2, epsilon, delta);
    r.l_bound_derivation_form = theorem1_bound_derivation_form(est.l_dis, lambda, q.m1, q.m2, epsilon, delta);
    r.bound_holds = r.lower_bound_ok && r.l_hat <= r.l_bound;
    return r;
}

}  // namespace dpgen
