#pragma once

#include <cstddef>
#include <functional>
#include <limits>

#include "dpgen/autodiff.hpp"
#include "dpgen/rng.hpp"
#include "dpgen/spatial_graph.hpp"
#include "dpgen/tensor.hpp"

namespace dpgen {

// Masked distortion loss
//
//   (1/B^2) * sum_{i != j} G_ij * | ||z_i - z_j|| - lambda * D_s[i,j] |
//
// over ordered pairs, so every undirected edge of G contributes twice.
// `mask` is a dense symmetric 0/1 [B,B] matrix; its diagonal is ignored.
ad::Var masked_distortion_loss(const ad::Var& z, const Tensor& spatial_dist, const Tensor& mask,
                               const ad::Var& lambda);
// Same with the complete mask.
ad::Var distortion_loss(const ad::Var& z, const Tensor& spatial_dist, const ad::Var& lambda);

double distortion_loss(const Tensor& z, const Tensor& spatial_dist, double lambda);
double masked_distortion_loss(const Tensor& z, const Tensor& spatial_dist, const MaskGraph& mask, double lambda);

// Complete 0/1 mask with zero diagonal.
Tensor complete_mask(std::size_t n);

struct DistanceQuantiles {
    double m1 = 0.0;
    double m2 = 0.0;
    double coverage = 0.0;  // fraction of positive distances inside [m1, m2]
};

// Empirical (delta/2, 1 - delta/2) quantiles of the positive off-diagonal
// distances. At least 1 - delta of those distances lie in [m1, m2].
DistanceQuantiles estimate_m1_m2(const Tensor& spatial_dist, double delta);

// Draws one latent sample per row of y.
using LatentSampler = std::function<Tensor(const Tensor& y, Rng& rng)>;

struct DistortionEstimate {
    // Smallest L with P(1 <= r <= L) >= 1 - epsilon over the sampled
    // ratios r = d_Z / (lambda d_S); +inf when the lower bound r >= 1 holds
    // for less than 1 - epsilon of the pairs.
    double l_hat = std::numeric_limits<double>::infinity();
    double coverage = 0.0;
    bool lower_bound_ok = false;
    double lower_bound_fraction = 0.0;  // fraction of ratios with r >= 1
    double l_dis = 0.0;                 // mean |d_Z - lambda d_S| over sampled ordered pairs
    std::size_t ratio_count = 0;
};

// Ratios within this relative distance below 1 count as satisfying r >= 1,
// and ratios this close above l_hat count as inside [1, l_hat].
inline constexpr double ratio_tolerance = 1e-9;

DistortionEstimate estimate_distortion_constant(const LatentSampler& sampler, const Tensor& y,
                                                const Tensor& spatial_dist, double lambda, double epsilon,
                                                std::size_t n_draws, Rng& rng);

// Upper bound on the distortion constant:
//   m2/m1 + l_dis / (lambda * m1 * epsilon * (1 - delta)).
double theorem1_bound(double l_dis, double lambda, double m1, double m2, double epsilon, double delta);

// The same bound with (epsilon - delta) in place of epsilon * (1 - delta),
// which is what the derivation of the bound arrives at. +inf when
// epsilon <= delta.
double theorem1_bound_derivation_form(double l_dis, double lambda, double m1, double m2, double epsilon,
                                      double delta);

struct DistortionReport {
    double l_dis = 0.0;
    double lambda = 1.0;
    double coverage = 0.0;
    double lower_bound_fraction = 0.0;
    bool lower_bound_ok = false;
    double l_hat = std::numeric_limits<double>::infinity();
    double l_bound = std::numeric_limits<double>::infinity();
    double l_bound_derivation_form = std::numeric_limits<double>::infinity();
    bool bound_holds = false;
    double m1 = 0.0;
    double m2 = 0.0;
    double epsilon = 0.05;
    double delta = 0.05;
    std::size_t draws = 0;
    std::size_t pairs = 0;
};

// Estimates l_hat and evaluates the bound for one sampler.
DistortionReport verify_bound(const LatentSampler& sampler, const Tensor& y, const Tensor& coords, double lambda,
                              double epsilon, double delta, std::size_t n_draws, Rng& rng);

}  // namespace dpgen
