#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dpgen/model.hpp"
#include "dpgen/tensor.hpp"

namespace dpgen {

// Binary directed k-NN weights: w_ij = 1 iff j is among the k nearest spots
// of i. Not symmetrized, so W = n * k.
struct SpatialWeights {
    std::vector<std::vector<std::size_t>> neighbors;

    static SpatialWeights knn(const Tensor& coords, std::size_t k = 5);
    std::size_t size() const { return neighbors.size(); }
    double total() const;
};

double morans_i(std::span<const double> values, const SpatialWeights& weights);
double gearys_c(std::span<const double> values, const SpatialWeights& weights);
double morans_i(std::span<const double> values, const Tensor& coords, std::size_t k = 5);
double gearys_c(std::span<const double> values, const Tensor& coords, std::size_t k = 5);

// Mean squared error of decode(encoder mean) against the features, over all entries.
double reconstruction_mse(const ModelParams& params, const Tensor& features);

struct LatentAutocorrelation {
    std::vector<double> morans_i;  // per latent dim; NaN for excluded dims
    std::vector<double> gearys_c;
    double morans_i_mean = 0.0;
    double gearys_c_mean = 0.0;
    std::size_t excluded_dims = 0;  // constant dims left out of the means
};

// Moran's I and Geary's C of every column of `latent` (spots x dims).
LatentAutocorrelation column_autocorrelation(const Tensor& latent, const SpatialWeights& weights);
// Same on the encoder means of `features`.
LatentAutocorrelation latent_autocorrelation(const ModelParams& params, const Tensor& features, const Tensor& coords,
                                             std::size_t k = 5);

}  // namespace dpgen
