#include "dpgen/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "dpgen/error.hpp"
#include "dpgen/spatial_graph.hpp"

namespace dpgen {
namespace {

struct Centered {
    double mean = 0.0;
    double sum_squares = 0.0;
};

Centered center(std::span<const double> values, const SpatialWeights& weights) {
    const std::size_t n = values.size();
    if (n < 2) {
        throw ConfigError("spatial autocorrelation: need at least two values");
    }
    if (weights.size() != n) {
        throw ShapeError("spatial autocorrelation: " + std::to_string(n) + " values but weights over " +
                         std::to_string(weights.size()) + " spots");
    }
    Centered c;
    for (double v : values) {
        c.mean += v;
    }
    c.mean /= static_cast<double>(n);
    double scale = 0.0;
    for (double v : values) {
        const double d = v - c.mean;
        c.sum_squares += d * d;
        scale = std::max(scale, std::abs(v));
    }
    // Rounding leaves ~eps^2 residue on constant inputs.
    const double floor = static_cast<double>(n) * 1e-28 * std::max(1.0, scale * scale);
    if (!(c.sum_squares > floor)) {
        throw DomainError("spatial autocorrelation: zero variance");
    }
    return c;
}

}  // namespace

SpatialWeights SpatialWeights::knn(const Tensor& coords, std::size_t k) {
    return SpatialWeights{knn_neighbors(coords, k)};
}

double SpatialWeights::total() const {
    double w = 0.0;
    for (const auto& row : neighbors) {
        w += static_cast<double>(row.size());
    }
    return w;
}

double morans_i(std::span<const double> values, const SpatialWeights& weights) {
    const Centered c = center(values, weights);
    double cross = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        for (std::size_t j : weights.neighbors[i]) {
            cross += (values[i] - c.mean) * (values[j] - c.mean);
        }
    }
    return static_cast<double>(values.size()) / weights.total() * cross / c.sum_squares;
}

double gearys_c(std::span<const double> values, const SpatialWeights& weights) {
    const Centered c = center(values, weights);
    double diff = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        for (std::size_t j : weights.neighbors[i]) {
            const double d = values[i] - values[j];
            diff += d * d;
        }
    }
    return static_cast<double>(values.size() - 1) / (2.0 * weights.total()) * diff / c.sum_squares;
}

double morans_i(std::span<const double> values, const Tensor& coords, std::size_t k) {
    return morans_i(values, SpatialWeights::knn(coords, k));
}

double gearys_c(std::span<const double> values, const Tensor& coords, std::size_t k) {
    return gearys_c(values, SpatialWeights::knn(coords, k));
}

double reconstruction_mse(const ModelParams& params, const Tensor& features) {
    if (features.rank() != 2 || features.cols() != params.dims.input_dim) {
        throw ShapeError("reconstruction_mse: model expects " + std::to_string(params.dims.input_dim) +
                         " features, got " + features.shape_str());
    }
    if (features.empty()) {
        throw ShapeError("reconstruction_mse: no samples");
    }
    const auto [mu, logvar] = encode(params, features);
    const Tensor recon = decode(params, mu);
    double acc = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
        const double d = recon[i] - features[i];
        acc += d * d;
    }
    return acc / static_cast<double>(features.size());
}

LatentAutocorrelation column_autocorrelation(const Tensor& latent, const SpatialWeights& weights) {
    const std::size_t n = latent.rows();
    const std::size_t dims = latent.cols();
    LatentAutocorrelation out;
    out.morans_i.assign(dims, std::numeric_limits<double>::quiet_NaN());
    out.gearys_c.assign(dims, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> column(n);
    double sum_i = 0.0;
    double sum_c = 0.0;
    for (std::size_t d = 0; d < dims; ++d) {
        for (std::size_t i = 0; i < n; ++i) {
            column[i] = latent(i, d);
        }
        try {
            out.morans_i[d] = morans_i(column, weights);
            out.gearys_c[d] = gearys_c(column, weights);
        } catch (const DomainError&) {
            ++out.excluded_dims;
            continue;
        }
        sum_i += out.morans_i[d];
        sum_c += out.gearys_c[d];
    }
    if (out.excluded_dims == dims) {
        throw DomainError("latent autocorrelation: every latent dimension is constant");
    }
    const double kept = static_cast<double>(dims - out.excluded_dims);
    out.morans_i_mean = sum_i / kept;
    out.gearys_c_mean = sum_c / kept;
    return out;
}

LatentAutocorrelation latent_autocorrelation(const ModelParams& params, const Tensor& features, const Tensor& coords,
                                             std::size_t k) {
    if (coords.rank() != 2 || coords.rows() != features.rows()) {
        throw ShapeError("latent_autocorrelation: " + features.shape_str() + " features vs coords " +
                         coords.shape_str());
    }
    const auto [mu, logvar] = encode(params, features);
    return column_autocorrelation(mu, SpatialWeights::knn(coords, k));
}

}  // namespace dpgen
