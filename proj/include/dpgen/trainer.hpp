#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dpgen/metrics.hpp"
#include "dpgen/model.hpp"
#include "dpgen/tensor.hpp"

namespace dpgen {

struct TrainConfig {
    std::size_t latent_dim = 4;
    std::size_t hidden_dim = 64;
    std::size_t pca_k = 256;
    double beta = 1e-2;   // KL weight
    double alpha = 50.0;  // distortion-loss weight; 0 trains a plain beta-VAE
    double lr = 1e-3;
    std::size_t batch_size = 128;
    std::size_t max_epochs = 1000;
    std::size_t patience = 10;
    double min_improvement = 1e-2;
    std::size_t mask_k = 5;
    std::uint64_t seed = 0;

    // Throws ConfigError on an invalid field.
    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double loss = 0.0;
    double recon = 0.0;
    double kl = 0.0;
    double distortion = 0.0;
    double lambda = 1.0;
    double seconds = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    bool early_stopped = false;
};

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::size_t step = 0;

    static AdamState zeros_like(std::span<Tensor* const> params);
};

// One bias-corrected Adam update; increments state.step before use.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               const AdamOptions& options);

struct TrainResult {
    ModelParams params;  // parameters at the lowest recorded epoch loss
    TrainHistory history;
};

// Minimizes  elbo + alpha * masked distortion loss  with Adam on shuffled
// minibatches. The distortion term only sees pairs inside a batch that are
// edges of the k-NN mask over the training coordinates. Stops when the epoch
// loss has not improved on the best by more than min_improvement for
// `patience` consecutive epochs.
TrainResult train(const TrainConfig& config, const Tensor& features, const Tensor& coords);

struct EvalMetrics {
    double mse = 0.0;
    LatentAutocorrelation autocorrelation;
    std::size_t k = 5;
};

// Deterministic: the latent statistics use encoder means.
EvalMetrics evaluate(const ModelParams& params, const Tensor& features, const Tensor& coords, std::size_t k = 5);

}  // namespace dpgen
