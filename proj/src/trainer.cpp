#include "dpgen/trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "dpgen/distortion.hpp"
#include "dpgen/error.hpp"
#include "dpgen/rng.hpp"
#include "dpgen/spatial_graph.hpp"

namespace dpgen {

void TrainConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) {
            throw ConfigError(std::string("train config: ") + what);
        }
    };
    require(latent_dim > 0, "latent_dim must be positive");
    require(hidden_dim > 0, "hidden_dim must be positive");
    require(pca_k > 0, "pca_k must be positive");
    require(beta >= 0.0 && std::isfinite(beta), "beta must be finite and nonnegative");
    require(alpha >= 0.0 && std::isfinite(alpha), "alpha must be finite and nonnegative");
    require(lr > 0.0 && std::isfinite(lr), "lr must be positive");
    require(batch_size >= 2, "batch_size must be at least 2");
    require(max_epochs > 0, "max_epochs must be positive");
    require(patience >= 1, "patience must be at least 1");
    require(min_improvement >= 0.0, "min_improvement must be nonnegative");
    require(mask_k > 0, "mask_k must be positive");
}

AdamState AdamState::zeros_like(std::span<Tensor* const> params) {
    AdamState state;
    for (const Tensor* p : params) {
        state.m.push_back(Tensor::zeros_like(*p));
        state.v.push_back(Tensor::zeros_like(*p));
    }
    return state;
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               const AdamOptions& options) {
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw ShapeError("adam_step: " + std::to_string(params.size()) + " params, " + std::to_string(grads.size()) +
                         " grads, " + std::to_string(state.m.size()) + " moment slots");
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(options.beta1, t);
    const double correction2 = 1.0 - std::pow(options.beta2, t);
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& param = *params[p];
        const Tensor& grad = grads[p];
        if (grad.shape() != param.shape() || state.m[p].shape() != param.shape()) {
            throw ShapeError("adam_step: parameter " + param.shape_str() + " vs gradient " + grad.shape_str());
        }
        Tensor& m = state.m[p];
        Tensor& v = state.v[p];
        for (std::size_t i = 0; i < param.size(); ++i) {
            m[i] = options.beta1 * m[i] + (1.0 - options.beta1) * grad[i];
            v[i] = options.beta2 * v[i] + (1.0 - options.beta2) * grad[i] * grad[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            param[i] -= options.lr * m_hat / (std::sqrt(v_hat) + options.eps);
        }
    }
}

namespace {

std::vector<std::vector<std::size_t>> make_batches(std::vector<std::size_t> order, std::size_t batch_size) {
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t end = std::min(order.size(), start + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    // A lone trailing sample has no pairs; fold it into the previous batch.
    if (batches.size() > 1 && batches.back().size() < 2) {
        auto tail = std::move(batches.back());
        batches.pop_back();
        batches.back().insert(batches.back().end(), tail.begin(), tail.end());
    }
    return batches;
}

}  // namespace

TrainResult train(const TrainConfig& config, const Tensor& features, const Tensor& coords) {
    config.validate();
    if (features.rank() != 2 || coords.rank() != 2 || features.rows() != coords.rows()) {
        throw ShapeError("train: features " + features.shape_str() + " and coords " + coords.shape_str() +
                         " must have one row per spot");
    }
    const std::size_t n = features.rows();
    if (n < 2) {
        throw ConfigError("train: need at least two spots");
    }
    if (!features.all_finite() || !coords.all_finite()) {
        throw DomainError("train: non-finite input");
    }
    const bool use_distortion = config.alpha > 0.0;
    if (use_distortion && config.mask_k >= n) {
        throw ConfigError("train: mask_k=" + std::to_string(config.mask_k) + " must be below the spot count " +
                          std::to_string(n));
    }

    Rng root(config.seed);
    Rng init_rng = root.split(1);
    Rng order_rng = root.split(2);
    Rng noise_rng = root.split(3);

    const ModelDims dims{features.cols(), config.hidden_dim, config.latent_dim};
    ModelParams params = ModelParams::initialize(dims, init_rng);
    const MaskGraph mask = use_distortion ? knn_mask(coords, config.mask_k) : MaskGraph();
    std::vector<Tensor*> slots = params.tensors();
    AdamState adam = AdamState::zeros_like(slots);
    const AdamOptions adam_options{config.lr};

    TrainResult result;
    result.params = params;
    double best_recorded = std::numeric_limits<double>::infinity();
    double best_for_stopping = std::numeric_limits<double>::infinity();
    std::size_t stale_epochs = 0;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        order_rng.shuffle(order);
        EpochRecord record;
        record.epoch = epoch;
        std::size_t step = 0;
        for (const auto& batch : make_batches(order, config.batch_size)) {
            ++step;
            const ModelVars vars = ModelVars::from(params, true);
            const ad::Var y = ad::Var::constant(features.gather_rows(batch));
            const ElboTerms elbo = elbo_loss(vars, y, config.beta, noise_rng);
            ad::Var total = elbo.loss;
            double distortion = 0.0;
            if (use_distortion) {
                const Tensor spatial = pairwise_distances(coords.gather_rows(batch));
                const ad::Var dis = masked_distortion_loss(elbo.z, spatial, mask.dense(batch), vars.lambda());
                distortion = dis.item();
                total = total + dis * config.alpha;
            }
            if (!std::isfinite(total.item())) {
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + " step " +
                                   std::to_string(step));
            }
            ad::backward(total);
            std::vector<Tensor> grads;
            grads.reserve(slots.size());
            for (const auto& v : vars.list()) {
                grads.push_back(v.grad());
            }
            adam_step(slots, grads, adam, adam_options);

            const double weight = static_cast<double>(batch.size()) / static_cast<double>(n);
            record.loss += weight * total.item();
            record.recon += weight * elbo.recon.item();
            record.kl += weight * elbo.kl.item();
            record.distortion += weight * distortion;
        }
        if (!params.all_finite()) {
            throw NumericError("train: non-finite parameters after epoch " + std::to_string(epoch));
        }
        record.lambda = params.lambda();
        record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        result.history.epochs.push_back(record);

        if (record.loss < best_recorded) {
            best_recorded = record.loss;
            result.params = params;
            result.history.best_epoch = epoch;
        }
        if (record.loss < best_for_stopping - config.min_improvement) {
            best_for_stopping = record.loss;
            stale_epochs = 0;
        } else if (++stale_epochs >= config.patience) {
            result.history.early_stopped = true;
            break;
        }
    }
    return result;
}

EvalMetrics evaluate(const ModelParams& params, const Tensor& features, const Tensor& coords, std::size_t k) {
    EvalMetrics metrics;
    metrics.k = k;
    metrics.mse = reconstruction_mse(params, features);
    metrics.autocorrelation = latent_autocorrelation(params, features, coords, k);
    return metrics;
}

}  // namespace dpgen
