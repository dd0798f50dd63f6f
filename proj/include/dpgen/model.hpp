#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "dpgen/autodiff.hpp"
#include "dpgen/rng.hpp"
#include "dpgen/tensor.hpp"

namespace dpgen {

struct ModelDims {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 64;
    std::size_t latent_dim = 4;

    friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// Gaussian VAE with one hidden leaky-ReLU layer on each side.
//
//   encoder: y -> leaky(y W1 + b1) W2 + b2 = [mu | logvar]
//   decoder: z -> leaky(z V1 + c1) V2 + c2
//
// plus theta_lambda, the log of the spatial distance scale lambda.
struct ModelParams {
    ModelDims dims;
    Tensor enc_w1;  // [input, hidden]
    Tensor enc_b1;  // [hidden]
    Tensor enc_w2;  // [hidden, 2*latent]
    Tensor enc_b2;  // [2*latent]
    Tensor dec_w1;  // [latent, hidden]
    Tensor dec_b1;  // [hidden]
    Tensor dec_w2;  // [hidden, input]
    Tensor dec_b2;  // [input]
    Tensor theta_lambda = Tensor::scalar(0.0);

    // All tensors zero (lambda = 1).
    static ModelParams zeros(const ModelDims& dims);
    // Weights uniform in +-1/sqrt(fan_in), biases zero, lambda = 1.
    static ModelParams initialize(const ModelDims& dims, Rng& rng);

    double lambda() const;

    // Parameter names in serialization order.
    static const std::vector<std::string>& names();
    std::vector<Tensor*> tensors();
    std::vector<const Tensor*> tensors() const;

    bool all_finite() const;
    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Graph handles for one forward pass over a ModelParams.
struct ModelVars {
    ad::Var enc_w1, enc_b1, enc_w2, enc_b2;
    ad::Var dec_w1, dec_b1, dec_w2, dec_b2;
    ad::Var theta_lambda;

    // Leaves when `differentiable`, constants otherwise.
    static ModelVars from(const ModelParams& params, bool differentiable);
    std::vector<ad::Var> list() const;
    static ModelVars from_list(std::span<const ad::Var> vars);

    ad::Var lambda() const { return ad::exp(theta_lambda); }
};

struct Posterior {
    ad::Var mu;
    ad::Var logvar;
};

Posterior encode(const ModelVars& vars, const ad::Var& y);
ad::Var decode(const ModelVars& vars, const ad::Var& z);

// z = mu + exp(logvar / 2) * noise; the noise is a constant of the graph.
ad::Var reparameterize(const ad::Var& mu, const ad::Var& logvar, const Tensor& noise);
ad::Var reparameterize(const ad::Var& mu, const ad::Var& logvar, Rng& rng);

Tensor standard_normal(const Tensor::Shape& shape, Rng& rng);

// KL(N(mu, diag(exp(logvar))) || N(0, I)), summed over latent dims and
// averaged over the batch.
ad::Var kl_diag_gaussian(const ad::Var& mu, const ad::Var& logvar);

struct ElboTerms {
    ad::Var loss;   // recon + beta * kl
    ad::Var recon;  // batch mean of squared L2 reconstruction error
    ad::Var kl;
    Posterior posterior;
    ad::Var z;
};

ElboTerms elbo_loss(const ModelVars& vars, const ad::Var& y, double beta, const Tensor& noise);
ElboTerms elbo_loss(const ModelVars& vars, const ad::Var& y, double beta, Rng& rng);

// Value-only conveniences on plain tensors.
std::pair<Tensor, Tensor> encode(const ModelParams& params, const Tensor& y);
Tensor decode(const ModelParams& params, const Tensor& z);
double kl_diag_gaussian(const Tensor& mu, const Tensor& logvar);

}  // namespace dpgen
