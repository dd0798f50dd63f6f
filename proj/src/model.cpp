#include "dpgen/model.hpp"

#include <cmath>
#include <string>

#include "dpgen/error.hpp"

namespace dpgen {

using ad::Var;

ModelParams ModelParams::zeros(const ModelDims& dims) {
    if (dims.input_dim == 0 || dims.hidden_dim == 0 || dims.latent_dim == 0) {
        throw ConfigError("model: all dimensions must be positive");
    }
    ModelParams p;
    p.dims = dims;
    p.enc_w1 = Tensor({dims.input_dim, dims.hidden_dim});
    p.enc_b1 = Tensor({dims.hidden_dim});
    p.enc_w2 = Tensor({dims.hidden_dim, 2 * dims.latent_dim});
    p.enc_b2 = Tensor({2 * dims.latent_dim});
    p.dec_w1 = Tensor({dims.latent_dim, dims.hidden_dim});
    p.dec_b1 = Tensor({dims.hidden_dim});
    p.dec_w2 = Tensor({dims.hidden_dim, dims.input_dim});
    p.dec_b2 = Tensor({dims.input_dim});
    p.theta_lambda = Tensor::scalar(0.0);
    return p;
}

ModelParams ModelParams::initialize(const ModelDims& dims, Rng& rng) {
    ModelParams p = zeros(dims);
    for (Tensor* w : {&p.enc_w1, &p.enc_w2, &p.dec_w1, &p.dec_w2}) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(w->rows()));
        for (double& v : w->data()) {
            v = rng.uniform(-bound, bound);
        }
    }
    return p;
}

double ModelParams::lambda() const {
    return std::exp(theta_lambda.item());
}

const std::vector<std::string>& ModelParams::names() {
    static const std::vector<std::string> order{"enc_w1", "enc_b1", "enc_w2", "enc_b2", "dec_w1",
                                                "dec_b1", "dec_w2", "dec_b2", "theta_lambda"};
    return order;
}

std::vector<Tensor*> ModelParams::tensors() {
    return {&enc_w1, &enc_b1, &enc_w2, &enc_b2, &dec_w1, &dec_b1, &dec_w2, &dec_b2, &theta_lambda};
}

std::vector<const Tensor*> ModelParams::tensors() const {
    return {&enc_w1, &enc_b1, &enc_w2, &enc_b2, &dec_w1, &dec_b1, &dec_w2, &dec_b2, &theta_lambda};
}

bool ModelParams::all_finite() const {
    for (const Tensor* t : tensors()) {
        if (!t->all_finite()) {
            return false;
        }
    }
    return true;
}

ModelVars ModelVars::from(const ModelParams& params, bool differentiable) {
    auto wrap = [differentiable](const Tensor& t) { return differentiable ? Var::leaf(t) : Var::constant(t); };
    return ModelVars{wrap(params.enc_w1), wrap(params.enc_b1), wrap(params.enc_w2), wrap(params.enc_b2),
                     wrap(params.dec_w1), wrap(params.dec_b1), wrap(params.dec_w2), wrap(params.dec_b2),
                     wrap(params.theta_lambda)};
}

std::vector<Var> ModelVars::list() const {
    return {enc_w1, enc_b1, enc_w2, enc_b2, dec_w1, dec_b1, dec_w2, dec_b2, theta_lambda};
}

ModelVars ModelVars::from_list(std::span<const Var> vars) {
    if (vars.size() != 9) {
        throw ShapeError("model: expected 9 parameter tensors, got " + std::to_string(vars.size()));
    }
    return ModelVars{vars[0], vars[1], vars[2], vars[3], vars[4], vars[5], vars[6], vars[7], vars[8]};
}

Posterior encode(const ModelVars& vars, const Var& y) {
    const Var hidden = ad::leaky_relu(ad::matmul(y, vars.enc_w1) + vars.enc_b1);
    const Var out = ad::matmul(hidden, vars.enc_w2) + vars.enc_b2;
    const std::size_t latent = out.shape()[1] / 2;
    return Posterior{ad::slice_cols(out, 0, latent), ad::slice_cols(out, latent, latent)};
}

Var decode(const ModelVars& vars, const Var& z) {
    const Var hidden = ad::leaky_relu(ad::matmul(z, vars.dec_w1) + vars.dec_b1);
    return ad::matmul(hidden, vars.dec_w2) + vars.dec_b2;
}

Var reparameterize(const Var& mu, const Var& logvar, const Tensor& noise) {
    if (mu.shape() != logvar.shape() || mu.shape() != noise.shape()) {
        throw ShapeError("reparameterize: shapes " + mu.value().shape_str() + ", " + logvar.value().shape_str() +
                         ", " + noise.shape_str() + " differ");
    }
    return mu + ad::exp(logvar * 0.5) * Var::constant(noise);
}

Var reparameterize(const Var& mu, const Var& logvar, Rng& rng) {
    return reparameterize(mu, logvar, standard_normal(mu.shape(), rng));
}

Tensor standard_normal(const Tensor::Shape& shape, Rng& rng) {
    Tensor noise(shape);
    for (double& v : noise.data()) {
        v = rng.normal();
    }
    return noise;
}

Var kl_diag_gaussian(const Var& mu, const Var& logvar) {
    if (mu.shape() != logvar.shape()) {
        throw ShapeError("kl_diag_gaussian: shapes " + mu.value().shape_str() + " and " +
                         logvar.value().shape_str() + " differ");
    }
    const std::size_t batch = mu.value().rank() == 2 ? mu.value().rows() : 1;
    if (batch == 0) {
        return Var::constant(Tensor::scalar(0.0));
    }
    // -1/2 sum(1 + logvar - exp(logvar) - mu^2), per datum.
    const Var terms = (logvar + 1.0) - ad::exp(logvar) - ad::square(mu);
    return ad::sum(terms) * (-0.5 / static_cast<double>(batch));
}

ElboTerms elbo_loss(const ModelVars& vars, const Var& y, double beta, const Tensor& noise) {
    if (!(beta >= 0.0)) {
        throw ConfigError("elbo_loss: beta must be nonnegative");
    }
    const std::size_t batch = y.value().rows();
    if (batch == 0) {
        throw ShapeError("elbo_loss: empty batch");
    }
    ElboTerms t;
    t.posterior = encode(vars, y);
    t.z = reparameterize(t.posterior.mu, t.posterior.logvar, noise);
    const Var y_hat = decode(vars, t.z);
    t.recon = ad::sum(ad::square(y_hat - y)) * (1.0 / static_cast<double>(batch));
    t.kl = kl_diag_gaussian(t.posterior.mu, t.posterior.logvar);
    t.loss = t.recon + t.kl * beta;
    return t;
}

ElboTerms elbo_loss(const ModelVars& vars, const Var& y, double beta, Rng& rng) {
    const std::size_t latent = vars.dec_w1.value().rows();
    return elbo_loss(vars, y, beta, standard_normal({y.value().rows(), latent}, rng));
}

namespace {

void check_input(const Tensor& y, std::size_t expected, const char* op) {
    if (y.rank() != 2 || y.cols() != expected) {
        throw ShapeError(std::string(op) + ": expected [B," + std::to_string(expected) + "] input, got " +
                         y.shape_str());
    }
}

}  // namespace

std::pair<Tensor, Tensor> encode(const ModelParams& params, const Tensor& y) {
    check_input(y, params.dims.input_dim, "encode");
    const auto post = encode(ModelVars::from(params, false), Var::constant(y));
    return {post.mu.value(), post.logvar.value()};
}

Tensor decode(const ModelParams& params, const Tensor& z) {
    check_input(z, params.dims.latent_dim, "decode");
    return decode(ModelVars::from(params, false), Var::constant(z)).value();
}

double kl_diag_gaussian(const Tensor& mu, const Tensor& logvar) {
    return kl_diag_gaussian(Var::constant(mu), Var::constant(logvar)).item();
}

}  // namespace dpgen
