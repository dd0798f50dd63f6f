// Acceptance checks. Prints one PASS/FAIL line per criterion, exits nonzero
// if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dpgen/autodiff.hpp"
#include "dpgen/cli.hpp"
#include "dpgen/distortion.hpp"
#include "dpgen/io.hpp"
#include "dpgen/metrics.hpp"
#include "dpgen/model.hpp"
#include "dpgen/preprocess.hpp"
#include "dpgen/spatial_graph.hpp"
#include "dpgen/synthdata.hpp"
#include "dpgen/trainer.hpp"

using namespace dpgen;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

Tensor uniform_matrix(std::size_t r, std::size_t c, Rng& rng, double lo, double hi) {
    Tensor t({r, c});
    for (double& v : t.data()) {
        v = rng.uniform(lo, hi);
    }
    return t;
}

Tensor normal_matrix(std::size_t r, std::size_t c, Rng& rng) {
    Tensor t({r, c});
    for (double& v : t.data()) {
        v = rng.normal();
    }
    return t;
}

double naive_dist(const Tensor& x, std::size_t i, std::size_t j) {
    double acc = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) {
        acc += (x(i, c) - x(j, c)) * (x(i, c) - x(j, c));
    }
    return std::sqrt(acc);
}

Tensor grid(std::size_t side) {
    Tensor t({side * side, 2});
    for (std::size_t r = 0; r < side; ++r) {
        for (std::size_t c = 0; c < side; ++c) {
            t(r * side + c, 0) = static_cast<double>(c);
            t(r * side + c, 1) = static_cast<double>(r);
        }
    }
    return t;
}

// 1. Full regularized loss, frozen noise, random parameters. The loss has
// kinks (abs, leaky ReLU), so the step is kept small enough that central
// differences rarely straddle one.
constexpr double fd_step = 1e-6;

Outcome gradient_check() {
    const auto start = Clock::now();
    Rng rng(101);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const ModelDims dims{2 + rng.below(5), 3 + rng.below(6), 1 + rng.below(3)};
        const std::size_t b = 4 + rng.below(7);
        ModelParams p = ModelParams::initialize(dims, rng);
        for (Tensor* t : p.tensors()) {
            for (double& v : t->data()) {
                v += rng.uniform(-0.3, 0.3);
            }
        }
        const Tensor y = normal_matrix(b, dims.input_dim, rng);
        const Tensor coords = uniform_matrix(b, 2, rng, 0, 3);
        const Tensor ds = pairwise_distances(coords);
        const Tensor mask = knn_mask(coords, std::min<std::size_t>(3, b - 1)).dense();
        const Tensor noise = normal_matrix(b, dims.latent_dim, rng);
        const double beta = rng.uniform(0.0, 0.5);
        const double alpha = rng.uniform(0.0, 60.0);

        std::vector<Tensor> inputs;
        for (const Tensor* t : p.tensors()) {
            inputs.push_back(*t);
        }
        const ad::GraphFn f = [&](std::span<const ad::Var> vars) {
            const ModelVars mv = ModelVars::from_list(vars);
            const ElboTerms terms = elbo_loss(mv, ad::Var::constant(y), beta, noise);
            return terms.loss + alpha * masked_distortion_loss(terms.z, ds, mask, mv.lambda());
        };
        worst = std::max(worst, ad::finite_difference_check(f, inputs, fd_step));
    }
    const double t = seconds_since(start);
    return {worst <= 1e-5 && t < 60.0,
            "max relative error " + fmt(worst) + " over 50 configurations (step " + fmt(fd_step) + "), " + fmt(t, 3) + " s"};
}

// 2. Closed-form KL against Monte Carlo log-density ratios.
Outcome kl_check() {
    const auto start = Clock::now();
    Rng rng(202);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const double mu = rng.uniform(-2, 2);
        const double logvar = rng.uniform(-2, 1.5);
        const double sd = std::exp(0.5 * logvar);
        double acc = 0.0;
        const int n = 100000;
        for (int i = 0; i < n; ++i) {
            const double e = rng.normal();
            const double z = mu + sd * e;
            const double log_q = -0.5 * e * e - std::log(sd);
            const double log_p = -0.5 * z * z;
            acc += log_q - log_p;
        }
        const double closed = kl_diag_gaussian(Tensor::matrix({{mu}}), Tensor::matrix({{logvar}}));
        worst = std::max(worst, std::abs(acc / n - closed));
    }
    const double t = seconds_since(start);
    return {worst <= 0.01 && t < 60.0,
            "max |closed - Monte Carlo| " + fmt(worst) + " over 20 pairs, " + fmt(t, 3) + " s"};
}

// 3. Distortion losses against double loops.
Outcome distortion_exactness() {
    Rng rng(303);
    double worst = 0.0;
    double worst_isometry = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t b = 2 + rng.below(40);
        const std::size_t latent = 2 + rng.below(4);
        const Tensor z = normal_matrix(b, latent, rng);
        const Tensor coords = uniform_matrix(b, 2, rng, 0, 10);
        const Tensor ds = pairwise_distances(coords);
        const double lambda = rng.uniform(0.05, 3.0);
        Tensor mask({b, b});
        for (std::size_t i = 0; i < b; ++i) {
            for (std::size_t j = i + 1; j < b; ++j) {
                if (rng.uniform() < 0.3) {
                    mask(i, j) = mask(j, i) = 1.0;
                }
            }
        }
        double full = 0.0, masked = 0.0;
        for (std::size_t i = 0; i < b; ++i) {
            for (std::size_t j = 0; j < b; ++j) {
                if (i == j) {
                    continue;
                }
                const double dev = std::abs(naive_dist(z, i, j) - lambda * ds(i, j));
                full += dev;
                masked += mask(i, j) * dev;
            }
        }
        const double bb = static_cast<double>(b * b);
        const ad::Var zv = ad::Var::constant(z);
        const ad::Var lv = ad::Var::constant(Tensor::scalar(lambda));
        worst = std::max(worst, std::abs(distortion_loss(zv, ds, lv).item() - full / bb));
        worst = std::max(worst, std::abs(masked_distortion_loss(zv, ds, mask, lv).item() - masked / bb));

        Tensor iso({b, latent});
        for (std::size_t i = 0; i < b; ++i) {
            iso(i, 0) = lambda * coords(i, 0);
            iso(i, 1) = lambda * coords(i, 1);
        }
        worst_isometry = std::max(worst_isometry, distortion_loss(iso, ds, lambda));
        worst_isometry = std::max(worst_isometry, masked_distortion_loss(iso, ds, knn_mask(coords, 1), lambda));
    }
    return {worst <= 1e-12 && worst_isometry <= 1e-12,
            "max oracle gap " + fmt(worst) + ", max isometry loss " + fmt(worst_isometry)};
}

// 4. Estimated distortion constant never exceeds the bound when the lower bound holds.
Outcome bound_property() {
    const auto start = Clock::now();
    Rng rng(404);
    const double eps = 0.05, delta = 0.05;
    int covered = 0, holds = 0, violations = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t side = 6 + rng.below(5);
        const Tensor coords = grid(side);
        const double lambda = rng.uniform(0.3, 3.0);
        const double stretch = rng.uniform(1.0, 2.0);
        // Noise sweep from none to a third of the grid spacing, relative to lambda.
        const double noise = lambda * 0.35 * static_cast<double>(trial % 10) / 9.0;
        const std::size_t latent = 2 + rng.below(3);
        const LatentSampler sampler = [&](const Tensor& y, Rng& r) {
            Tensor z({y.rows(), latent});
            for (std::size_t i = 0; i < y.rows(); ++i) {
                z(i, 0) = stretch * lambda * y(i, 0);
                z(i, 1) = stretch * lambda * y(i, 1);
                for (std::size_t d = 0; d < latent; ++d) {
                    z(i, d) += noise * r.normal();
                }
            }
            return z;
        };
        const DistortionReport report = verify_bound(sampler, coords, coords, lambda, eps, delta, 4, rng);
        if (report.lower_bound_ok) {
            ++covered;
            if (report.l_hat <= report.l_bound) {
                ++holds;
            } else {
                ++violations;
            }
        }
    }
    const double t = seconds_since(start);
    const int ok_trials = 100 - violations;
    return {ok_trials >= 95 && covered > 0 && t < 300.0,
            std::to_string(ok_trials) + "/100 trials without violation (lower bound held in " +
                std::to_string(covered) + ", bound held in " + std::to_string(holds) + "), " + fmt(t, 3) + " s"};
}

// 5. Moran's I and Geary's C oracles.
Outcome metric_oracles() {
    const Tensor board = grid(2);
    const std::vector<double> chess{1, -1, -1, 1};
    const double i_val = morans_i(chess, board, 2);
    const double c_val = gearys_c(chess, board, 2);

    const Tensor g = grid(20);
    const auto w = SpatialWeights::knn(g, 5);
    Rng rng(505);
    std::vector<double> x(400);
    for (double& v : x) {
        v = rng.normal();
    }
    double sum_i = 0.0, sum_c = 0.0;
    for (int p = 0; p < 200; ++p) {
        rng.shuffle(x);
        sum_i += morans_i(x, w);
        sum_c += gearys_c(x, w);
    }
    const double mean_i = sum_i / 200.0, mean_c = sum_c / 200.0;
    const bool ok = std::abs(i_val + 1.0) <= 1e-10 && std::abs(c_val - 1.5) <= 1e-10 &&
                    std::abs(mean_i + 1.0 / 399.0) <= 0.05 && std::abs(mean_c - 1.0) <= 0.05;
    return {ok, "chessboard I=" + fmt(i_val, 12) + " C=" + fmt(c_val, 12) + "; permutation means I=" + fmt(mean_i) +
                    " C=" + fmt(mean_c)};
}

// Shared synthetic experiment for criteria 6 and 7.
struct RunResult {
    double mse = 0.0;
    double morans = 0.0;
    double gearys = 0.0;
};

struct Experiment {
    std::map<double, std::vector<RunResult>> runs;  // by alpha
    double seconds = 0.0;
    double seconds_0_50 = 0.0;

    double mean(double alpha, double RunResult::*field) const {
        const auto& r = runs.at(alpha);
        double acc = 0.0;
        for (const auto& x : r) {
            acc += x.*field;
        }
        return acc / static_cast<double>(r.size());
    }
};

constexpr std::size_t n_seeds = 5;
const std::vector<double> sweep_alphas{0, 10, 25, 50, 100, 200};

SynthConfig experiment_synth_config() {
    SynthConfig c;
    c.grid_side = 30;
    c.n_genes = 200;
    c.n_patterns = 3;
    c.smoothness = 3.0;
    c.noise_sd = 20.0;
    c.seed = 2024;
    return c;
}

constexpr std::size_t experiment_hvg = 200;
constexpr std::size_t experiment_pca = 32;

Experiment run_experiment() {
    const auto start = Clock::now();
    const SectionSplit split = train_test_split_sections(generate(experiment_synth_config()));
    const PreprocessResult pre = fit_preprocess(split.train.expression, experiment_hvg, experiment_pca);
    const Tensor test_features = pre.model.transform(split.test.expression);

    Experiment e;
    for (double alpha : sweep_alphas) {
        for (std::size_t s = 0; s < n_seeds; ++s) {
            const auto t0 = Clock::now();
            TrainConfig config;
            config.alpha = alpha;
            config.pca_k = experiment_pca;
            config.seed = s;
            const TrainResult result = train(config, pre.features, split.train.coords);
            const EvalMetrics m = evaluate(result.params, test_features, split.test.coords, 5);
            e.runs[alpha].push_back(
                {m.mse, m.autocorrelation.morans_i_mean, m.autocorrelation.gearys_c_mean});
            if (alpha == 0.0 || alpha == 50.0) {
                e.seconds_0_50 += seconds_since(t0);
            }
        }
    }
    e.seconds = seconds_since(start);
    return e;
}

Outcome direction_of_effect(const Experiment& e) {
    const double i0 = e.mean(0, &RunResult::morans), i50 = e.mean(50, &RunResult::morans);
    const double c0 = e.mean(0, &RunResult::gearys), c50 = e.mean(50, &RunResult::gearys);
    const double m0 = e.mean(0, &RunResult::mse), m50 = e.mean(50, &RunResult::mse);
    const bool ok = i50 > i0 && c50 < c0 && m50 <= 1.05 * m0 && e.seconds_0_50 < 900.0;
    return {ok, "alpha=0: I=" + fmt(i0) + " C=" + fmt(c0) + " mse=" + fmt(m0) + "; alpha=50: I=" + fmt(i50) +
                    " C=" + fmt(c50) + " mse=" + fmt(m50) + " (ratio " + fmt(m50 / m0) + "), " +
                    fmt(e.seconds_0_50, 3) + " s"};
}

Outcome sweep_shape(const Experiment& e) {
    std::vector<double> series;
    std::string text;
    for (double a : sweep_alphas) {
        series.push_back(e.mean(a, &RunResult::morans));
        text += (text.empty() ? "" : ", ") + fmt(a) + ":" + fmt(series.back());
    }
    const double best_nonzero = *std::max_element(series.begin() + 1, series.end());
    const bool gain = best_nonzero - series[0] >= 0.05;
    const bool monotone = series[1] >= series[0] && series[2] >= series[1];
    return {gain && monotone && e.seconds < 2700.0,
            "mean I by alpha {" + text + "}; best gain " + fmt(best_nonzero - series[0]) + ", " + fmt(e.seconds, 3) +
                " s"};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// 8. Same config and seed through the CLI twice.
Outcome reproducibility() {
    const fs::path root = fs::temp_directory_path() / "dpgen_acceptance_repro";
    fs::remove_all(root);
    auto run = [](std::vector<std::string> args) {
        args.insert(args.begin(), "dpgen");
        return cli::run(args);
    };
    const std::string r = root.string();
    bool ok = run({"synth", "--grid", "20", "--genes", "100", "--seed", "8", "--split", "--out", r + "/synth"}) == 0 &&
              run({"preprocess", "--expr", r + "/synth/train/expression.csv", "--hvg", "100", "--pca", "16", "--out",
                   r + "/pre"}) == 0 &&
              run({"preprocess", "--expr", r + "/synth/test/expression.csv", "--model", r + "/pre/pca_model.bin",
                   "--out", r + "/pre_test"}) == 0;
    for (const char* name : {"a", "b"}) {
        const std::string out = r + "/" + name;
        ok = ok &&
             run({"train", "--features", r + "/pre/features.bin", "--coords", r + "/synth/train/coords.csv", "--alpha",
                  "50", "--seed", "3", "--out", out}) == 0 &&
             run({"evaluate", "--checkpoint", out + "/checkpoint.bin", "--features", r + "/pre_test/features.bin",
                  "--coords", r + "/synth/test/coords.csv", "--out", out + "/eval"}) == 0;
    }
    if (!ok) {
        return {false, "pipeline failed"};
    }
    const bool same_ckpt = slurp(root / "a/checkpoint.bin") == slurp(root / "b/checkpoint.bin");
    const bool same_metrics = slurp(root / "a/eval/metrics.json") == slurp(root / "b/eval/metrics.json");
    const bool non_empty = !slurp(root / "a/eval/metrics.json").empty();
    const std::string digest = io::sha256_file(root / "a/checkpoint.bin").substr(0, 12);
    fs::remove_all(root);
    return {same_ckpt && same_metrics && non_empty,
            std::string("checkpoint ") + (same_ckpt ? "identical" : "differs") + " (" + digest + "), metrics.json " +
                (same_metrics ? "identical" : "differs")};
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << "criterion " << id << " " << name << ": " << o.detail
                  << std::endl;
    };
    report(1, "gradient correctness", gradient_check);
    report(2, "KL oracle", kl_check);
    report(3, "distortion-loss exactness", distortion_exactness);
    report(4, "distortion bound property", bound_property);
    report(5, "metric oracles", metric_oracles);

    std::optional<Experiment> experiment;
    std::string experiment_error;
    try {
        experiment = run_experiment();
    } catch (const std::exception& e) {
        experiment_error = e.what();
    }
    report(6, "direction of effect", [&]() -> Outcome {
        if (!experiment) return {false, "experiment failed: " + experiment_error};
        return direction_of_effect(*experiment);
    });
    report(7, "alpha sweep shape", [&]() -> Outcome {
        if (!experiment) return {false, "experiment failed: " + experiment_error};
        return sweep_shape(*experiment);
    });
    report(8, "reproducibility", reproducibility);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
