#include "dpgen/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "dpgen/distortion.hpp"
#include "dpgen/error.hpp"
#include "dpgen/io.hpp"
#include "dpgen/metrics.hpp"
#include "dpgen/preprocess.hpp"
#include "dpgen/spatial_graph.hpp"
#include "dpgen/synthdata.hpp"
#include "dpgen/trainer.hpp"

#ifndef DPGEN_VERSION
#define DPGEN_VERSION "0.0.0"
#endif

namespace dpgen::cli {
namespace {

namespace fs = std::filesystem;
using io::json;
using Clock = std::chrono::steady_clock;

// Collects provenance for manifest.json.
class Manifest {
public:
    Manifest(std::string command, const std::vector<std::string>& args) : command_(std::move(command)), args_(args) {}

    void input(const fs::path& path) {
        inputs_.push_back({{"path", path.string()},
                           {"sha256", io::sha256_file(path)},
                           {"bytes", static_cast<std::uint64_t>(fs::file_size(path))}});
    }
    void output(const fs::path& path) { outputs_.push_back(path.string()); }
    void config(json c) { config_ = std::move(c); }
    void seed(std::uint64_t s) { seed_ = s; }

    template <typename F>
    auto stage(const std::string& name, F&& body) {
        const auto start = Clock::now();
        if constexpr (std::is_void_v<decltype(body())>) {
            body();
            stages_[name] += std::chrono::duration<double>(Clock::now() - start).count();
        } else {
            auto result = body();
            stages_[name] += std::chrono::duration<double>(Clock::now() - start).count();
            return result;
        }
    }

    void write(const fs::path& dir) const {
        json stages = json::object();
        for (const auto& [k, v] : stages_) {
            stages[k] = v;
        }
        const json j{{"tool", "dpgen"},
                     {"version", DPGEN_VERSION},
                     {"command", command_},
                     {"args", args_},
                     {"config", config_},
                     {"seed", seed_ ? json(*seed_) : json(nullptr)},
                     {"inputs", inputs_},
                     {"stage_seconds", stages},
                     {"outputs", outputs_}};
        io::write_json(dir / "manifest.json", j);
    }

private:
    std::string command_;
    std::vector<std::string> args_;
    json config_ = json::object();
    std::optional<std::uint64_t> seed_;
    json inputs_ = json::array();
    std::vector<std::string> outputs_;
    std::map<std::string, double> stages_;
};

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
    }
}

// Seed precedence: flag > DPGEN_SEED > config file.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t from_config) {
    if (flag) {
        return *flag;
    }
    if (const char* env = std::getenv("DPGEN_SEED"); env != nullptr && *env != '\0') {
        try {
            std::size_t used = 0;
            const auto value = std::stoull(env, &used);
            if (used != std::string(env).size()) {
                throw std::invalid_argument(env);
            }
            return value;
        } catch (const std::exception&) {
            throw ConfigError(std::string("DPGEN_SEED is not an unsigned integer: '") + env + "'");
        }
    }
    return from_config;
}

struct LoadedData {
    io::FeatureMatrix features;
    Tensor coords;
};

LoadedData load_features_and_coords(const fs::path& features_path, const fs::path& coords_path, Manifest& manifest) {
    manifest.input(features_path);
    manifest.input(coords_path);
    LoadedData data;
    data.features = io::load_features(features_path);
    data.coords = io::align_coords(io::load_coords(coords_path), data.features.spot_ids);
    return data;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
    std::string config;
    std::optional<std::size_t> grid, genes, patterns;
    std::optional<double> smoothness, noise, count_scale;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool split = false;
    bool mtx = false;
};

void add_synth(CLI::App& app, SynthArgs& a) {
    app.add_option("--config", a.config, "JSON synth config")->check(CLI::ExistingFile);
    app.add_option("--grid", a.grid, "grid side length");
    app.add_option("--genes", a.genes, "number of genes");
    app.add_option("--patterns", a.patterns, "number of spatial factors");
    app.add_option("--smoothness", a.smoothness, "field length scale");
    app.add_option("--noise", a.noise, "Gaussian noise sd");
    app.add_option("--count-scale", a.count_scale, "expression magnitude");
    app.add_option("--seed", a.seed, "RNG seed");
    app.add_option("--out", a.out, "output directory")->required();
    app.add_flag("--split", a.split, "also write row-interleaved train/ and test/ sections");
    app.add_flag("--mtx", a.mtx, "also write MatrixMarket expression with sidecar id files");
}

void write_spatial(const fs::path& dir, const SpatialData& data, bool mtx, Manifest& manifest) {
    ensure_dir(dir);
    io::write_expression_csv(dir / "expression.csv", data.expression);
    io::write_coords_csv(dir / "coords.csv", data.expression.spot_ids, data.coords);
    manifest.output(dir / "expression.csv");
    manifest.output(dir / "coords.csv");
    if (mtx) {
        io::write_matrix_market(dir / "expression.mtx", data.expression, dir / "genes.txt", dir / "spots.txt");
        manifest.output(dir / "expression.mtx");
    }
}

void run_synth(const SynthArgs& a, Manifest& manifest) {
    SynthConfig config;
    if (!a.config.empty()) {
        manifest.input(a.config);
        io::merge_json(io::read_json(a.config), config);
    }
    if (a.grid) config.grid_side = *a.grid;
    if (a.genes) config.n_genes = *a.genes;
    if (a.patterns) config.n_patterns = *a.patterns;
    if (a.smoothness) config.smoothness = *a.smoothness;
    if (a.noise) config.noise_sd = *a.noise;
    if (a.count_scale) config.count_scale = *a.count_scale;
    config.seed = resolve_seed(a.seed, config.seed);
    manifest.config(io::to_json(config));
    manifest.seed(config.seed);

    const fs::path out = a.out;
    const SpatialData data = manifest.stage("generate", [&] { return generate(config); });
    manifest.stage("write", [&] {
        write_spatial(out, data, a.mtx, manifest);
        if (a.split) {
            const auto split = train_test_split_sections(data);
            write_spatial(out / "train", split.train, a.mtx, manifest);
            write_spatial(out / "test", split.test, a.mtx, manifest);
        }
    });
    manifest.write(out);
}

// ----------------------------------------------------------- preprocess

struct PreprocessArgs {
    std::string expr, coords, model, out;
    std::size_t hvg = 3000;
    std::size_t pca = 256;
    double scale = default_normalization_scale;
};

void add_preprocess(CLI::App& app, PreprocessArgs& a) {
    app.add_option("--expr", a.expr, "expression CSV or .mtx")->required()->check(CLI::ExistingFile);
    app.add_option("--coords", a.coords, "coordinates CSV (checked against the spot ids)")->check(CLI::ExistingFile);
    app.add_option("--hvg", a.hvg, "number of highly variable genes")->capture_default_str();
    app.add_option("--pca", a.pca, "number of principal components")->capture_default_str();
    app.add_option("--scale", a.scale, "library-size normalization scale")->capture_default_str();
    app.add_option("--model", a.model, "apply an existing pca_model.bin instead of fitting")
        ->check(CLI::ExistingFile);
    app.add_option("--out", a.out, "output directory")->required();
}

void run_preprocess(const PreprocessArgs& a, Manifest& manifest) {
    const fs::path out = a.out;
    ensure_dir(out);
    manifest.input(a.expr);
    const ExpressionMatrix expr = manifest.stage("load", [&] { return io::load_expression(a.expr); });
    expr.validate();
    if (!a.coords.empty()) {
        manifest.input(a.coords);
        io::align_coords(io::load_coords(a.coords), expr.spot_ids);
    }

    io::FeatureMatrix features;
    features.spot_ids = expr.spot_ids;
    if (!a.model.empty()) {
        manifest.input(a.model);
        const PreprocessModel model = io::load_preprocess_model(a.model);
        manifest.config({{"model", a.model}, {"scale", model.scale}});
        features.values = manifest.stage("transform", [&] { return model.transform(expr); });
    } else {
        const std::size_t hvg = std::min(a.hvg, expr.genes());
        const std::size_t pca = std::min({a.pca, hvg, expr.spots()});
        if (hvg != a.hvg || pca != a.pca) {
            std::cerr << "dpgen: warning: clamped hvg=" << hvg << " pca=" << pca << " to the input size\n";
        }
        manifest.config({{"hvg", hvg}, {"pca", pca}, {"scale", a.scale}});
        auto fitted = manifest.stage("fit", [&] { return fit_preprocess(expr, hvg, pca, a.scale); });
        if (fitted.model.pca.rank_deficient) {
            std::cerr << "dpgen: warning: input rank is below the requested component count\n";
        }
        io::save_preprocess_model(out / "pca_model.bin", fitted.model);
        manifest.output(out / "pca_model.bin");
        features.values = std::move(fitted.features);
    }
    io::save_features(out / "features.bin", features);
    manifest.output(out / "features.bin");
    manifest.write(out);
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    std::string config, features, coords, out;
    std::optional<double> alpha, beta, lr, min_improvement;
    std::optional<std::size_t> latent, hidden, mask_k, batch_size, max_epochs, patience;
    std::optional<std::uint64_t> seed;
    bool export_mask = false;
};

void add_train_options(CLI::App& app, TrainArgs& a) {
    app.add_option("--config", a.config, "JSON train config")->check(CLI::ExistingFile);
    app.add_option("--beta", a.beta, "KL weight");
    app.add_option("--latent", a.latent, "latent dimension");
    app.add_option("--hidden", a.hidden, "hidden layer width");
    app.add_option("--mask-k", a.mask_k, "neighbors per spot in the distortion mask");
    app.add_option("--lr", a.lr, "Adam learning rate");
    app.add_option("--batch-size", a.batch_size, "minibatch size");
    app.add_option("--max-epochs", a.max_epochs, "epoch cap");
    app.add_option("--patience", a.patience, "early-stopping patience in epochs");
    app.add_option("--min-improvement", a.min_improvement, "early-stopping threshold");
}

void add_train(CLI::App& app, TrainArgs& a) {
    app.add_option("--features", a.features, "features.bin")->required()->check(CLI::ExistingFile);
    app.add_option("--coords", a.coords, "coordinates CSV")->required()->check(CLI::ExistingFile);
    app.add_option("--alpha", a.alpha, "distortion-loss weight (0 = plain VAE)");
    app.add_option("--seed", a.seed, "RNG seed");
    app.add_option("--out", a.out, "output directory")->required();
    app.add_flag("--export-mask", a.export_mask, "write the mask graph as mask_edges.csv");
    add_train_options(app, a);
}

TrainConfig build_train_config(const TrainArgs& a, Manifest& manifest) {
    TrainConfig config;
    if (!a.config.empty()) {
        manifest.input(a.config);
        io::merge_json(io::read_json(a.config), config);
    }
    if (a.alpha) config.alpha = *a.alpha;
    if (a.beta) config.beta = *a.beta;
    if (a.lr) config.lr = *a.lr;
    if (a.min_improvement) config.min_improvement = *a.min_improvement;
    if (a.latent) config.latent_dim = *a.latent;
    if (a.hidden) config.hidden_dim = *a.hidden;
    if (a.mask_k) config.mask_k = *a.mask_k;
    if (a.batch_size) config.batch_size = *a.batch_size;
    if (a.max_epochs) config.max_epochs = *a.max_epochs;
    if (a.patience) config.patience = *a.patience;
    config.seed = resolve_seed(a.seed, config.seed);
    config.validate();
    return config;
}

void run_train(const TrainArgs& a, Manifest& manifest) {
    const fs::path out = a.out;
    ensure_dir(out);
    TrainConfig config = build_train_config(a, manifest);
    const LoadedData data = load_features_and_coords(a.features, a.coords, manifest);
    config.pca_k = data.features.values.cols();
    manifest.config(io::to_json(config));
    manifest.seed(config.seed);

    const TrainResult result =
        manifest.stage("train", [&] { return train(config, data.features.values, data.coords); });
    const json extra{{"best_epoch", result.history.best_epoch},
                     {"epochs_run", result.history.epochs.size()},
                     {"early_stopped", result.history.early_stopped}};
    io::save_checkpoint(out / "checkpoint.bin", io::Checkpoint{result.params, config, extra});
    io::write_history_csv(out / "history.csv", result.history);
    manifest.output(out / "checkpoint.bin");
    manifest.output(out / "history.csv");
    if (a.export_mask) {
        io::write_edges_csv(out / "mask_edges.csv", knn_mask(data.coords, config.mask_k));
        manifest.output(out / "mask_edges.csv");
    }
    manifest.write(out);
}

// ------------------------------------------------------------- evaluate

struct EvaluateArgs {
    std::string checkpoint, features, coords, out;
    std::size_t k = 5;
};

void add_evaluate(CLI::App& app, EvaluateArgs& a) {
    app.add_option("--checkpoint", a.checkpoint, "checkpoint.bin")->required()->check(CLI::ExistingFile);
    app.add_option("--features", a.features, "features.bin")->required()->check(CLI::ExistingFile);
    app.add_option("--coords", a.coords, "coordinates CSV")->required()->check(CLI::ExistingFile);
    app.add_option("--k", a.k, "neighbors for Moran's I / Geary's C")->capture_default_str();
    app.add_option("--out", a.out, "output directory")->required();
}

io::Checkpoint load_matching_checkpoint(const fs::path& path, const io::FeatureMatrix& features) {
    io::Checkpoint ck = io::load_checkpoint(path);
    if (ck.params.dims.input_dim != features.values.cols()) {
        throw IoError("checkpoint expects " + std::to_string(ck.params.dims.input_dim) + " features, file has " +
                      std::to_string(features.values.cols()));
    }
    return ck;
}

void run_evaluate(const EvaluateArgs& a, Manifest& manifest) {
    const fs::path out = a.out;
    ensure_dir(out);
    manifest.input(a.checkpoint);
    const LoadedData data = load_features_and_coords(a.features, a.coords, manifest);
    const io::Checkpoint ck = load_matching_checkpoint(a.checkpoint, data.features);
    manifest.config({{"k", a.k}});
    manifest.seed(ck.config.seed);

    const EvalMetrics metrics =
        manifest.stage("evaluate", [&] { return evaluate(ck.params, data.features.values, data.coords, a.k); });
    io::write_json(out / "metrics.json", io::to_json(metrics));
    const auto [mu, logvar] = encode(ck.params, data.features.values);
    io::write_latent_csv(out / "latent.csv", data.features.spot_ids, mu);
    manifest.output(out / "metrics.json");
    manifest.output(out / "latent.csv");
    manifest.write(out);
}

// --------------------------------------------------------- verify-bound

struct VerifyArgs {
    std::string checkpoint, features, coords, out;
    double epsilon = 0.05;
    double delta = 0.05;
    std::size_t draws = 8;
    std::size_t max_spots = 1000;
    std::optional<std::uint64_t> seed;
};

void add_verify(CLI::App& app, VerifyArgs& a) {
    app.add_option("--checkpoint", a.checkpoint, "checkpoint.bin")->required()->check(CLI::ExistingFile);
    app.add_option("--features", a.features, "features.bin")->required()->check(CLI::ExistingFile);
    app.add_option("--coords", a.coords, "coordinates CSV")->required()->check(CLI::ExistingFile);
    app.add_option("--epsilon", a.epsilon, "allowed failure probability")->capture_default_str();
    app.add_option("--delta", a.delta, "distance-quantile tail mass")->capture_default_str();
    app.add_option("--draws", a.draws, "posterior draws per spot")->capture_default_str();
    app.add_option("--max-spots", a.max_spots, "random spot subsample cap (pairs grow quadratically)")
        ->capture_default_str();
    app.add_option("--seed", a.seed, "RNG seed");
    app.add_option("--out", a.out, "also write distortion_report.json here");
}

void run_verify(const VerifyArgs& a, Manifest& manifest) {
    manifest.input(a.checkpoint);
    LoadedData data = load_features_and_coords(a.features, a.coords, manifest);
    const io::Checkpoint ck = load_matching_checkpoint(a.checkpoint, data.features);
    const std::uint64_t seed = resolve_seed(a.seed, ck.config.seed);
    manifest.seed(seed);
    manifest.config({{"epsilon", a.epsilon}, {"delta", a.delta}, {"draws", a.draws}, {"max_spots", a.max_spots}});
    if (a.max_spots < 2) {
        throw ConfigError("--max-spots must be at least 2");
    }

    Rng rng(seed);
    Tensor y = data.features.values;
    Tensor coords = data.coords;
    if (y.rows() > a.max_spots) {
        std::vector<std::size_t> order(y.rows());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng subsample = rng.split(1);
        subsample.shuffle(order);
        order.resize(a.max_spots);
        std::sort(order.begin(), order.end());
        y = y.gather_rows(order);
        coords = coords.gather_rows(order);
    }
    const ModelParams& params = ck.params;
    const LatentSampler sampler = [&params](const Tensor& input, Rng& r) {
        const auto [mu, logvar] = encode(params, input);
        return reparameterize(ad::Var::constant(mu), ad::Var::constant(logvar), r).value();
    };
    Rng draw_rng = rng.split(2);
    const DistortionReport report = manifest.stage("verify", [&] {
        return verify_bound(sampler, y, coords, params.lambda(), a.epsilon, a.delta, a.draws, draw_rng);
    });
    json j = io::to_json(report);
    j["spots"] = y.rows();
    std::cout << j.dump(2) << "\n";
    if (!a.out.empty()) {
        const fs::path out = a.out;
        ensure_dir(out);
        io::write_json(out / "distortion_report.json", j);
        manifest.output(out / "distortion_report.json");
        manifest.write(out);
    }
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
    TrainArgs train;
    std::string test_features, test_coords;
    std::vector<double> alphas{0, 10, 25, 50, 100, 200};
    std::size_t seeds = 5;
    std::uint64_t base_seed = 0;
    std::size_t jobs = 1;
    std::size_t k = 5;
};

void add_sweep(CLI::App& app, SweepArgs& a) {
    app.add_option("--features", a.train.features, "training features.bin")->required()->check(CLI::ExistingFile);
    app.add_option("--coords", a.train.coords, "training coordinates CSV")->required()->check(CLI::ExistingFile);
    app.add_option("--test-features", a.test_features, "evaluation features.bin (default: training set)")
        ->check(CLI::ExistingFile);
    app.add_option("--test-coords", a.test_coords, "evaluation coordinates CSV")->check(CLI::ExistingFile);
    app.add_option("--alphas", a.alphas, "comma-separated distortion weights")->delimiter(',')->capture_default_str();
    app.add_option("--seeds", a.seeds, "seeds per alpha")->capture_default_str();
    app.add_option("--base-seed", a.base_seed, "first seed")->capture_default_str();
    app.add_option("--jobs", a.jobs, "parallel workers")->capture_default_str();
    app.add_option("--k", a.k, "neighbors for Moran's I / Geary's C")->capture_default_str();
    app.add_option("--out", a.train.out, "output directory")->required();
    add_train_options(app, a.train);
}

struct SweepRow {
    double alpha = 0.0;
    std::uint64_t seed = 0;
    std::size_t epochs = 0;
    double lambda = 1.0;
    EvalMetrics metrics;
};

void run_sweep(const SweepArgs& a, Manifest& manifest) {
    const fs::path out = a.train.out;
    ensure_dir(out);
    if (a.seeds == 0 || a.alphas.empty() || a.jobs == 0) {
        throw ConfigError("sweep needs at least one alpha, one seed and one job");
    }
    if (a.test_features.empty() != a.test_coords.empty()) {
        throw ConfigError("--test-features and --test-coords go together");
    }
    const TrainConfig base = build_train_config(a.train, manifest);
    const LoadedData train_data = load_features_and_coords(a.train.features, a.train.coords, manifest);
    const LoadedData test_data = a.test_features.empty()
                                     ? train_data
                                     : load_features_and_coords(a.test_features, a.test_coords, manifest);
    json config = io::to_json(base);
    config["alphas"] = a.alphas;
    config["seeds"] = a.seeds;
    config["base_seed"] = a.base_seed;
    manifest.config(config);

    std::vector<SweepRow> rows;
    for (double alpha : a.alphas) {
        for (std::size_t s = 0; s < a.seeds; ++s) {
            SweepRow row;
            row.alpha = alpha;
            row.seed = a.base_seed + s;
            rows.push_back(row);
        }
    }
    std::atomic<std::size_t> next{0};
    std::mutex failure_mutex;
    std::exception_ptr failure;
    auto worker = [&] {
        for (std::size_t i = next++; i < rows.size(); i = next++) {
            try {
                SweepRow& row = rows[i];
                TrainConfig config = base;
                config.alpha = row.alpha;
                config.seed = row.seed;
                config.pca_k = train_data.features.values.cols();
                const TrainResult result = train(config, train_data.features.values, train_data.coords);
                row.epochs = result.history.epochs.size();
                row.lambda = result.params.lambda();
                row.metrics = evaluate(result.params, test_data.features.values, test_data.coords, a.k);
                const fs::path run_dir =
                    out / ("alpha_" + io::format_double(row.alpha) + "_seed_" + std::to_string(row.seed));
                ensure_dir(run_dir);
                io::save_checkpoint(run_dir / "checkpoint.bin", io::Checkpoint{result.params, config, json()});
                io::write_json(run_dir / "metrics.json", io::to_json(row.metrics));
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                next = rows.size();
            }
        }
    };
    manifest.stage("runs", [&] {
        std::vector<std::thread> pool;
        for (std::size_t j = 1; j < std::min(a.jobs, rows.size()); ++j) {
            pool.emplace_back(worker);
        }
        worker();
        for (auto& t : pool) {
            t.join();
        }
    });
    if (failure) {
        std::rethrow_exception(failure);
    }

    std::string csv = "alpha,seed,epochs,lambda,mse,morans_i,gearys_c\n";
    for (const auto& r : rows) {
        csv += io::format_double(r.alpha) + "," + std::to_string(r.seed) + "," + std::to_string(r.epochs) + "," +
               io::format_double(r.lambda) + "," + io::format_double(r.metrics.mse) + "," +
               io::format_double(r.metrics.autocorrelation.morans_i_mean) + "," +
               io::format_double(r.metrics.autocorrelation.gearys_c_mean) + "\n";
    }
    io::write_file_atomic(out / "sweep.csv", csv);
    manifest.output(out / "sweep.csv");
    manifest.write(out);
}

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

int fail(const char* kind, const std::string& message, int code) {
    std::cerr << "dpgen: error[" << kind << "]: " << one_line(message) << std::endl;
    return code;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Distance-preserving VAE toolkit for spatial expression data", "dpgen"};
    app.require_subcommand(1);
    app.set_version_flag("--version", DPGEN_VERSION);

    SynthArgs synth_args;
    PreprocessArgs preprocess_args;
    TrainArgs train_args;
    EvaluateArgs evaluate_args;
    VerifyArgs verify_args;
    SweepArgs sweep_args;
    auto* synth = app.add_subcommand("synth", "generate a synthetic spatial dataset");
    add_synth(*synth, synth_args);
    auto* preprocess = app.add_subcommand("preprocess", "normalize, select HVGs and project with PCA");
    add_preprocess(*preprocess, preprocess_args);
    auto* train_cmd = app.add_subcommand("train", "train a (distance-preserving) VAE");
    add_train(*train_cmd, train_args);
    auto* evaluate_cmd = app.add_subcommand("evaluate", "reconstruction MSE and latent spatial autocorrelation");
    add_evaluate(*evaluate_cmd, evaluate_args);
    auto* verify = app.add_subcommand("verify-bound", "estimate the distortion constant and its upper bound");
    add_verify(*verify, verify_args);
    auto* sweep = app.add_subcommand("sweep", "train and evaluate over a grid of alphas and seeds");
    add_sweep(*sweep, sweep_args);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) {
        reversed.pop_back();
    }
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), exit_usage);
    }

    const std::string command = app.get_subcommands().front()->get_name();
    Manifest manifest(command, args);
    try {
        if (command == "synth") {
            run_synth(synth_args, manifest);
        } else if (command == "preprocess") {
            run_preprocess(preprocess_args, manifest);
        } else if (command == "train") {
            run_train(train_args, manifest);
        } else if (command == "evaluate") {
            run_evaluate(evaluate_args, manifest);
        } else if (command == "verify-bound") {
            run_verify(verify_args, manifest);
        } else {
            run_sweep(sweep_args, manifest);
        }
    } catch (const ConfigError& e) {
        return fail("usage", e.what(), exit_usage);
    } catch (const IoError& e) {
        return fail("io", e.what(), exit_io);
    } catch (const ShapeError& e) {
        return fail("format", e.what(), exit_io);
    } catch (const NumericError& e) {
        return fail("numeric", e.what(), exit_numeric);
    } catch (const DomainError& e) {
        return fail("numeric", e.what(), exit_numeric);
    } catch (const std::filesystem::filesystem_error& e) {
        return fail("io", e.what(), exit_io);
    }
    return exit_ok;
}

}  // namespace dpgen::cli
