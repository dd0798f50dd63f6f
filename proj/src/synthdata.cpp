#include "dpgen/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "dpgen/error.hpp"
#include "dpgen/rng.hpp"

namespace dpgen {
namespace {

constexpr std::size_t components_per_pattern = 3;

double softplus(double x) {
    return x > 30.0 ? x : std::log1p(std::exp(x));
}

std::string padded(const char* prefix, std::size_t i, std::size_t count) {
    const std::size_t width = std::to_string(count > 0 ? count - 1 : 0).size();
    std::string digits = std::to_string(i);
    return prefix + std::string(width - digits.size(), '0') + digits;
}

struct Wave {
    double amplitude;
    double wx;
    double wy;
    double phase;
};

}  // namespace

void SynthConfig::validate() const {
    if (grid_side < 2) {
        throw ConfigError("synth config: grid_side must be at least 2");
    }
    if (n_genes == 0 || n_patterns == 0 || n_patterns > n_genes) {
        throw ConfigError("synth config: need 1 <= n_patterns <= n_genes");
    }
    if (!(smoothness > 0.0) || !(noise_sd >= 0.0) || !(count_scale > 0.0)) {
        throw ConfigError("synth config: smoothness and count_scale must be positive, noise_sd nonnegative");
    }
}

SpatialData generate(const SynthConfig& config) {
    config.validate();
    Rng root(config.seed);
    Rng field_rng = root.split(1);
    Rng loading_rng = root.split(2);
    Rng noise_rng = root.split(3);

    const std::size_t side = config.grid_side;
    const std::size_t spots = side * side;

    std::vector<std::vector<Wave>> patterns(config.n_patterns);
    for (auto& waves : patterns) {
        for (std::size_t m = 0; m < components_per_pattern; ++m) {
            const double angle = field_rng.uniform(0.0, 2.0 * std::numbers::pi);
            const double frequency = field_rng.uniform(0.5, 1.5);
            waves.push_back(Wave{field_rng.normal(), frequency * std::cos(angle), frequency * std::sin(angle),
                                 field_rng.uniform(0.0, 2.0 * std::numbers::pi)});
        }
    }
    Tensor loadings({config.n_genes, config.n_patterns});
    for (double& b : loadings.data()) {
        b = loading_rng.normal();
    }

    SpatialData data;
    data.coords = Tensor({spots, 2});
    Tensor fields({spots, config.n_patterns});
    for (std::size_t r = 0; r < side; ++r) {
        for (std::size_t c = 0; c < side; ++c) {
            const std::size_t i = r * side + c;
            const double x = static_cast<double>(c);
            const double y = static_cast<double>(r);
            data.coords(i, 0) = x;
            data.coords(i, 1) = y;
            for (std::size_t p = 0; p < config.n_patterns; ++p) {
                double f = 0.0;
                for (const Wave& w : patterns[p]) {
                    f += w.amplitude * std::sin((w.wx * x + w.wy * y) / config.smoothness + w.phase);
                }
                fields(i, p) = f;
            }
        }
    }

    ExpressionMatrix& expr = data.expression;
    expr.values = Tensor({spots, config.n_genes});
    for (std::size_t i = 0; i < spots; ++i) {
        expr.spot_ids.push_back(padded("spot_", i, spots));
        for (std::size_t j = 0; j < config.n_genes; ++j) {
            double drive = 0.0;
            for (std::size_t p = 0; p < config.n_patterns; ++p) {
                drive += loadings(j, p) * fields(i, p);
            }
            double value = config.count_scale * softplus(drive);
            if (config.noise_sd > 0.0) {
                value += config.noise_sd * noise_rng.normal();
            }
            expr.values(i, j) = std::max(0.0, std::round(value));
        }
    }
    for (std::size_t j = 0; j < config.n_genes; ++j) {
        expr.gene_ids.push_back(padded("gene_", j, config.n_genes));
    }
    return data;
}

SectionSplit train_test_split_sections(const SpatialData& data, int axis, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw ConfigError("split: fraction must lie in (0, 1)");
    }
    if (axis != 0 && axis != 1) {
        throw ConfigError("split: axis must be 0 or 1");
    }
    const Tensor& coords = data.coords;
    std::map<double, std::size_t> line_of;
    for (std::size_t i = 0; i < coords.rows(); ++i) {
        line_of.emplace(coords(i, static_cast<std::size_t>(axis)), 0);
    }
    std::size_t line = 0;
    for (auto& [value, index] : line_of) {
        index = line++;
    }

    SectionSplit split;
    for (std::size_t i = 0; i < coords.rows(); ++i) {
        const auto r = static_cast<double>(line_of.at(coords(i, static_cast<std::size_t>(axis))));
        const bool to_train = std::floor((r + 1.0) * fraction) > std::floor(r * fraction);
        (to_train ? split.train_spots : split.test_spots).push_back(i);
    }
    if (split.train_spots.empty() || split.test_spots.empty()) {
        throw ConfigError("split: one side of the split is empty");
    }
    split.train = SpatialData{data.expression.select_spots(split.train_spots), coords.gather_rows(split.train_spots)};
    split.test = SpatialData{data.expression.select_spots(split.test_spots), coords.gather_rows(split.test_spots)};
    return split;
}

}  // namespace dpgen
