#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dpgen/preprocess.hpp"
#include "dpgen/tensor.hpp"

namespace dpgen {

struct SynthConfig {
    std::size_t grid_side = 30;
    std::size_t n_genes = 200;
    std::size_t n_patterns = 3;
    double smoothness = 6.0;   // length scale of the spatial fields, in grid units
    double noise_sd = 0.5;
    double count_scale = 10.0; // multiplies the softplus mean before rounding
    std::uint64_t seed = 0;

    void validate() const;
};

struct SpatialData {
    ExpressionMatrix expression;
    Tensor coords;  // [spots, 2]
};

// Spots on a unit grid with expression driven by a few smooth fields:
//   f_p(s) = sum_m a_m sin(<w_m, s> / smoothness + phi_m),  m = 1..3
//   x_j(s) = round(max(0, count_scale * softplus(sum_p B_jp f_p(s)) + noise))
SpatialData generate(const SynthConfig& config);

// Row-interleaved split mimicking two adjacent serial sections. Grid lines
// along `axis` (0: x, 1: y) are assigned to the train side at rate
// `fraction`; at 0.5, odd lines go to train and even lines to test.
struct SectionSplit {
    SpatialData train;
    SpatialData test;
    std::vector<std::size_t> train_spots;
    std::vector<std::size_t> test_spots;
};

SectionSplit train_test_split_sections(const SpatialData& data, int axis = 1, double fraction = 0.5);

}  // namespace dpgen
