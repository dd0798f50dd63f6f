#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dpgen/tensor.hpp"

namespace dpgen {

// Spots x genes expression values with their identifiers.
struct ExpressionMatrix {
    Tensor values;
    std::vector<std::string> spot_ids;
    std::vector<std::string> gene_ids;

    std::size_t spots() const { return spot_ids.size(); }
    std::size_t genes() const { return gene_ids.size(); }

    // Throws ShapeError if the id lists disagree with the value matrix.
    void validate() const;
    ExpressionMatrix select_genes(const std::vector<std::size_t>& genes) const;
    ExpressionMatrix select_spots(const std::vector<std::size_t>& spots) const;
};

inline constexpr double default_normalization_scale = 1e4;

// out[i,j] = log(1 + scale * x[i,j] / sum_j x[i,j]).
ExpressionMatrix log_normalize(const ExpressionMatrix& x, double scale = default_normalization_scale);

// Sample variance (1/(n-1)) of every column.
std::vector<double> column_variances(const Tensor& x);

// Indices of the n genes with the largest variance, ties to the lower index,
// returned in ascending order. Variances are taken over the given values, so
// callers pass log-normalized data.
std::vector<std::size_t> select_hvg(const ExpressionMatrix& x, std::size_t n);
std::vector<std::size_t> top_variance_indices(const std::vector<double>& variances, std::size_t n);

struct PcaModel {
    std::vector<double> mean;               // per input column
    Tensor components;                      // [k, genes], orthonormal rows
    std::vector<double> explained_variance; // non-increasing
    // Set when fewer than k directions carry variance; the remaining
    // components then span arbitrary orthonormal directions.
    bool rank_deficient = false;

    std::size_t k() const { return explained_variance.size(); }
    std::size_t input_dim() const { return mean.size(); }

    // Projects rows of x (same columns as the fit) onto the components.
    Tensor transform(const Tensor& x) const;
    // scores * components + mean.
    Tensor inverse_transform(const Tensor& scores) const;
};

struct PcaResult {
    PcaModel model;
    Tensor scores;
};

// Mean-centred PCA through a thin SVD. Each component is sign-fixed so its
// largest-magnitude entry is nonnegative.
PcaResult pca_fit_transform(const Tensor& x, std::size_t k);

// Fitted preprocessing pipeline: normalization, HVG subset, PCA.
struct PreprocessModel {
    double scale = default_normalization_scale;
    std::vector<std::string> gene_ids;        // genes of the fitted input
    std::vector<std::size_t> hvg_indices;     // into gene_ids
    PcaModel pca;

    // Applies the fitted pipeline to new data. Genes are matched by id.
    Tensor transform(const ExpressionMatrix& x) const;
};

struct PreprocessResult {
    PreprocessModel model;
    Tensor features;
};

PreprocessResult fit_preprocess(const ExpressionMatrix& x, std::size_t n_hvg, std::size_t pca_k,
                                double scale = default_normalization_scale);

}  // namespace dpgen
