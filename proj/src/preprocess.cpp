#include "dpgen/preprocess.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "dpgen/error.hpp"

namespace dpgen {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMatrix> as_eigen(const Tensor& t) {
    return {t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

}  // namespace

void ExpressionMatrix::validate() const {
    if (values.rank() != 2 || values.rows() != spot_ids.size() || values.cols() != gene_ids.size()) {
        throw ShapeError("expression matrix: values " + values.shape_str() + " vs " +
                         std::to_string(spot_ids.size()) + " spot ids and " + std::to_string(gene_ids.size()) +
                         " gene ids");
    }
}

ExpressionMatrix ExpressionMatrix::select_genes(const std::vector<std::size_t>& genes) const {
    ExpressionMatrix out;
    out.spot_ids = spot_ids;
    out.values = Tensor({spots(), genes.size()});
    for (std::size_t j = 0; j < genes.size(); ++j) {
        out.gene_ids.push_back(gene_ids.at(genes[j]));
        for (std::size_t i = 0; i < spots(); ++i) {
            out.values(i, j) = values(i, genes[j]);
        }
    }
    return out;
}

ExpressionMatrix ExpressionMatrix::select_spots(const std::vector<std::size_t>& spots) const {
    ExpressionMatrix out;
    out.gene_ids = gene_ids;
    out.values = values.gather_rows(spots);
    for (std::size_t i : spots) {
        out.spot_ids.push_back(spot_ids.at(i));
    }
    return out;
}

ExpressionMatrix log_normalize(const ExpressionMatrix& x, double scale) {
    x.validate();
    if (!(scale > 0.0)) {
        throw ConfigError("log_normalize: scale must be positive");
    }
    ExpressionMatrix out = x;
    for (std::size_t i = 0; i < x.spots(); ++i) {
        const auto row = x.values.row(i);
        const double library = std::accumulate(row.begin(), row.end(), 0.0);
        if (!(library > 0.0)) {
            throw DomainError("log_normalize: spot '" + x.spot_ids[i] + "' has zero library size");
        }
        auto dst = out.values.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) {
            dst[j] = std::log1p(scale * row[j] / library);
        }
    }
    return out;
}

std::vector<double> column_variances(const Tensor& x) {
    const std::size_t n = x.rows();
    const std::size_t g = x.cols();
    std::vector<double> var(g, 0.0);
    if (n < 2) {
        return var;
    }
    for (std::size_t j = 0; j < g; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mean += x(i, j);
        }
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = x(i, j) - mean;
            ss += d * d;
        }
        var[j] = ss / static_cast<double>(n - 1);
    }
    return var;
}

std::vector<std::size_t> top_variance_indices(const std::vector<double>& variances, std::size_t n) {
    if (n == 0) {
        throw ConfigError("select_hvg: gene count must be positive");
    }
    if (n > variances.size()) {
        throw ConfigError("select_hvg: requested " + std::to_string(n) + " genes but only " +
                          std::to_string(variances.size()) + " available");
    }
    std::vector<std::size_t> order(variances.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return variances[a] > variances[b]; });
    order.resize(n);
    std::sort(order.begin(), order.end());
    return order;
}

std::vector<std::size_t> select_hvg(const ExpressionMatrix& x, std::size_t n) {
    x.validate();
    return top_variance_indices(column_variances(x.values), n);
}

Tensor PcaModel::transform(const Tensor& x) const {
    if (x.rank() != 2 || x.cols() != input_dim()) {
        throw ShapeError("pca transform: expected " + std::to_string(input_dim()) + " columns, got " +
                         x.shape_str());
    }
    const std::size_t n = x.rows();
    Tensor scores({n, k()});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < k(); ++c) {
            double acc = 0.0;
            for (std::size_t j = 0; j < mean.size(); ++j) {
                acc += (x(i, j) - mean[j]) * components(c, j);
            }
            scores(i, c) = acc;
        }
    }
    return scores;
}

Tensor PcaModel::inverse_transform(const Tensor& scores) const {
    if (scores.rank() != 2 || scores.cols() != k()) {
        throw ShapeError("pca inverse_transform: expected " + std::to_string(k()) + " columns, got " +
                         scores.shape_str());
    }
    const std::size_t n = scores.rows();
    Tensor out({n, input_dim()});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < input_dim(); ++j) {
            double acc = mean[j];
            for (std::size_t c = 0; c < k(); ++c) {
                acc += scores(i, c) * components(c, j);
            }
            out(i, j) = acc;
        }
    }
    return out;
}

PcaResult pca_fit_transform(const Tensor& x, std::size_t k) {
    if (x.rank() != 2) {
        throw ShapeError("pca: expected a matrix, got " + x.shape_str());
    }
    const std::size_t n = x.rows();
    const std::size_t g = x.cols();
    if (k == 0 || k > std::min(n, g)) {
        throw ConfigError("pca: k=" + std::to_string(k) + " must be in [1, min(spots, genes)=" +
                          std::to_string(std::min(n, g)) + "]");
    }
    if (!x.all_finite()) {
        throw DomainError("pca: non-finite input");
    }

    PcaModel model;
    const auto data = as_eigen(x);
    const Eigen::RowVectorXd mean = data.colwise().mean();
    const RowMatrix centered = data.rowwise() - mean;
    model.mean.assign(mean.data(), mean.data() + g);

    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    const Eigen::VectorXd& singular = svd.singularValues();
    const Eigen::MatrixXd& v = svd.matrixV();

    const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
    const double rank_tol = singular.size() > 0 ? singular(0) * 1e-10 * static_cast<double>(std::max(n, g)) : 0.0;
    model.components = Tensor({k, g});
    model.explained_variance.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        const double s = singular(static_cast<Eigen::Index>(c));
        if (s <= rank_tol) {
            model.rank_deficient = true;
            model.explained_variance[c] = 0.0;
        } else {
            model.explained_variance[c] = s * s / denom;
        }
        // Sign convention: largest |entry| (first on ties) is nonnegative.
        std::size_t arg = 0;
        for (std::size_t j = 1; j < g; ++j) {
            if (std::abs(v(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c))) >
                std::abs(v(static_cast<Eigen::Index>(arg), static_cast<Eigen::Index>(c)))) {
                arg = j;
            }
        }
        const double sign = v(static_cast<Eigen::Index>(arg), static_cast<Eigen::Index>(c)) < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < g; ++j) {
            model.components(c, j) = sign * v(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c));
        }
    }

    PcaResult result{std::move(model), Tensor()};
    result.scores = result.model.transform(x);
    return result;
}

Tensor PreprocessModel::transform(const ExpressionMatrix& x) const {
    x.validate();
    std::unordered_map<std::string, std::size_t> column;
    for (std::size_t j = 0; j < x.genes(); ++j) {
        column.emplace(x.gene_ids[j], j);
    }
    // Library size is taken over all genes shared with the fitted input.
    std::vector<std::size_t> shared;
    shared.reserve(gene_ids.size());
    for (const auto& id : gene_ids) {
        const auto it = column.find(id);
        if (it == column.end()) {
            throw ConfigError("preprocess: gene '" + id + "' missing from input");
        }
        shared.push_back(it->second);
    }
    const ExpressionMatrix normalized = log_normalize(x.select_genes(shared), scale);
    return pca.transform(normalized.select_genes(hvg_indices).values);
}

PreprocessResult fit_preprocess(const ExpressionMatrix& x, std::size_t n_hvg, std::size_t pca_k, double scale) {
    const ExpressionMatrix normalized = log_normalize(x, scale);
    PreprocessResult result;
    result.model.scale = scale;
    result.model.gene_ids = x.gene_ids;
    result.model.hvg_indices = select_hvg(normalized, n_hvg);
    auto pca = pca_fit_transform(normalized.select_genes(result.model.hvg_indices).values, pca_k);
    result.model.pca = std::move(pca.model);
    result.features = std::move(pca.scores);
    return result;
}

}  // namespace dpgen
