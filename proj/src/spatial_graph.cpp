#include "dpgen/spatial_graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dpgen/error.hpp"
#include "dpgen/rng.hpp"

namespace dpgen {
namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) {
        const double diff = a[c] - b[c];
        acc += diff * diff;
    }
    return acc;
}

void check_finite(const Tensor& coords, const char* op) {
    if (coords.rank() != 2) {
        throw ShapeError(std::string(op) + ": coordinates must be a matrix, got " + coords.shape_str());
    }
    if (!coords.all_finite()) {
        throw DomainError(std::string(op) + ": non-finite coordinate");
    }
}

}  // namespace

MaskGraph::MaskGraph(std::size_t n, std::vector<Edge> edges) : n_(n) {
    edges_.reserve(edges.size());
    for (auto [i, j] : edges) {
        if (i >= n || j >= n) {
            throw ConfigError("mask graph: edge (" + std::to_string(i) + ", " + std::to_string(j) +
                              ") out of range for " + std::to_string(n) + " spots");
        }
        if (i == j) {
            throw ConfigError("mask graph: self-loop at " + std::to_string(i));
        }
        edges_.emplace_back(std::min(i, j), std::max(i, j));
    }
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
}

MaskGraph MaskGraph::complete(std::size_t n) {
    std::vector<Edge> edges;
    edges.reserve(n * (n > 0 ? n - 1 : 0) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            edges.emplace_back(i, j);
        }
    }
    return MaskGraph(n, std::move(edges));
}

bool MaskGraph::contains(std::size_t i, std::size_t j) const {
    const Edge key{std::min(i, j), std::max(i, j)};
    return std::binary_search(edges_.begin(), edges_.end(), key);
}

Tensor MaskGraph::dense(std::span<const std::size_t> subset) const {
    const std::size_t b = subset.size();
    constexpr std::size_t absent = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> position(n_, absent);
    for (std::size_t p = 0; p < b; ++p) {
        if (subset[p] >= n_) {
            throw ConfigError("mask graph: subset index " + std::to_string(subset[p]) + " out of range");
        }
        position[subset[p]] = p;
    }
    Tensor out({b, b});
    for (auto [i, j] : edges_) {
        const std::size_t pi = position[i];
        const std::size_t pj = position[j];
        if (pi != absent && pj != absent) {
            out(pi, pj) = 1.0;
            out(pj, pi) = 1.0;
        }
    }
    return out;
}

Tensor MaskGraph::dense() const {
    std::vector<std::size_t> all(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        all[i] = i;
    }
    return dense(all);
}

Tensor pairwise_distances(const Tensor& coords) {
    check_finite(coords, "pairwise_distances");
    const std::size_t n = coords.rows();
    Tensor out({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = std::sqrt(squared_distance(coords.row(i), coords.row(j)));
            out(i, j) = d;
            out(j, i) = d;
        }
    }
    return out;
}

std::vector<std::vector<std::size_t>> knn_neighbors(const Tensor& coords, std::size_t k) {
    check_finite(coords, "knn");
    const std::size_t n = coords.rows();
    if (k < 1 || k >= n) {
        throw ConfigError("knn: k=" + std::to_string(k) + " must satisfy 1 <= k < n=" + std::to_string(n));
    }
    std::vector<std::vector<std::size_t>> result(n);
    std::vector<std::pair<double, std::size_t>> candidates;
    candidates.reserve(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        candidates.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                candidates.emplace_back(squared_distance(coords.row(i), coords.row(j)), j);
            }
        }
        // Pair ordering compares distance first, then index.
        std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                          candidates.end());
        result[i].reserve(k);
        for (std::size_t r = 0; r < k; ++r) {
            result[i].push_back(candidates[r].second);
        }
    }
    return result;
}

MaskGraph knn_mask(const Tensor& coords, std::size_t k) {
    const auto neighbors = knn_neighbors(coords, k);
    std::vector<MaskGraph::Edge> edges;
    edges.reserve(neighbors.size() * k);
    for (std::size_t i = 0; i < neighbors.size(); ++i) {
        for (std::size_t j : neighbors[i]) {
            edges.emplace_back(i, j);
        }
    }
    return MaskGraph(neighbors.size(), std::move(edges));
}

KMeansResult kmeans(const Tensor& coords, std::size_t k_clusters, std::uint64_t seed, std::size_t max_iterations,
                    double tolerance) {
    check_finite(coords, "kmeans");
    const std::size_t n = coords.rows();
    const std::size_t d = coords.cols();
    if (k_clusters < 1 || k_clusters > n) {
        throw ConfigError("kmeans: k_clusters=" + std::to_string(k_clusters) + " must satisfy 1 <= k <= n=" +
                          std::to_string(n));
    }

    Rng rng(seed);
    std::vector<std::size_t> chosen{rng.below(n)};
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    while (chosen.size() < k_clusters) {
        const auto last = coords.row(chosen.back());
        std::size_t farthest = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], squared_distance(coords.row(i), last));
            if (nearest[i] > best) {
                best = nearest[i];
                farthest = i;
            }
        }
        chosen.push_back(farthest);
    }

    KMeansResult result;
    result.centroids = coords.gather_rows(chosen);
    result.labels.assign(n, 0);
    Tensor& centroids = result.centroids;

    auto nearest_centroid = [&](std::size_t i) {
        std::size_t best_c = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k_clusters; ++c) {
            const double dist = squared_distance(coords.row(i), centroids.row(c));
            if (dist < best_d) {
                best_d = dist;
                best_c = c;
            }
        }
        return std::pair{best_c, best_d};
    };

    for (std::size_t iter = 0; iter < max_iterations; ++iter) {
        result.iterations = iter + 1;
        for (std::size_t i = 0; i < n; ++i) {
            result.labels[i] = nearest_centroid(i).first;
        }
        Tensor updated({k_clusters, d});
        std::vector<std::size_t> counts(k_clusters, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = result.labels[i];
            ++counts[c];
            for (std::size_t a = 0; a < d; ++a) {
                updated(c, a) += coords(i, a);
            }
        }
        for (std::size_t c = 0; c < k_clusters; ++c) {
            if (counts[c] == 0) {
                // Empty cluster: move it to the spot worst served by the current centroids.
                std::size_t farthest = 0;
                double best = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double dist = nearest_centroid(i).second;
                    if (dist > best) {
                        best = dist;
                        farthest = i;
                    }
                }
                for (std::size_t a = 0; a < d; ++a) {
                    updated(c, a) = coords(farthest, a);
                }
                continue;
            }
            for (std::size_t a = 0; a < d; ++a) {
                updated(c, a) /= static_cast<double>(counts[c]);
            }
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < k_clusters; ++c) {
            shift = std::max(shift, std::sqrt(squared_distance(updated.row(c), centroids.row(c))));
        }
        centroids = std::move(updated);
        if (shift < tolerance) {
            break;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        result.labels[i] = nearest_centroid(i).first;
    }
    return result;
}

MaskGraph kmeans_mask(const Tensor& coords, std::size_t k_clusters, std::uint64_t seed) {
    const auto clusters = kmeans(coords, k_clusters, seed);
    const std::size_t n = clusters.labels.size();
    std::vector<MaskGraph::Edge> edges;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (clusters.labels[i] == clusters.labels[j]) {
                edges.emplace_back(i, j);
            }
        }
    }
    return MaskGraph(n, std::move(edges));
}

}  // namespace dpgen
