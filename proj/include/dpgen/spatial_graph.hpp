#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "dpgen/tensor.hpp"

namespace dpgen {

// Undirected edge set over n spots. Edges are stored once as (i, j) with
// i < j, sorted; there are no self-loops.
class MaskGraph {
public:
    using Edge = std::pair<std::size_t, std::size_t>;

    MaskGraph() = default;
    // Edges may be given in either orientation and with duplicates.
    MaskGraph(std::size_t n, std::vector<Edge> edges);

    static MaskGraph complete(std::size_t n);

    std::size_t size() const { return n_; }
    const std::vector<Edge>& edges() const { return edges_; }
    bool contains(std::size_t i, std::size_t j) const;

    // Dense 0/1 matrix over the selected spots, in the given order, with
    // both orientations of every edge set.
    Tensor dense(std::span<const std::size_t> subset) const;
    Tensor dense() const;

    friend bool operator==(const MaskGraph&, const MaskGraph&) = default;

private:
    std::size_t n_ = 0;
    std::vector<Edge> edges_;
};

// n x n Euclidean distances between the rows of an [n, d] coordinate matrix.
Tensor pairwise_distances(const Tensor& coords);

// For every spot, its k nearest other spots by Euclidean distance, ties
// broken by lower index. Directed: j in result[i] does not imply i in result[j].
std::vector<std::vector<std::size_t>> knn_neighbors(const Tensor& coords, std::size_t k);

// Symmetrized k-NN graph: an edge is kept if present in either direction.
MaskGraph knn_mask(const Tensor& coords, std::size_t k);

struct KMeansResult {
    std::vector<std::size_t> labels;
    Tensor centroids;
    std::size_t iterations = 0;
};

// Lloyd's algorithm with farthest-point seeding. The first centroid is the
// spot drawn from `seed`; each further centroid is the spot farthest from
// its nearest chosen centroid.
KMeansResult kmeans(const Tensor& coords, std::size_t k_clusters, std::uint64_t seed,
                    std::size_t max_iterations = 100, double tolerance = 1e-6);

// Edges between every pair of spots that share a k-means cluster.
MaskGraph kmeans_mask(const Tensor& coords, std::size_t k_clusters, std::uint64_t seed);

}  // namespace dpgen
