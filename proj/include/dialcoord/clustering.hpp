#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dialcoord/linalg.hpp"

namespace dialcoord {

struct KMeansOptions {
    int max_iterations = 300;
    // Independent k-means++ restarts; the lowest-inertia run wins.
    int n_init = 10;
    // Follow Lloyd's iterations with Hartigan single-point moves.
    bool hartigan_refinement = true;
};

struct KMeansResult {
    Matrix centroids;              // k x dim
    std::vector<int> labels;       // one per point, in [0, k)
    double inertia = 0.0;          // sum of squared distances to assigned centroid
    std::vector<double> inertia_history;  // per Lloyd iteration of the winning run
    int iterations = 0;
};

// Lloyd's algorithm from seeded k-means++ initialization, then Hartigan
// refinement. Empty clusters are re-seeded with the point farthest from its
// centroid.
// Throws "degenerate_k" when k < 1 or k exceeds the number of distinct points.
KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed, const KMeansOptions& options = {});

double inertia(const Matrix& points, std::span<const int> labels, const Matrix& centroids);

std::size_t count_distinct_rows(const Matrix& points);

// Mean silhouette with Euclidean distance; points in singleton clusters score 0.
// Throws "undefined_silhouette" with fewer than two clusters.
double silhouette(const Matrix& points, std::span<const int> labels);

struct CentroidSet {
    int aspect_id = 0;
    int k = 0;
    Matrix centroids;  // k x n_d
    double silhouette = 0.0;
    std::uint64_t seed = 0;
};

// Runs kmeans for every k in [k_min, k_max] and keeps the best silhouette
// (ties go to the smaller k). With too few points the range shrinks to
// [2, min(N - 1, distinct points)].
CentroidSet select_k(const Matrix& points, int k_min, int k_max, std::uint64_t seed,
                     const KMeansOptions& options = {});

}  // namespace dialcoord
