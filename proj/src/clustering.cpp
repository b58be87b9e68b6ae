#include "dialcoord/clustering.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

#include "dialcoord/error.hpp"
#include "dialcoord/hash.hpp"

namespace dialcoord {

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t nearest(const Matrix& centroids, std::span<const double> point, double* best_d2 = nullptr) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.rows; ++c) {
        const double d = squared_distance(centroids.row(c), point);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    if (best_d2 != nullptr) *best_d2 = best_d;
    return best;
}

Matrix kmeanspp_init(const Matrix& points, std::size_t k, std::mt19937_64& rng) {
    const std::size_t n = points.rows;
    Matrix centroids(k, points.cols);
    std::size_t first = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
    first = std::min(first, n - 1);
    std::copy_n(points.row(first).begin(), points.cols, centroids.row(0).begin());

    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points.row(i), centroids.row(0));
    for (std::size_t c = 1; c < k; ++c) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t chosen = n - 1;
        if (total > 0.0) {
            double target = uniform01(rng) * total;
            for (std::size_t i = 0; i < n; ++i) {
                if (d2[i] <= 0.0) continue;
                target -= d2[i];
                if (target < 0.0) {
                    chosen = i;
                    break;
                }
            }
            // guard against rounding leaving target >= 0
            if (d2[chosen] <= 0.0) {
                chosen = static_cast<std::size_t>(std::max_element(d2.begin(), d2.end()) - d2.begin());
            }
        }
        std::copy_n(points.row(chosen).begin(), points.cols, centroids.row(c).begin());
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(points.row(i), centroids.row(c)));
    }
    return centroids;
}

void update_centroids(const Matrix& points, const std::vector<int>& labels, Matrix& centroids,
                      std::vector<std::size_t>& counts) {
    std::fill(centroids.data.begin(), centroids.data.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < points.rows; ++i) {
        auto c = static_cast<std::size_t>(labels[i]);
        ++counts[c];
        auto row = centroids.row(c);
        auto p = points.row(i);
        for (std::size_t d = 0; d < points.cols; ++d) row[d] += p[d];
    }
    for (std::size_t c = 0; c < centroids.rows; ++c) {
        if (counts[c] == 0) continue;
        for (auto& v : centroids.row(c)) v /= static_cast<double>(counts[c]);
    }
}

KMeansResult lloyd(const Matrix& points, std::size_t k, std::mt19937_64& rng, int max_iterations) {
    const std::size_t n = points.rows;
    KMeansResult r;
    r.centroids = kmeanspp_init(points, k, rng);
    r.labels.assign(n, -1);
    std::vector<std::size_t> counts(k, 0);

    for (int iter = 0; iter < max_iterations; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            const int c = static_cast<int>(nearest(r.centroids, points.row(i)));
            if (c != r.labels[i]) {
                r.labels[i] = c;
                changed = true;
            }
        }
        if (!changed) break;
        r.iterations = iter + 1;
        update_centroids(points, r.labels, r.centroids, counts);

        // Re-seed empty clusters with the point farthest from its centroid,
        // taken from clusters that can spare a member.
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t far = n;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                const auto own = static_cast<std::size_t>(r.labels[i]);
                if (counts[own] < 2) continue;
                const double d = squared_distance(points.row(i), r.centroids.row(own));
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            if (far == n) continue;
            --counts[static_cast<std::size_t>(r.labels[far])];
            r.labels[far] = static_cast<int>(c);
            counts[c] = 1;
            update_centroids(points, r.labels, r.centroids, counts);
        }
        r.inertia_history.push_back(inertia(points, r.labels, r.centroids));
    }
    r.inertia = inertia(points, r.labels, r.centroids);
    return r;
}

// Hartigan single-point moves: relocate a point whenever that lowers the
// within-cluster sum of squares once both centroids shift. Escapes Lloyd
// fixed points that are not locally optimal under single moves.
void hartigan_refine(const Matrix& points, KMeansResult& r, int max_passes) {
    const std::size_t n = points.rows;
    const std::size_t k = r.centroids.rows;
    std::vector<std::size_t> counts(k, 0);
    update_centroids(points, r.labels, r.centroids, counts);
    for (int pass = 0; pass < max_passes; ++pass) {
        bool moved = false;
        for (std::size_t i = 0; i < n; ++i) {
            const auto from = static_cast<std::size_t>(r.labels[i]);
            if (counts[from] < 2) continue;
            const double nf = static_cast<double>(counts[from]);
            const double removal = nf / (nf - 1.0) * squared_distance(points.row(i), r.centroids.row(from));
            std::size_t to = from;
            double best_gain = 0.0;
            for (std::size_t c = 0; c < k; ++c) {
                if (c == from) continue;
                const double nc = static_cast<double>(counts[c]);
                const double addition = nc / (nc + 1.0) * squared_distance(points.row(i), r.centroids.row(c));
                const double gain = removal - addition;
                if (gain > best_gain + 1e-12 * (removal + addition)) {
                    best_gain = gain;
                    to = c;
                }
            }
            if (to == from) continue;
            r.labels[i] = static_cast<int>(to);
            update_centroids(points, r.labels, r.centroids, counts);
            moved = true;
        }
        if (!moved) break;
        r.inertia_history.push_back(inertia(points, r.labels, r.centroids));
    }
    r.inertia = inertia(points, r.labels, r.centroids);
}

}  // namespace

double inertia(const Matrix& points, std::span<const int> labels, const Matrix& centroids) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.rows; ++i) {
        total += squared_distance(points.row(i), centroids.row(static_cast<std::size_t>(labels[i])));
    }
    return total;
}

std::size_t count_distinct_rows(const Matrix& points) {
    std::vector<std::size_t> idx(points.rows);
    std::iota(idx.begin(), idx.end(), 0);
    auto less = [&](std::size_t a, std::size_t b) {
        auto ra = points.row(a);
        auto rb = points.row(b);
        return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
    };
    std::sort(idx.begin(), idx.end(), less);
    std::size_t distinct = idx.empty() ? 0 : 1;
    for (std::size_t i = 1; i < idx.size(); ++i) {
        if (less(idx[i - 1], idx[i])) ++distinct;
    }
    return distinct;
}

KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed, const KMeansOptions& options) {
    if (k < 1) throw Error("degenerate_k", "k must be positive");
    const std::size_t distinct = count_distinct_rows(points);
    if (static_cast<std::size_t>(k) > distinct) {
        throw Error("degenerate_k",
                    "k=" + std::to_string(k) + " exceeds " + std::to_string(distinct) + " distinct points");
    }
    std::uint64_t state = seed;
    KMeansResult best;
    bool have_best = false;
    for (int run = 0; run < std::max(1, options.n_init); ++run) {
        std::mt19937_64 rng(splitmix64(state));
        auto r = lloyd(points, static_cast<std::size_t>(k), rng, options.max_iterations);
        if (options.hartigan_refinement) hartigan_refine(points, r, options.max_iterations);
        if (!have_best || r.inertia < best.inertia) {
            best = std::move(r);
            have_best = true;
        }
    }
    return best;
}

double silhouette(const Matrix& points, std::span<const int> labels) {
    const std::size_t n = points.rows;
    std::vector<int> ids(labels.begin(), labels.end());
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (ids.size() < 2) throw Error("undefined_silhouette", "silhouette needs at least two clusters");

    auto cluster_of = [&](std::size_t i) {
        return static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), labels[i]) - ids.begin());
    };
    std::vector<std::size_t> member(n);
    std::vector<std::size_t> sizes(ids.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
        member[i] = cluster_of(i);
        ++sizes[member[i]];
    }

    double total = 0.0;
    std::vector<double> dist_sum(ids.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (sizes[member[i]] == 1) continue;  // contributes 0
        std::fill(dist_sum.begin(), dist_sum.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            dist_sum[member[j]] += euclidean_distance(points.row(i), points.row(j));
        }
        const double a = dist_sum[member[i]] / static_cast<double>(sizes[member[i]] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < ids.size(); ++c) {
            if (c == member[i]) continue;
            b = std::min(b, dist_sum[c] / static_cast<double>(sizes[c]));
        }
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(n);
}

CentroidSet select_k(const Matrix& points, int k_min, int k_max, std::uint64_t seed, const KMeansOptions& options) {
    const int n = static_cast<int>(points.rows);
    const int distinct = static_cast<int>(count_distinct_rows(points));
    if (n < k_min + 1) {
        k_min = 2;
        k_max = n - 1;
    }
    k_max = std::min({k_max, n - 1, distinct});
    k_min = std::max(k_min, 2);
    if (k_min > k_max) {
        throw Error("degenerate_k", "no valid k in range for " + std::to_string(n) + " points (" +
                                        std::to_string(distinct) + " distinct)");
    }

    CentroidSet best;
    bool have_best = false;
    for (int k = k_min; k <= k_max; ++k) {
        auto r = kmeans(points, k, seed, options);
        const double s = silhouette(points, r.labels);
        if (!have_best || s > best.silhouette) {
            best.k = k;
            best.centroids = std::move(r.centroids);
            best.silhouette = s;
            best.seed = seed;
            have_best = true;
        }
    }
    return best;
}

}  // namespace dialcoord
