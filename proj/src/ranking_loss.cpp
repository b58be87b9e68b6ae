#include "dialcoord/ranking_loss.hpp"

#include <cmath>

#include "dialcoord/error.hpp"

namespace dialcoord {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

namespace {

void check(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw Error("dimension_mismatch", "one label per score required");
}

}  // namespace

double triplet_loss(std::span<const double> scores, std::span<const int> labels, double margin, Vec* grad) {
    check(scores, labels);
    const std::size_t n = scores.size();
    if (grad != nullptr) grad->assign(n, 0.0);
    double loss = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            if (labels[a] >= labels[b]) continue;
            const double term = scores[a] - scores[b] + margin;
            if (term <= 0.0) continue;
            loss += term;
            if (grad != nullptr) {
                (*grad)[a] += 1.0;
                (*grad)[b] -= 1.0;
            }
        }
    }
    return loss;
}

Vec soft_rank(std::span<const double> scores, double temperature) {
    if (!(temperature > 0.0)) throw Error("invalid_argument", "soft-rank temperature must be positive");
    const std::size_t n = scores.size();
    Vec ranks(n, 1.0);
    for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t o = 0; o < n; ++o) {
            if (o != c) ranks[c] += sigmoid((scores[c] - scores[o]) / temperature);
        }
    }
    return ranks;
}

double pointwise_loss(std::span<const double> scores, std::span<const int> labels, double temperature, Vec* grad) {
    check(scores, labels);
    const std::size_t n = scores.size();
    if (grad != nullptr) grad->assign(n, 0.0);
    if (n == 0) return 0.0;
    const Vec ranks = soft_rank(scores, temperature);
    const double inv_n = 1.0 / static_cast<double>(n);
    double loss = 0.0;
    Vec d_rank(n);
    for (std::size_t c = 0; c < n; ++c) {
        const double diff = static_cast<double>(labels[c]) - ranks[c];
        loss += diff * diff;
        d_rank[c] = -2.0 * diff * inv_n;
    }
    if (grad != nullptr) {
        for (std::size_t c = 0; c < n; ++c) {
            for (std::size_t o = 0; o < n; ++o) {
                if (o == c) continue;
                const double s = sigmoid((scores[c] - scores[o]) / temperature);
                const double ds = s * (1.0 - s) / temperature;
                (*grad)[c] += d_rank[c] * ds;
                (*grad)[o] -= d_rank[c] * ds;
            }
        }
    }
    return loss * inv_n;
}

double combined_loss(std::span<const double> scores, std::span<const int> labels, const LossConfig& config,
                     Vec* grad) {
    if (config.mix < 0.0 || config.mix > 1.0) throw Error("invalid_argument", "loss mix must lie in [0, 1]");
    Vec g_t;
    Vec g_p;
    const double lt = triplet_loss(scores, labels, config.margin, grad != nullptr ? &g_t : nullptr);
    const double lp = pointwise_loss(scores, labels, config.temperature, grad != nullptr ? &g_p : nullptr);
    if (grad != nullptr) {
        grad->assign(scores.size(), 0.0);
        for (std::size_t i = 0; i < scores.size(); ++i) (*grad)[i] = config.mix * g_t[i] + (1.0 - config.mix) * g_p[i];
    }
    return config.mix * lt + (1.0 - config.mix) * lp;
}

}  // namespace dialcoord
