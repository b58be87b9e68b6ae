#include "dialcoord/progression.hpp"

#include "dialcoord/error.hpp"

namespace dialcoord {

AttentionTrace attend_centroids(std::span<const double> state, const Matrix& centroids, const Matrix& attention) {
    const std::size_t dim = state.size();
    if (attention.rows != dim || attention.cols != dim || centroids.cols != dim) {
        throw Error("dimension_mismatch", "state, centroid and attention shapes disagree");
    }
    if (centroids.rows == 0) throw Error("dimension_mismatch", "no centroids");

    AttentionTrace t;
    t.projected_state = matvec(attention, state);
    t.projected_centroids = Matrix(centroids.rows, dim);
    t.logits.resize(centroids.rows);
    for (std::size_t j = 0; j < centroids.rows; ++j) {
        Vec z = matvec(attention, centroids.row(j));
        std::copy(z.begin(), z.end(), t.projected_centroids.row(j).begin());
        t.logits[j] = dot(t.projected_state, z);
    }
    if (!all_finite(t.logits)) throw Error("numeric_overflow", "attention logits are not finite");
    t.weights = softmax(t.logits);
    t.mixture.assign(dim, 0.0);
    for (std::size_t j = 0; j < centroids.rows; ++j) axpy(t.mixture, centroids.row(j), t.weights[j]);
    t.target = relu(t.mixture);
    if (!all_finite(t.weights) || !all_finite(t.target)) {
        throw Error("numeric_overflow", "attention output is not finite");
    }
    return t;
}

Vec estimate_target(std::span<const double> state, const Matrix& centroids, const Matrix& attention) {
    return attend_centroids(state, centroids, attention).target;
}

void attend_centroids_backward(const AttentionTrace& t, std::span<const double> state, const Matrix& centroids,
                               std::span<const double> grad_target, Matrix& grad_attention) {
    const std::size_t k = centroids.rows;
    const std::size_t dim = state.size();

    // through ReLU
    Vec grad_mixture(dim);
    for (std::size_t d = 0; d < dim; ++d) grad_mixture[d] = t.mixture[d] > 0.0 ? grad_target[d] : 0.0;

    // through the convex combination and softmax
    Vec grad_weights(k);
    for (std::size_t j = 0; j < k; ++j) grad_weights[j] = dot(grad_mixture, centroids.row(j));
    const double expected = dot(t.weights, grad_weights);
    Vec grad_logits(k);
    for (std::size_t j = 0; j < k; ++j) grad_logits[j] = t.weights[j] * (grad_weights[j] - expected);

    // h_j = u . z_j with u = W s, z_j = W e_j:
    // dW = (sum_j g_j z_j) s^T + u (sum_j g_j e_j)^T
    Vec sum_z(dim, 0.0);
    Vec sum_e(dim, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        if (grad_logits[j] == 0.0) continue;
        axpy(sum_z, t.projected_centroids.row(j), grad_logits[j]);
        axpy(sum_e, centroids.row(j), grad_logits[j]);
    }
    add_outer(grad_attention, sum_z, state);
    add_outer(grad_attention, t.projected_state, sum_e);
}

ProgressionSignal progression_signal(int aspect_id, Vec target, Vec state) {
    if (target.size() != state.size()) {
        throw Error("dimension_mismatch", "target and state embeddings differ in length");
    }
    return ProgressionSignal{aspect_id, std::move(target), std::move(state)};
}

}  // namespace dialcoord
