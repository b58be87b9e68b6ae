#pragma once

#include <string>
#include <vector>

#include "dialcoord/clustering.hpp"
#include "dialcoord/linalg.hpp"

namespace dialcoord {

// Intermediate values of the target-state attention for one aspect, kept for
// the backward pass.
struct AttentionTrace {
    Vec projected_state;     // W s
    Matrix projected_centroids;  // row j = W e_j
    Vec logits;              // h_j = (W s) . (W e_j)
    Vec weights;             // softmax(h)
    Vec mixture;             // sum_j alpha_j e_j (pre-ReLU)
    Vec target;              // ReLU(mixture)
};

// h = (W s).(W e_j), alpha = softmax(h), v = ReLU(sum alpha_j e_j).
// Throws "numeric_overflow" if any intermediate is non-finite and
// "dimension_mismatch" on shape errors.
AttentionTrace attend_centroids(std::span<const double> state, const Matrix& centroids, const Matrix& attention);

Vec estimate_target(std::span<const double> state, const Matrix& centroids, const Matrix& attention);

// Accumulates dL/dW given dL/dv into grad_attention.
void attend_centroids_backward(const AttentionTrace& trace, std::span<const double> state, const Matrix& centroids,
                               std::span<const double> grad_target, Matrix& grad_attention);

struct ProgressionSignal {
    int aspect_id = 0;
    Vec target;  // v, estimated target state
    Vec state;   // s, current state embedding

    // [v; s]
    Vec packed() const { return concat(target, state); }
};

ProgressionSignal progression_signal(int aspect_id, Vec target, Vec state);

struct TargetStateCorpus {
    int aspect_id = 0;
    Matrix embeddings;  // one row per processed dialogue
    std::vector<std::string> source_dialogue_ids;
    std::vector<std::string> skipped_dialogue_ids;
};

}  // namespace dialcoord
