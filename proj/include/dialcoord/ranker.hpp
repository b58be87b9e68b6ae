#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dialcoord/core.hpp"
#include "dialcoord/gateway.hpp"
#include "dialcoord/linalg.hpp"
#include "dialcoord/progression.hpp"

namespace dialcoord {

struct RankerConfig {
    std::size_t aspect_count = 3;      // n_T
    std::size_t state_dim = kDefaultEmbeddingDim;  // n_d
    std::size_t projection_dim = 256;  // d_b
    // Hidden width of the scoring feedforward block. 0 selects a plain affine
    // scorer, under which the fused progression vector only shifts every
    // candidate of a turn by the same amount.
    std::size_t scorer_hidden = 64;
    std::uint64_t seed = 0;

    std::size_t progression_input() const { return aspect_count * 2 * state_dim; }
    std::size_t scorer_input() const { return state_dim + projection_dim; }

    bool operator==(const RankerConfig&) const = default;
};

struct ParamView {
    std::string name;
    std::vector<std::size_t> shape;
    std::span<double> values;
};

struct ConstParamView {
    std::string name;
    std::vector<std::size_t> shape;
    std::span<const double> values;
};

// Trainable parameters of the candidate scorer f(H, C).
struct RankerModel {
    RankerConfig config;
    std::vector<Matrix> attention;  // W_i, one n_d x n_d per aspect
    Matrix projection;              // d_b x n_d
    Vec projection_bias;            // d_b
    Matrix mlp_hidden;              // n_d x (n_T * 2 * n_d)
    Vec mlp_hidden_bias;
    Matrix mlp_out;                 // n_d x n_d
    Vec mlp_out_bias;
    Matrix scorer_hidden;           // d_h x (n_d + d_b); empty when d_h == 0
    Vec scorer_hidden_bias;
    Vec scorer_out;                 // d_h (or n_d + d_b when affine)
    double scorer_bias = 0.0;

    static RankerModel zeros(const RankerConfig& config);
    // He-uniform layers, attention matrices near identity; deterministic in config.seed.
    static RankerModel initialize(const RankerConfig& config);

    std::vector<ParamView> parameters();
    std::vector<ConstParamView> parameters() const;

    bool all_finite() const;
    bool operator==(const RankerModel&) const = default;
};

// Per-aspect centroid matrices, indexed by aspect_id - 1.
struct ProgressionContext {
    std::vector<Matrix> centroids;
};

// Embeddings a turn is scored from.
struct TurnFeatures {
    std::vector<Vec> states;    // s_i per aspect, ordered by aspect id
    std::vector<Vec> contexts;  // embedding of history + candidate, one per candidate
};

struct ForwardCache {
    std::vector<AttentionTrace> attention;
    Vec progression_input;  // [p_1; ...; p_nT]
    Vec mlp_pre;
    Vec mlp_act;
    Vec fused;              // p~
    std::vector<Vec> projection_pre;
    std::vector<Vec> candidate_repr;  // b~
    std::vector<Vec> scorer_pre;
    std::vector<Vec> scorer_act;
    Vec scores;
};

struct ForwardOptions {
    // Replace every progression signal by zeros (ablation).
    bool use_progression = true;
};

ForwardCache forward_turn(const RankerModel& model, const ProgressionContext& progression,
                          const TurnFeatures& features, const ForwardOptions& options = {});

// Accumulates parameter gradients of sum_c grad_scores[c] * f_c into grad.
void backward_turn(const RankerModel& model, const ProgressionContext& progression, const TurnFeatures& features,
                   const ForwardCache& cache, std::span<const double> grad_scores, RankerModel& grad,
                   const ForwardOptions& options = {});

// Text that gets embedded for a candidate: rendered history, " [TOPIC] ", candidate.
std::string candidate_context_text(const DialogueHistory& history, const TopicCandidate& candidate,
                                   const SpeakerLabels& labels);

// b~ = ReLU(P x + bias) for an already embedded context x.
Vec project_candidate(std::span<const double> context_embedding, const RankerModel& model);

Vec encode_candidate_context(const DialogueHistory& history, const TopicCandidate& candidate,
                             const RankerModel& model, Gateway& gateway, const SpeakerLabels& labels);

// p~ = MLP_PRG([p_1; ...; p_nT]). Signals must be ordered by aspect id.
Vec fuse_progression(const std::vector<ProgressionSignal>& signals, const RankerModel& model);

// FF(p~ | b~). Lower is better.
double score(std::span<const double> candidate_repr, std::span<const double> fused, const RankerModel& model);

struct RankingResult {
    std::vector<TopicCandidate> top;  // first min(K, N) by rank
    std::vector<TopicCandidate> all;  // every candidate with score and rank filled, in rank order
};

// Ascending score, ties by (aspect_id, candidate_index).
RankingResult rank_by_scores(std::vector<TopicCandidate> candidates, std::span<const double> scores, int top_k);

RankingResult rank_candidates(const DialogueHistory& history, std::vector<TopicCandidate> candidates,
                              const std::vector<ProgressionSignal>& signals, const RankerModel& model, int top_k,
                              Gateway& gateway, const SpeakerLabels& labels);

}  // namespace dialcoord
