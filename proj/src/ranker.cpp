#include "dialcoord/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dialcoord/error.hpp"

namespace dialcoord {

namespace {

void fill_uniform(std::span<double> values, double bound, std::mt19937_64& rng) {
    for (auto& v : values) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        v = (2.0 * u - 1.0) * bound;
    }
}

double he_bound(std::size_t fan_in) { return std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(1, fan_in))); }

template <typename Model, typename View, typename Span>
std::vector<View> collect(Model& m) {
    std::vector<View> out;
    const auto& c = m.config;
    for (std::size_t i = 0; i < m.attention.size(); ++i) {
        out.push_back({"attention." + std::to_string(i + 1), {c.state_dim, c.state_dim}, Span(m.attention[i].data)});
    }
    out.push_back({"projection.weight", {m.projection.rows, m.projection.cols}, Span(m.projection.data)});
    out.push_back({"projection.bias", {m.projection_bias.size()}, Span(m.projection_bias)});
    out.push_back({"mlp.hidden.weight", {m.mlp_hidden.rows, m.mlp_hidden.cols}, Span(m.mlp_hidden.data)});
    out.push_back({"mlp.hidden.bias", {m.mlp_hidden_bias.size()}, Span(m.mlp_hidden_bias)});
    out.push_back({"mlp.out.weight", {m.mlp_out.rows, m.mlp_out.cols}, Span(m.mlp_out.data)});
    out.push_back({"mlp.out.bias", {m.mlp_out_bias.size()}, Span(m.mlp_out_bias)});
    if (c.scorer_hidden > 0) {
        out.push_back({"scorer.hidden.weight", {m.scorer_hidden.rows, m.scorer_hidden.cols}, Span(m.scorer_hidden.data)});
        out.push_back({"scorer.hidden.bias", {m.scorer_hidden_bias.size()}, Span(m.scorer_hidden_bias)});
    }
    out.push_back({"scorer.out.weight", {m.scorer_out.size()}, Span(m.scorer_out)});
    out.push_back({"scorer.out.bias", {1}, Span(&m.scorer_bias, 1)});
    return out;
}

}  // namespace

RankerModel RankerModel::zeros(const RankerConfig& c) {
    if (c.aspect_count == 0 || c.state_dim == 0 || c.projection_dim == 0) {
        throw Error("invalid_config", "ranker dimensions must be positive");
    }
    RankerModel m;
    m.config = c;
    m.attention.assign(c.aspect_count, Matrix(c.state_dim, c.state_dim));
    m.projection = Matrix(c.projection_dim, c.state_dim);
    m.projection_bias.assign(c.projection_dim, 0.0);
    m.mlp_hidden = Matrix(c.state_dim, c.progression_input());
    m.mlp_hidden_bias.assign(c.state_dim, 0.0);
    m.mlp_out = Matrix(c.state_dim, c.state_dim);
    m.mlp_out_bias.assign(c.state_dim, 0.0);
    if (c.scorer_hidden > 0) {
        m.scorer_hidden = Matrix(c.scorer_hidden, c.scorer_input());
        m.scorer_hidden_bias.assign(c.scorer_hidden, 0.0);
        m.scorer_out.assign(c.scorer_hidden, 0.0);
    } else {
        m.scorer_out.assign(c.scorer_input(), 0.0);
    }
    return m;
}

RankerModel RankerModel::initialize(const RankerConfig& c) {
    RankerModel m = zeros(c);
    std::mt19937_64 rng(c.seed ^ 0x5eed5eed5eedULL);
    for (auto& w : m.attention) {
        fill_uniform(w.data, 0.01, rng);
        for (std::size_t d = 0; d < c.state_dim; ++d) w(d, d) += 1.0;
    }
    fill_uniform(m.projection.data, he_bound(c.state_dim), rng);
    fill_uniform(m.mlp_hidden.data, he_bound(c.progression_input()), rng);
    fill_uniform(m.mlp_out.data, he_bound(c.state_dim), rng);
    if (c.scorer_hidden > 0) {
        fill_uniform(m.scorer_hidden.data, he_bound(c.scorer_input()), rng);
        fill_uniform(m.scorer_out, 1.0 / std::sqrt(static_cast<double>(c.scorer_hidden)), rng);
    } else {
        fill_uniform(m.scorer_out, 1.0 / std::sqrt(static_cast<double>(c.scorer_input())), rng);
    }
    return m;
}

std::vector<ParamView> RankerModel::parameters() { return collect<RankerModel, ParamView, std::span<double>>(*this); }

std::vector<ConstParamView> RankerModel::parameters() const {
    return collect<const RankerModel, ConstParamView, std::span<const double>>(*this);
}

bool RankerModel::all_finite() const {
    for (const auto& p : parameters()) {
        if (!dialcoord::all_finite(p.values)) return false;
    }
    return std::isfinite(scorer_bias);
}

// ---------------------------------------------------------------- forward / backward

namespace {

void check_features(const RankerModel& model, const ProgressionContext& progression, const TurnFeatures& f) {
    const auto& c = model.config;
    if (f.states.size() != c.aspect_count || progression.centroids.size() != c.aspect_count) {
        throw Error("signal_count_mismatch", "expected " + std::to_string(c.aspect_count) + " aspects, got " +
                                                 std::to_string(f.states.size()));
    }
    for (const auto& s : f.states) {
        if (s.size() != c.state_dim) throw Error("dimension_mismatch", "state embedding has wrong length");
    }
    for (const auto& x : f.contexts) {
        if (x.size() != c.state_dim) throw Error("dimension_mismatch", "context embedding has wrong length");
    }
}

Vec affine(const Matrix& w, const Vec& bias, std::span<const double> x) {
    Vec y = matvec(w, x);
    axpy(y, bias);
    return y;
}

double score_from_pre(const RankerModel& model, std::span<const double> scorer_input, Vec* pre, Vec* act) {
    if (model.config.scorer_hidden == 0) return dot(model.scorer_out, scorer_input) + model.scorer_bias;
    Vec z = affine(model.scorer_hidden, model.scorer_hidden_bias, scorer_input);
    Vec a = relu(z);
    const double s = dot(model.scorer_out, a) + model.scorer_bias;
    if (pre != nullptr) *pre = std::move(z);
    if (act != nullptr) *act = std::move(a);
    return s;
}

}  // namespace

ForwardCache forward_turn(const RankerModel& model, const ProgressionContext& progression,
                          const TurnFeatures& features, const ForwardOptions& options) {
    check_features(model, progression, features);
    const auto& c = model.config;
    ForwardCache cache;

    cache.progression_input.reserve(c.progression_input());
    if (options.use_progression) {
        for (std::size_t i = 0; i < c.aspect_count; ++i) {
            cache.attention.push_back(attend_centroids(features.states[i], progression.centroids[i], model.attention[i]));
            const auto& v = cache.attention.back().target;
            cache.progression_input.insert(cache.progression_input.end(), v.begin(), v.end());
            cache.progression_input.insert(cache.progression_input.end(), features.states[i].begin(),
                                           features.states[i].end());
        }
    } else {
        cache.progression_input.assign(c.progression_input(), 0.0);
    }
    cache.mlp_pre = affine(model.mlp_hidden, model.mlp_hidden_bias, cache.progression_input);
    cache.mlp_act = relu(cache.mlp_pre);
    cache.fused = affine(model.mlp_out, model.mlp_out_bias, cache.mlp_act);

    const std::size_t n = features.contexts.size();
    cache.projection_pre.resize(n);
    cache.candidate_repr.resize(n);
    cache.scorer_pre.resize(n);
    cache.scorer_act.resize(n);
    cache.scores.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        cache.projection_pre[k] = affine(model.projection, model.projection_bias, features.contexts[k]);
        cache.candidate_repr[k] = relu(cache.projection_pre[k]);
        const Vec input = concat(cache.fused, cache.candidate_repr[k]);
        cache.scores[k] = score_from_pre(model, input, &cache.scorer_pre[k], &cache.scorer_act[k]);
    }
    return cache;
}

void backward_turn(const RankerModel& model, const ProgressionContext& progression, const TurnFeatures& features,
                   const ForwardCache& cache, std::span<const double> grad_scores, RankerModel& grad,
                   const ForwardOptions& options) {
    const auto& c = model.config;
    const std::size_t n = features.contexts.size();
    Vec grad_fused(c.state_dim, 0.0);

    for (std::size_t k = 0; k < n; ++k) {
        const double g = grad_scores[k];
        if (g == 0.0) continue;
        const Vec input = concat(cache.fused, cache.candidate_repr[k]);
        Vec grad_input;
        grad.scorer_bias += g;
        if (c.scorer_hidden == 0) {
            axpy(grad.scorer_out, input, g);
            grad_input.assign(model.scorer_out.begin(), model.scorer_out.end());
            for (auto& v : grad_input) v *= g;
        } else {
            axpy(grad.scorer_out, cache.scorer_act[k], g);
            Vec grad_pre(c.scorer_hidden);
            for (std::size_t h = 0; h < c.scorer_hidden; ++h) {
                grad_pre[h] = cache.scorer_pre[k][h] > 0.0 ? g * model.scorer_out[h] : 0.0;
            }
            add_outer(grad.scorer_hidden, grad_pre, input);
            axpy(grad.scorer_hidden_bias, grad_pre);
            grad_input = matvec_transposed(model.scorer_hidden, grad_pre);
        }
        // split [p~ | b~]
        for (std::size_t d = 0; d < c.state_dim; ++d) grad_fused[d] += grad_input[d];
        Vec grad_proj(c.projection_dim);
        for (std::size_t d = 0; d < c.projection_dim; ++d) {
            grad_proj[d] = cache.projection_pre[k][d] > 0.0 ? grad_input[c.state_dim + d] : 0.0;
        }
        add_outer(grad.projection, grad_proj, features.contexts[k]);
        axpy(grad.projection_bias, grad_proj);
    }

    // MLP_PRG
    add_outer(grad.mlp_out, grad_fused, cache.mlp_act);
    axpy(grad.mlp_out_bias, grad_fused);
    Vec grad_act = matvec_transposed(model.mlp_out, grad_fused);
    for (std::size_t d = 0; d < grad_act.size(); ++d) {
        if (cache.mlp_pre[d] <= 0.0) grad_act[d] = 0.0;
    }
    add_outer(grad.mlp_hidden, grad_act, cache.progression_input);
    axpy(grad.mlp_hidden_bias, grad_act);
    if (!options.use_progression) return;

    // only the v block of each p_i depends on parameters
    const Vec grad_input = matvec_transposed(model.mlp_hidden, grad_act);
    for (std::size_t i = 0; i < c.aspect_count; ++i) {
        const auto offset = static_cast<std::ptrdiff_t>(i * 2 * c.state_dim);
        std::span<const double> grad_target(grad_input.data() + offset, c.state_dim);
        attend_centroids_backward(cache.attention[i], features.states[i], progression.centroids[i], grad_target,
                                  grad.attention[i]);
    }
}

// ---------------------------------------------------------------- inference ops

std::string candidate_context_text(const DialogueHistory& history, const TopicCandidate& candidate,
                                   const SpeakerLabels& labels) {
    if (trim(candidate.text).empty()) throw Error("empty_candidate", "candidate text is empty");
    return render_history(history, labels) + " [TOPIC] " + candidate.text;
}

Vec project_candidate(std::span<const double> context_embedding, const RankerModel& model) {
    if (context_embedding.size() != model.config.state_dim) {
        throw Error("dimension_mismatch", "context embedding has wrong length");
    }
    return relu(affine(model.projection, model.projection_bias, context_embedding));
}

Vec encode_candidate_context(const DialogueHistory& history, const TopicCandidate& candidate,
                             const RankerModel& model, Gateway& gateway, const SpeakerLabels& labels) {
    const auto x = gateway.embed_text(candidate_context_text(history, candidate, labels));
    return project_candidate(x.values, model);
}

Vec fuse_progression(const std::vector<ProgressionSignal>& signals, const RankerModel& model) {
    const auto& c = model.config;
    if (signals.size() != c.aspect_count) {
        throw Error("signal_count_mismatch", "model expects " + std::to_string(c.aspect_count) + " signals, got " +
                                                 std::to_string(signals.size()));
    }
    Vec input;
    input.reserve(c.progression_input());
    for (const auto& s : signals) {
        if (s.target.size() != c.state_dim || s.state.size() != c.state_dim) {
            throw Error("dimension_mismatch", "progression signal has wrong length");
        }
        input.insert(input.end(), s.target.begin(), s.target.end());
        input.insert(input.end(), s.state.begin(), s.state.end());
    }
    return affine(model.mlp_out, model.mlp_out_bias, relu(affine(model.mlp_hidden, model.mlp_hidden_bias, input)));
}

double score(std::span<const double> candidate_repr, std::span<const double> fused, const RankerModel& model) {
    if (fused.size() != model.config.state_dim || candidate_repr.size() != model.config.projection_dim) {
        throw Error("dimension_mismatch", "scorer input has wrong shape");
    }
    return score_from_pre(model, concat(fused, candidate_repr), nullptr, nullptr);
}

RankingResult rank_by_scores(std::vector<TopicCandidate> candidates, std::span<const double> scores, int top_k) {
    if (scores.size() != candidates.size()) throw Error("dimension_mismatch", "one score per candidate required");
    for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i].score = scores[i];
    std::stable_sort(candidates.begin(), candidates.end(), [](const TopicCandidate& a, const TopicCandidate& b) {
        if (*a.score != *b.score) return *a.score < *b.score;
        if (a.aspect_id != b.aspect_id) return a.aspect_id < b.aspect_id;
        return a.candidate_index < b.candidate_index;
    });
    for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i].rank = static_cast<int>(i) + 1;
    RankingResult out;
    const auto keep = std::min<std::size_t>(static_cast<std::size_t>(std::max(top_k, 0)), candidates.size());
    out.top.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep));
    out.all = std::move(candidates);
    return out;
}

RankingResult rank_candidates(const DialogueHistory& history, std::vector<TopicCandidate> candidates,
                              const std::vector<ProgressionSignal>& signals, const RankerModel& model, int top_k,
                              Gateway& gateway, const SpeakerLabels& labels) {
    if (candidates.empty()) throw Error("no_candidates", "nothing to rank");
    if (top_k < 1) throw Error("invalid_argument", "K must be >= 1");
    const Vec fused = fuse_progression(signals, model);
    Vec scores;
    scores.reserve(candidates.size());
    for (const auto& cand : candidates) {
        scores.push_back(score(encode_candidate_context(history, cand, model, gateway, labels), fused, model));
    }
    return rank_by_scores(std::move(candidates), scores, top_k);
}

}  // namespace dialcoord
