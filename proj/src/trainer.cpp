#include "dialcoord/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dialcoord/metrics.hpp"

namespace dialcoord {

AdamW::AdamW(const RankerModel& shape_of, const TrainConfig& config)
    : m_(RankerModel::zeros(shape_of.config)), v_(RankerModel::zeros(shape_of.config)), config_(config) {}

void AdamW::step(RankerModel& model, RankerModel& grad, double learning_rate) {
    ++t_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    auto params = model.parameters();
    auto grads = grad.parameters();
    auto ms = m_.parameters();
    auto vs = v_.parameters();
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto theta = params[p].values;
        auto g = grads[p].values;
        auto m = ms[p].values;
        auto v = vs[p].values;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            theta[i] -= learning_rate * (m_hat / (std::sqrt(v_hat) + config_.epsilon) + config_.weight_decay * theta[i]);
        }
    }
}

double turn_loss_and_grad(const RankerModel& model, const ProgressionContext& progression, const TrainingTurn& turn,
                          const LossConfig& loss, RankerModel* grad, double grad_scale, bool use_progression) {
    const ForwardOptions fo{use_progression};
    const auto cache = forward_turn(model, progression, turn.features, fo);
    Vec grad_scores;
    const double value = combined_loss(cache.scores, turn.labels, loss, grad != nullptr ? &grad_scores : nullptr);
    if (grad != nullptr) {
        for (auto& g : grad_scores) g *= grad_scale;
        backward_turn(model, progression, turn.features, cache, grad_scores, *grad, fo);
    }
    return value;
}

double validation_precision(const RankerModel& model, const ProgressionContext& progression,
                            const std::vector<TrainingTurn>& turns, int n, bool use_progression) {
    if (turns.empty()) return 0.0;
    double total = 0.0;
    for (const auto& turn : turns) {
        const auto cache = forward_turn(model, progression, turn.features, ForwardOptions{use_progression});
        std::vector<std::size_t> order(cache.scores.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return cache.scores[a] < cache.scores[b]; });
        std::vector<bool> ranked_relevance;
        ranked_relevance.reserve(order.size());
        for (auto i : order) ranked_relevance.push_back(turn.relevant[i]);
        total += precision_at_n(ranked_relevance, n);
    }
    return total / static_cast<double>(turns.size());
}

TrainResult train_ranker(const std::vector<TrainingTurn>& train, const std::vector<TrainingTurn>& validation,
                         const ProgressionContext& progression, RankerModel initial, const TrainConfig& config,
                         const EpochCallback& on_epoch) {
    if (train.empty()) throw Error("empty_dataset", "no training turns");
    for (const auto& t : train) {
        if (t.labels.size() != t.features.contexts.size()) throw Error("missing_labels", "turn without full labels");
    }
    const std::size_t batch = std::max<std::size_t>(1, config.batch_size);
    const long steps_per_epoch = static_cast<long>((train.size() + batch - 1) / batch);
    const long total_steps = steps_per_epoch * std::max(1, config.epochs);

    RankerModel model = std::move(initial);
    AdamW optimizer(model, config);
    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    result.model = model;
    result.best_validation_precision = -1.0;
    const auto& eval_set = validation.empty() ? train : validation;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            const double scale = 1.0 / static_cast<double>(end - start);
            RankerModel grad = RankerModel::zeros(model.config);
            double batch_loss = 0.0;
            for (std::size_t i = start; i < end; ++i) {
                batch_loss += turn_loss_and_grad(model, progression, train[order[i]], config.loss, &grad, scale,
                                                 config.use_progression);
            }
            if (!std::isfinite(batch_loss) || !grad.all_finite()) {
                throw TrainingDiverged("non-finite loss in epoch " + std::to_string(epoch), result.model);
            }
            epoch_loss += batch_loss;
            double lr = config.learning_rate;
            if (config.linear_decay) {
                lr *= 1.0 - static_cast<double>(optimizer.steps()) / static_cast<double>(total_steps);
            }
            optimizer.step(model, grad, lr);
        }
        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = epoch_loss / static_cast<double>(train.size());
        stats.validation_precision =
            validation_precision(model, progression, eval_set, config.precision_at, config.use_progression);
        result.history.push_back(stats);
        if (!model.all_finite()) throw TrainingDiverged("non-finite parameters", result.model);
        if (stats.validation_precision > result.best_validation_precision) {
            result.best_validation_precision = stats.validation_precision;
            result.best_epoch = epoch;
            result.model = model;
        }
        if (on_epoch) on_epoch(stats, model);
    }
    if (config.epochs <= 0) result.best_validation_precision = 0.0;
    return result;
}

}  // namespace dialcoord
