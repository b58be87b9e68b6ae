#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "dialcoord/error.hpp"
#include "dialcoord/ranker.hpp"
#include "dialcoord/ranking_loss.hpp"

namespace dialcoord {

// One labelled turn, fully embedded.
struct TrainingTurn {
    TurnFeatures features;
    std::vector<int> labels;     // positions 1..N, parallel to features.contexts
    std::vector<bool> relevant;  // candidate aspect in the gold aspects (for Precision@n)
};

struct TrainConfig {
    LossConfig loss;
    double learning_rate = 2e-5;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t batch_size = 32;
    int epochs = 5;
    std::uint64_t seed = 0;
    bool linear_decay = false;
    bool use_progression = true;
    int precision_at = 3;
};

// Decoupled-weight-decay Adam over every RankerModel parameter.
class AdamW {
public:
    AdamW(const RankerModel& shape_of, const TrainConfig& config);
    void step(RankerModel& model, RankerModel& grad, double learning_rate);
    long steps() const noexcept { return t_; }

private:
    RankerModel m_;
    RankerModel v_;
    TrainConfig config_;
    long t_ = 0;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double validation_precision = 0.0;
};

struct TrainResult {
    RankerModel model;  // best-validation checkpoint
    int best_epoch = 0;
    double best_validation_precision = 0.0;
    std::vector<EpochStats> history;
};

class TrainingDiverged : public Error {
public:
    TrainingDiverged(const std::string& message, RankerModel last_good)
        : Error("training_diverged", message), last_good_(std::move(last_good)) {}
    const RankerModel& last_good() const noexcept { return last_good_; }

private:
    RankerModel last_good_;
};

// Loss and gradient over one turn (gradient accumulated into grad, scaled).
double turn_loss_and_grad(const RankerModel& model, const ProgressionContext& progression, const TrainingTurn& turn,
                          const LossConfig& loss, RankerModel* grad, double grad_scale = 1.0,
                          bool use_progression = true);

// Mean over turns of |top-n ∩ relevant| / n under the model's ranking.
double validation_precision(const RankerModel& model, const ProgressionContext& progression,
                            const std::vector<TrainingTurn>& turns, int n, bool use_progression = true);

using EpochCallback = std::function<void(const EpochStats&, const RankerModel&)>;

// Minimizes the combined ranking loss end-to-end (scorer, projection,
// progression MLP, attention matrices) with mini-batch AdamW; returns the
// epoch with the best validation Precision@n.
TrainResult train_ranker(const std::vector<TrainingTurn>& train, const std::vector<TrainingTurn>& validation,
                         const ProgressionContext& progression, RankerModel initial, const TrainConfig& config,
                         const EpochCallback& on_epoch = {});

}  // namespace dialcoord
