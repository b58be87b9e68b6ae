#pragma once

#include <span>
#include <vector>

#include "dialcoord/linalg.hpp"

namespace dialcoord {

// Label positions: 1 = best. Scores: lower = better.

struct LossConfig {
    double margin = 0.2;       // tau
    double mix = 0.9;          // alpha: weight of the triplet term
    double temperature = 0.1;  // soft-rank sigmoid temperature
};

// Sum over pairs with label[a] < label[b] of max(0, f_a - f_b + margin).
double triplet_loss(std::span<const double> scores, std::span<const int> labels, double margin,
                    Vec* grad = nullptr);

// g~_c = 1 + sum_{c' != c} sigmoid((f_c - f_c') / temperature).
Vec soft_rank(std::span<const double> scores, double temperature);

// Mean over candidates of (label - soft_rank)^2.
double pointwise_loss(std::span<const double> scores, std::span<const int> labels, double temperature,
                      Vec* grad = nullptr);

// mix * triplet + (1 - mix) * pointwise.
double combined_loss(std::span<const double> scores, std::span<const int> labels, const LossConfig& config,
                     Vec* grad = nullptr);

double sigmoid(double x);

}  // namespace dialcoord
