#pragma once

#include <vector>

#include "core/autodiff.hpp"

namespace lfb {

// Per-pixel cross entropy between predicted probabilities and a one-hot
// target of the same shape, mean-reduced over batch and pixels. Probabilities
// are clamped to [1e-12, 1-1e-12] before the log. With a single channel the
// target is a binary map and the loss is binary cross entropy.
Var cross_entropy_loss(Tape* tape, const Var& probs, const Var& target);

// Weighted soft Dice loss: 1 - sum_k w_k * (2*|P_k∩T_k|+eps)/(|P_k|+|T_k|+eps)
// / sum_k w_k, with per-class sums taken over batch and pixels. Empty weights
// mean all-ones (background included). An empty class on both sides scores a
// perfect overlap term via eps.
Var dice_loss(Tape* tape, const Var& probs, const Var& target,
              const std::vector<double>& class_weights = {}, double eps = 1e-6);

// Exactly the arithmetic mean of the two loss terms.
Var total_loss(Tape* tape, const Var& l1, const Var& l2);

}  // namespace lfb
