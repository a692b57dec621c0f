#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "dmis/error.hpp"

namespace dmis::lossmath {

// A prediction/ground-truth tensor pair over the same 3D grid. Prediction
// values must lie in [0,1]; truth values must be exactly 0 or 1.
class VolumePair {
public:
    VolumePair(std::vector<double> pred, std::vector<double> truth,
               std::array<std::int64_t, 3> dims);

    std::span<const double> pred() const { return pred_; }
    std::span<const double> truth() const { return truth_; }
    const std::array<std::int64_t, 3>& dims() const { return dims_; }
    std::size_t size() const { return pred_.size(); }

    // In-place prediction update, revalidated; used by finite-difference probes.
    void set_pred(std::size_t index, double value);

private:
    std::vector<double> pred_;
    std::vector<double> truth_;
    std::array<std::int64_t, 3> dims_;
};

// Soft Dice loss 1 - (2*sum(p*t) + eps) / (sum(p) + sum(t) + eps), accumulated
// in double precision in a single pass. The epsilon keeps the all-empty case
// finite and defaults to 0.1.
double dice_loss(const VolumePair& pair, double epsilon = 0.1);

// Analytic gradient of dice_loss with respect to each prediction element:
// with A = 2*sum(p*t) + eps and B = sum(p) + sum(t) + eps, element k receives
// -(2*t_k*B - A) / B^2.
std::vector<double> dice_loss_grad(const VolumePair& pair, double epsilon = 0.1);

// Quadratic variant: 1 - (2*sum(p*t) + eps) / (sum(p^2) + sum(t^2) + eps).
double quadratic_dice_loss(const VolumePair& pair, double epsilon = 0.1);

// Set-overlap score 2|A and B| / (|A| + |B|) on binary masks; both empty
// counts as a perfect match (1.0).
double dice_score(std::span<const double> pred_binary, std::span<const double> truth);

// Thresholds a real-valued prediction at the given cut (default 0.5).
std::vector<double> threshold(std::span<const double> pred, double cut = 0.5);

} // namespace dmis::lossmath
