#include "dmis/lossmath.hpp"

namespace dmis::lossmath {

namespace {

void check_epsilon(double epsilon) {
    if (!(epsilon > 0.0)) fail(ErrorKind::InvalidEpsilon, "epsilon must be positive");
}

struct DiceSums {
    double intersection = 0.0; // sum p*t
    double pred_sum = 0.0;
    double truth_sum = 0.0;
};

DiceSums accumulate(const VolumePair& pair) {
    DiceSums s;
    auto pred = pair.pred();
    auto truth = pair.truth();
    for (std::size_t i = 0; i < pred.size(); ++i) {
        s.intersection += pred[i] * truth[i];
        s.pred_sum += pred[i];
        s.truth_sum += truth[i];
    }
    return s;
}

} // namespace

VolumePair::VolumePair(std::vector<double> pred, std::vector<double> truth,
                       std::array<std::int64_t, 3> dims)
    : pred_(std::move(pred)), truth_(std::move(truth)), dims_(dims) {
    std::int64_t expected = dims_[0] * dims_[1] * dims_[2];
    if (expected < 0 || static_cast<std::size_t>(expected) != pred_.size() ||
        pred_.size() != truth_.size())
        fail(ErrorKind::ShapeError, "prediction and truth tensors must share the stated shape");
    for (double p : pred_)
        if (!(p >= 0.0 && p <= 1.0))
            fail(ErrorKind::InvalidValue, "prediction values must lie in [0,1]");
    for (double t : truth_)
        if (t != 0.0 && t != 1.0)
            fail(ErrorKind::InvalidValue, "truth values must be exactly 0 or 1");
}

void VolumePair::set_pred(std::size_t index, double value) {
    if (index >= pred_.size()) fail(ErrorKind::ShapeError, "index out of range");
    if (!(value >= 0.0 && value <= 1.0))
        fail(ErrorKind::InvalidValue, "prediction values must lie in [0,1]");
    pred_[index] = value;
}

double dice_loss(const VolumePair& pair, double epsilon) {
    check_epsilon(epsilon);
    DiceSums s = accumulate(pair);
    return 1.0 - (2.0 * s.intersection + epsilon) / (s.pred_sum + s.truth_sum + epsilon);
}

std::vector<double> dice_loss_grad(const VolumePair& pair, double epsilon) {
    check_epsilon(epsilon);
    DiceSums s = accumulate(pair);
    double a = 2.0 * s.intersection + epsilon;
    double b = s.pred_sum + s.truth_sum + epsilon;
    double inv_b2 = 1.0 / (b * b);

    auto truth = pair.truth();
    std::vector<double> grad(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i)
        grad[i] = -(2.0 * truth[i] * b - a) * inv_b2;
    return grad;
}

double quadratic_dice_loss(const VolumePair& pair, double epsilon) {
    check_epsilon(epsilon);
    auto pred = pair.pred();
    auto truth = pair.truth();
    double intersection = 0.0, pred_sq = 0.0, truth_sq = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        intersection += pred[i] * truth[i];
        pred_sq += pred[i] * pred[i];
        truth_sq += truth[i] * truth[i];
    }
    return 1.0 - (2.0 * intersection + epsilon) / (pred_sq + truth_sq + epsilon);
}

double dice_score(std::span<const double> pred_binary, std::span<const double> truth) {
    if (pred_binary.size() != truth.size())
        fail(ErrorKind::ShapeError, "mask shapes do not match");
    std::int64_t overlap = 0, pred_count = 0, truth_count = 0;
    for (std::size_t i = 0; i < pred_binary.size(); ++i) {
        if (pred_binary[i] != 0.0 && pred_binary[i] != 1.0)
            fail(ErrorKind::InvalidValue, "dice_score expects binary masks");
        if (truth[i] != 0.0 && truth[i] != 1.0)
            fail(ErrorKind::InvalidValue, "dice_score expects binary masks");
        bool p = pred_binary[i] == 1.0;
        bool t = truth[i] == 1.0;
        overlap += (p && t) ? 1 : 0;
        pred_count += p ? 1 : 0;
        truth_count += t ? 1 : 0;
    }
    if (pred_count + truth_count == 0) return 1.0;
    return 2.0 * static_cast<double>(overlap) / static_cast<double>(pred_count + truth_count);
}

std::vector<double> threshold(std::span<const double> pred, double cut) {
    std::vector<double> out(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) out[i] = pred[i] >= cut ? 1.0 : 0.0;
    return out;
}

} // namespace dmis::lossmath
