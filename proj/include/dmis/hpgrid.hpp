#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dmis/error.hpp"

namespace dmis::hpgrid {

// A hyper-parameter value together with its exact textual representation.
// Equality and duplicate detection compare representations, not parsed
// doubles, so 0.1 and 0.10 are distinct tokens while 1e-4 written twice
// is a duplicate.
class ScalarValue {
public:
    enum class Tag { Real, Int, Token };

    static ScalarValue real(double v);
    static ScalarValue real(double v, std::string repr);
    static ScalarValue integer(std::int64_t v);
    static ScalarValue token(std::string text);

    Tag tag() const { return tag_; }
    double as_real() const;
    std::int64_t as_int() const;
    const std::string& repr() const { return repr_; }

    bool operator==(const ScalarValue& other) const {
        return tag_ == other.tag_ && repr_ == other.repr_;
    }

private:
    Tag tag_ = Tag::Token;
    double real_ = 0.0;
    std::int64_t int_ = 0;
    std::string repr_;
};

struct HyperAxis {
    std::string name;
    std::vector<ScalarValue> values;
};

class HyperSpace {
public:
    explicit HyperSpace(std::vector<HyperAxis> axes);

    const std::vector<HyperAxis>& axes() const { return axes_; }
    std::size_t grid_size() const;

private:
    std::vector<HyperAxis> axes_;
};

// One point of the expanded grid. Batch size, learning rate and epochs carry
// the deployment defaults (2 per replica, 1e-4, 250) unless the space declares
// an axis with the matching reserved name.
struct ExperimentSpec {
    int id = 0;
    std::vector<std::pair<std::string, ScalarValue>> assignment;
    int per_replica_batch = 2;
    double base_lr = 1e-4;
    int epochs = 250;

    const ScalarValue* find(std::string_view axis_name) const;
};

// Row-major expansion over the axes in declared order; the last axis varies
// fastest. Ids are dense 0..E-1.
std::vector<ExperimentSpec> cross_product(const HyperSpace& space);

// Global batch rule: per-replica batch times device count.
std::int64_t scale_global_batch(std::int64_t per_replica_batch, std::int64_t n_gpus);

// Learning-rate rule: base rate times device count.
double scale_lr(double base_lr, int n_gpus);

} // namespace dmis::hpgrid
