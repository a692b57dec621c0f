#include "dmis/hpgrid.hpp"

#include <unordered_set>

#include "dmis/format.hpp"

namespace dmis::hpgrid {

ScalarValue ScalarValue::real(double v) { return real(v, format_double(v)); }

ScalarValue ScalarValue::real(double v, std::string repr) {
    ScalarValue s;
    s.tag_ = Tag::Real;
    s.real_ = v;
    s.repr_ = std::move(repr);
    return s;
}

ScalarValue ScalarValue::integer(std::int64_t v) {
    ScalarValue s;
    s.tag_ = Tag::Int;
    s.int_ = v;
    s.repr_ = std::to_string(v);
    return s;
}

ScalarValue ScalarValue::token(std::string text) {
    ScalarValue s;
    s.tag_ = Tag::Token;
    s.repr_ = std::move(text);
    return s;
}

double ScalarValue::as_real() const {
    switch (tag_) {
    case Tag::Real: return real_;
    case Tag::Int: return static_cast<double>(int_);
    case Tag::Token: fail(ErrorKind::InvalidValue, "token '" + repr_ + "' is not numeric");
    }
    return 0.0;
}

std::int64_t ScalarValue::as_int() const {
    switch (tag_) {
    case Tag::Int: return int_;
    case Tag::Real: {
        auto truncated = static_cast<std::int64_t>(real_);
        if (static_cast<double>(truncated) != real_)
            fail(ErrorKind::InvalidValue, "value '" + repr_ + "' is not an integer");
        return truncated;
    }
    case Tag::Token: fail(ErrorKind::InvalidValue, "token '" + repr_ + "' is not numeric");
    }
    return 0;
}

HyperSpace::HyperSpace(std::vector<HyperAxis> axes) : axes_(std::move(axes)) {
    if (axes_.empty()) fail(ErrorKind::EmptyAxis, "hyper-space has no axes");
    std::unordered_set<std::string> names;
    for (const auto& axis : axes_) {
        if (axis.values.empty())
            fail(ErrorKind::EmptyAxis, "axis '" + axis.name + "' has no values");
        if (!names.insert(axis.name).second)
            fail(ErrorKind::DuplicateAxis, "axis '" + axis.name + "' declared twice");
        std::unordered_set<std::string> reprs;
        for (const auto& v : axis.values) {
            if (!reprs.insert(v.repr()).second)
                fail(ErrorKind::InvalidValue,
                     "axis '" + axis.name + "' repeats value " + v.repr());
        }
    }
}

std::size_t HyperSpace::grid_size() const {
    std::size_t total = 1;
    for (const auto& axis : axes_) total *= axis.values.size();
    return total;
}

const ScalarValue* ExperimentSpec::find(std::string_view axis_name) const {
    for (const auto& [name, value] : assignment)
        if (name == axis_name) return &value;
    return nullptr;
}

std::vector<ExperimentSpec> cross_product(const HyperSpace& space) {
    const auto& axes = space.axes();
    std::vector<ExperimentSpec> specs;
    specs.reserve(space.grid_size());

    std::vector<std::size_t> cursor(axes.size(), 0);
    bool done = false;
    while (!done) {
        ExperimentSpec spec;
        spec.id = static_cast<int>(specs.size());
        spec.assignment.reserve(axes.size());
        for (std::size_t a = 0; a < axes.size(); ++a)
            spec.assignment.emplace_back(axes[a].name, axes[a].values[cursor[a]]);

        if (const auto* v = spec.find("per_replica_batch"))
            spec.per_replica_batch = static_cast<int>(v->as_int());
        if (const auto* v = spec.find("base_lr")) spec.base_lr = v->as_real();
        if (const auto* v = spec.find("epochs")) spec.epochs = static_cast<int>(v->as_int());
        specs.push_back(std::move(spec));

        // odometer increment, last axis fastest
        done = true;
        for (std::size_t a = axes.size(); a-- > 0;) {
            if (++cursor[a] < axes[a].values.size()) {
                done = false;
                break;
            }
            cursor[a] = 0;
        }
    }
    return specs;
}

std::int64_t scale_global_batch(std::int64_t per_replica_batch, std::int64_t n_gpus) {
    if (per_replica_batch < 1 || n_gpus < 1)
        fail(ErrorKind::InvalidCount, "batch and device count must be positive");
    return per_replica_batch * n_gpus;
}

double scale_lr(double base_lr, int n_gpus) {
    if (!(base_lr > 0.0)) fail(ErrorKind::InvalidRate, "base learning rate must be positive");
    if (n_gpus < 1) fail(ErrorKind::InvalidCount, "device count must be positive");
    return base_lr * static_cast<double>(n_gpus);
}

} // namespace dmis::hpgrid
