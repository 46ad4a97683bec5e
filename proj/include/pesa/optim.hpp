#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pesa/tensor.hpp"

namespace pesa {

struct Param {
    std::string name;
    Tensor value;
};

using ParamSet = std::vector<Param>;

// Adam moment buffers, one slot per parameter in ParamSet order.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t t = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
};

// Standard bias-corrected Adam update, applied in place. Parameters without a
// populated grad are treated as zero-gradient (moments still decay).
void adam_step(ParamSet& params, AdamState& state, double lr);

// Step-decay schedule: lr(s) = base_lr * gamma^floor(s / interval).
struct LrSchedule {
    double base_lr = 1e-3;
    std::size_t interval = 1;
    double gamma = 1.0;
};

double step_decay(const LrSchedule& schedule, std::size_t step);

}  // namespace pesa
