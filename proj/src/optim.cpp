#include "pesa/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace pesa {

void adam_step(ParamSet& params, AdamState& state, double lr) {
    if (lr <= 0.0) throw std::invalid_argument("adam_step: lr must be positive, got " +
                                               std::to_string(lr));
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i].value.size(), 0.0);
            state.v[i].assign(params[i].value.size(), 0.0);
        }
    }
    if (state.m.size() != params.size())
        throw std::invalid_argument("adam_step: state holds " + std::to_string(state.m.size()) +
                                    " slots for " + std::to_string(params.size()) + " params");

    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    const bool f32 = current_precision() == Precision::f32;

    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& theta = params[i].value.mutable_data();
        if (state.m[i].size() != theta.size())
            throw std::invalid_argument("adam_step: moment shape mismatch for param '" +
                                        params[i].name + "'");
        const bool has_grad = params[i].value.has_grad();
        const std::vector<double>* g = has_grad ? &params[i].value.grad() : nullptr;
        for (std::size_t j = 0; j < theta.size(); ++j) {
            double gj = g ? (*g)[j] : 0.0;
            state.m[i][j] = state.beta1 * state.m[i][j] + (1.0 - state.beta1) * gj;
            state.v[i][j] = state.beta2 * state.v[i][j] + (1.0 - state.beta2) * gj * gj;
            double mhat = state.m[i][j] / bc1;
            double vhat = state.v[i][j] / bc2;
            theta[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
            if (f32) theta[j] = static_cast<double>(static_cast<float>(theta[j]));
        }
    }
}

double step_decay(const LrSchedule& schedule, std::size_t step) {
    std::size_t k = step / schedule.interval;
    return schedule.base_lr * std::pow(schedule.gamma, static_cast<double>(k));
}

}  // namespace pesa
