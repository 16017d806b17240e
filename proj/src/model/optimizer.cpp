#include "mrgen/model.hpp"

#include "mrgen/errors.hpp"

#include <algorithm>
#include <cmath>

namespace mrgen {

OptimizerState OptimizerState::for_params(const ParameterStore& params) {
    OptimizerState s;
    for (const auto& e : params.entries()) {
        s.m.emplace_back(e.tensor.size(), 0.0);
        s.u.emplace_back(e.tensor.size(), 0.0);
    }
    return s;
}

void adamax_step(const ParameterStore& params, OptimizerState& state, const AdamaxOptions& options) {
    const auto& entries = params.entries();
    if (state.m.size() != entries.size() || state.u.size() != entries.size()) {
        throw DimensionError("optimizer state does not match the parameter list");
    }
    state.step += 1;
    const double step_size = options.learning_rate / (1.0 - std::pow(options.beta1, double(state.step)));
    for (std::size_t k = 0; k < entries.size(); ++k) {
        auto tensor = entries[k].tensor;
        auto& value = tensor.value();
        const auto& grad = tensor.grad();
        auto& m = state.m[k];
        auto& u = state.u[k];
        if (m.size() != value.size() || u.size() != value.size()) {
            throw DimensionError("optimizer state for " + entries[k].name + " has the wrong size");
        }
        for (std::size_t i = 0; i < value.size(); ++i) {
            m[i] = options.beta1 * m[i] + (1.0 - options.beta1) * grad[i];
            u[i] = std::max(options.beta2 * u[i], std::abs(grad[i]));
            value[i] -= step_size * m[i] / (u[i] + options.eps);
        }
    }
}

} // namespace mrgen
