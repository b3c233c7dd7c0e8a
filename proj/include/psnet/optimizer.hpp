#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "psnet/errors.hpp"
#include "psnet/layers.hpp"
#include "psnet/tensor.hpp"

namespace psnet {

// Adam with bias correction. Slots are keyed by parameter name so checkpoint
// restore can verify it is stepping the same parameter list.
template <typename T>
class Adam {
public:
    double lr = 2e-4, beta1 = 0.5, beta2 = 0.999, eps = 1e-8;
    std::int64_t t = 0;
    std::vector<std::string> names;
    std::vector<Tensor<T>> m, v;

    void init(const std::vector<ParamRef<T>>& params, double lr_, double b1, double b2) {
        lr = lr_;
        beta1 = b1;
        beta2 = b2;
        t = 0;
        names.clear();
        m.clear();
        v.clear();
        for (const auto& p : params) {
            names.push_back(p.name);
            m.emplace_back(p.value->shape());
            v.emplace_back(p.value->shape());
        }
    }

    bool initialized() const { return !names.empty(); }

    void step(std::vector<ParamRef<T>>& params) {
        if (params.size() != names.size())
            throw ConfigError("optimizer sees " + std::to_string(params.size()) +
                              " parameters, state has " + std::to_string(names.size()));
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (params[i].name != names[i])
                throw ConfigError("optimizer slot '" + names[i] + "' got parameter '" +
                                  params[i].name + "'");
            if (!params[i].value->same_shape(m[i]))
                throw ShapeError("optimizer slot '" + names[i] + "' shape changed");
            T* __restrict x = params[i].value->data();
            const T* __restrict g = params[i].grad->data();
            T* __restrict mi = m[i].data();
            T* __restrict vi = v[i].data();
            const std::int64_t n = params[i].value->numel();
            for (std::int64_t j = 0; j < n; ++j) {
                const double gj = static_cast<double>(g[j]);
                const double mj = beta1 * static_cast<double>(mi[j]) + (1.0 - beta1) * gj;
                const double vj = beta2 * static_cast<double>(vi[j]) + (1.0 - beta2) * gj * gj;
                mi[j] = static_cast<T>(mj);
                vi[j] = static_cast<T>(vj);
                x[j] -= static_cast<T>(lr * (mj / bc1) / (std::sqrt(vj / bc2) + eps));
            }
        }
    }
};

}  // namespace psnet
