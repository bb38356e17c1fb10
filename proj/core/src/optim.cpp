// SPDX-License-Identifier: Apache-2.0
#include "msgan/optim.hpp"

#include <cmath>

#include "msgan/errors.hpp"

namespace msgan {

void AdamState::step(std::span<double> param, std::span<const double> grad, const AdamConfig& cfg) {
  if (param.size() != m_.size() || grad.size() != m_.size()) throw ShapeError("Adam: size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
  const double step = cfg.lr * std::sqrt(c2) / c1;
  for (std::size_t i = 0; i < param.size(); ++i) {
    m_[i] = cfg.beta1 * m_[i] + (1.0 - cfg.beta1) * grad[i];
    v_[i] = cfg.beta2 * v_[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    if (step != 0.0) param[i] -= step * m_[i] / (std::sqrt(v_[i]) + cfg.eps * std::sqrt(c2));
  }
}

}  // namespace msgan
