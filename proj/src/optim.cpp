#include "rpg/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace rpg {

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw std::invalid_argument("Adam size mismatch");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(opt_.beta1, t_);
  const double bc2 = 1.0 - std::pow(opt_.beta2, t_);
  for (size_t i = 0; i < params.size(); ++i) {
    m_[i] = opt_.beta1 * m_[i] + (1.0 - opt_.beta1) * grad[i];
    v_[i] = opt_.beta2 * v_[i] + (1.0 - opt_.beta2) * grad[i] * grad[i];
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    params[i] -= opt_.lr * mhat / (std::sqrt(vhat) + opt_.eps);
  }
}

double clip_global_norm(std::span<double> grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (double& g : grad) g *= s;
  }
  return norm;
}

}  // namespace rpg
