#include "gaitwave/nn/optim.hpp"

#include <cmath>
#include <numbers>

namespace gaitwave::nn {

template <typename Real>
Adam<Real>::Adam(const ParamStore<Real>& store, AdamConfig cfg) : cfg_(cfg) {
  for (const auto& e : store.trainable())
    slots_.push_back({e.name, e.tensor, std::vector<Real>(e.tensor.numel(), Real(0)),
                      std::vector<Real>(e.tensor.numel(), Real(0))});
}

template <typename Real>
void Adam<Real>::step(double lr) {
  ++step_;
  const double t = static_cast<double>(step_);
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
  for (auto& s : slots_) {
    auto p = s.param.data();
    if (s.m.size() != p.size()) fail(ErrorKind::ShapeMismatch, "optimizer state does not match parameter " + s.name);
    const bool has = s.param.has_grad();
    const Real* g = has ? s.param.impl().grad.data() : nullptr;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = has ? static_cast<double>(g[i]) : 0.0;
      const double m = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * gi;
      const double v = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * gi * gi;
      s.m[i] = static_cast<Real>(m);
      s.v[i] = static_cast<Real>(v);
      const double m_hat = m / bc1;
      const double v_hat = v / bc2;
      const double pi = p[i];
      p[i] = static_cast<Real>(pi - lr * (m_hat / (std::sqrt(v_hat) + cfg_.eps)) - lr * cfg_.weight_decay * pi);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

std::int64_t one_cycle_warmup_steps(std::int64_t total_steps) {
  return (total_steps * 3 + 5) / 10;  // round(0.3 * total)
}

double one_cycle_lr(std::int64_t step, std::int64_t total_steps, double lr_init) {
  if (total_steps < 1 || step < 0 || step > total_steps)
    fail(ErrorKind::OutOfRange,
         "learning-rate step " + std::to_string(step) + " outside [0, " + std::to_string(total_steps) + "]");
  const double start = lr_init / 25.0;
  const double floor = lr_init / 1e4;
  const std::int64_t warm = one_cycle_warmup_steps(total_steps);
  const auto ramp = [](double a, double b, double frac) {
    return std::lerp(a, b, 0.5 * (1.0 - std::cos(std::numbers::pi * frac)));
  };
  if (step <= warm && warm > 0) return ramp(start, lr_init, static_cast<double>(step) / static_cast<double>(warm));
  if (step == 0) return start;
  return ramp(lr_init, floor, static_cast<double>(step - warm) / static_cast<double>(total_steps - warm));
}

}  // namespace gaitwave::nn
