#pragma once

#include <cstdint>
#include <vector>

#include "gaitwave/nn/params.hpp"

namespace gaitwave::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;  // decoupled
};

/// Adam with bias-corrected moments and decoupled weight decay:
///   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)
template <typename Real>
class Adam {
 public:
  Adam(const ParamStore<Real>& store, AdamConfig cfg);

  /// Applies one update with learning rate lr using the parameters' current
  /// grads; parameters without a grad are treated as having zero gradient.
  void step(double lr);

  std::uint64_t steps() const noexcept { return step_; }
  void set_steps(std::uint64_t s) noexcept { step_ = s; }
  const AdamConfig& config() const noexcept { return cfg_; }

  struct Slot {
    std::string name;
    Tensor<Real> param;
    std::vector<Real> m;
    std::vector<Real> v;
  };
  std::vector<Slot>& slots() noexcept { return slots_; }
  const std::vector<Slot>& slots() const noexcept { return slots_; }

 private:
  AdamConfig cfg_;
  std::vector<Slot> slots_;
  std::uint64_t step_ = 0;
};

/// One-cycle schedule: cosine warm-up from lr_init/25 to lr_init over the
/// first 30% of steps, then cosine annealing down to lr_init/1e4 at
/// total_steps. Throws OutOfRange unless 0 <= step <= total_steps.
double one_cycle_lr(std::int64_t step, std::int64_t total_steps, double lr_init);

/// Number of warm-up steps used by one_cycle_lr.
std::int64_t one_cycle_warmup_steps(std::int64_t total_steps);

}  // namespace gaitwave::nn
