#pragma once

#include <string>
#include <vector>

#include "gaitwave/nn/tensor.hpp"
#include "gaitwave/rng.hpp"

namespace gaitwave::nn {

/// Named parameters and buffers of one model, in registration order.
/// Buffers (BN running statistics) are saved but never trained.
template <typename Real>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<Real> tensor;
    bool trainable;
  };

  Tensor<Real> add_param(const std::string& name, Shape shape);
  Tensor<Real> add_buffer(const std::string& name, Shape shape, Real fill);

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::vector<Entry> trainable() const;
  Tensor<Real> get(const std::string& name) const;
  bool contains(const std::string& name) const;
  void zero_grad();
  std::size_t parameter_count() const;

  /// Copies values (not graph state) from another store with identical names and shapes.
  void copy_values_from(const ParamStore& other);

 private:
  std::vector<Entry> entries_;
};

/// Uniform(-b, b) with b = sqrt(6 / fan_in), the He bound for ReLU layers.
template <typename Real>
void kaiming_uniform(Tensor<Real>& t, int fan_in, Rng& rng);

/// Uniform(-b, b) with b = 1 / sqrt(fan_in).
template <typename Real>
void fan_in_uniform(Tensor<Real>& t, int fan_in, Rng& rng);

}  // namespace gaitwave::nn
