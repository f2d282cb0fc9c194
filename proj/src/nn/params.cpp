#include "gaitwave/nn/params.hpp"

#include <algorithm>
#include <cmath>

namespace gaitwave::nn {

template <typename Real>
Tensor<Real> ParamStore<Real>::add_param(const std::string& name, Shape shape) {
  if (contains(name)) fail(ErrorKind::InvalidConfig, "duplicate parameter name " + name);
  auto t = Tensor<Real>::zeros(std::move(shape), true);
  entries_.push_back({name, t, true});
  return t;
}

template <typename Real>
Tensor<Real> ParamStore<Real>::add_buffer(const std::string& name, Shape shape, Real fill) {
  if (contains(name)) fail(ErrorKind::InvalidConfig, "duplicate parameter name " + name);
  auto t = Tensor<Real>::full(std::move(shape), fill, false);
  entries_.push_back({name, t, false});
  return t;
}

template <typename Real>
std::vector<typename ParamStore<Real>::Entry> ParamStore<Real>::trainable() const {
  std::vector<Entry> out;
  for (const auto& e : entries_)
    if (e.trainable) out.push_back(e);
  return out;
}

template <typename Real>
Tensor<Real> ParamStore<Real>::get(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.tensor;
  fail(ErrorKind::InvalidConfig, "no parameter named " + name);
}

template <typename Real>
bool ParamStore<Real>::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == name; });
}

template <typename Real>
void ParamStore<Real>::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

template <typename Real>
std::size_t ParamStore<Real>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_)
    if (e.trainable) n += e.tensor.numel();
  return n;
}

template <typename Real>
void ParamStore<Real>::copy_values_from(const ParamStore& other) {
  if (other.entries_.size() != entries_.size()) fail(ErrorKind::ShapeMismatch, "parameter stores differ in size");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto& dst = entries_[i];
    const auto& src = other.entries_[i];
    if (dst.name != src.name || dst.tensor.shape() != src.tensor.shape())
      fail(ErrorKind::ShapeMismatch, "parameter " + dst.name + " does not match " + src.name);
    std::copy(src.tensor.data().begin(), src.tensor.data().end(), dst.tensor.data().begin());
  }
}

template <typename Real>
void kaiming_uniform(Tensor<Real>& t, int fan_in, Rng& rng) {
  const double b = std::sqrt(6.0 / fan_in);
  for (auto& v : t.data()) v = static_cast<Real>(rng.uniform(-b, b));
}

template <typename Real>
void fan_in_uniform(Tensor<Real>& t, int fan_in, Rng& rng) {
  const double b = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.data()) v = static_cast<Real>(rng.uniform(-b, b));
}

template class ParamStore<float>;
template class ParamStore<double>;
template void kaiming_uniform(Tensor<float>&, int, Rng&);
template void kaiming_uniform(Tensor<double>&, int, Rng&);
template void fan_in_uniform(Tensor<float>&, int, Rng&);
template void fan_in_uniform(Tensor<double>&, int, Rng&);

}  // namespace gaitwave::nn
