#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gaitwave/error.hpp"

namespace gaitwave::nn {

using Shape = std::vector<int>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1},
                         [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
}

std::string shape_str(const Shape& s);

template <typename Real>
struct TensorImpl {
  Shape shape;
  std::vector<Real> data;
  std::vector<Real> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(TensorImpl&)> backward_fn;

  std::vector<Real>& grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), Real(0));
    return grad;
  }
};

/// Thread-local switch; while a NoGradGuard is alive, ops record no graph.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled() noexcept;

/// Dense row-major tensor handle with an optional gradient. Copies share the
/// underlying node, the way autograd frameworks treat variables.
template <typename Real>
class Tensor {
 public:
  using Impl = TensorImpl<Real>;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    auto impl = std::make_shared<Impl>();
    impl->data.assign(nn::numel(shape), Real(0));
    impl->shape = std::move(shape);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
  }

  static Tensor full(Shape shape, Real value, bool requires_grad = false) {
    auto t = zeros(std::move(shape), requires_grad);
    std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
    return t;
  }

  static Tensor from(Shape shape, std::vector<Real> data, bool requires_grad = false) {
    if (data.size() != nn::numel(shape))
      fail(ErrorKind::ShapeMismatch, "data length " + std::to_string(data.size()) + " does not fit shape " + shape_str(shape));
    auto impl = std::make_shared<Impl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
  }

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const noexcept { return impl_->shape; }
  int rank() const noexcept { return static_cast<int>(impl_->shape.size()); }
  int dim(int i) const noexcept { return impl_->shape[i]; }
  std::size_t numel() const noexcept { return impl_->data.size(); }

  std::span<Real> data() noexcept { return impl_->data; }
  std::span<const Real> data() const noexcept { return impl_->data; }
  Real item() const {
    if (numel() != 1) fail(ErrorKind::NotScalar, "item() on tensor of shape " + shape_str(shape()));
    return impl_->data[0];
  }

  bool requires_grad() const noexcept { return impl_->requires_grad; }
  bool has_grad() const noexcept { return !impl_->grad.empty(); }
  std::span<Real> grad() { return impl_->grad_buffer(); }
  std::span<const Real> grad() const { return impl_->grad_buffer(); }
  void zero_grad() noexcept { impl_->grad.clear(); }

  Impl& impl() const noexcept { return *impl_; }
  const std::shared_ptr<Impl>& handle() const noexcept { return impl_; }

 private:
  std::shared_ptr<Impl> impl_;
};

/// Creates an op output. When grad mode is on and any input requires a
/// gradient, the output records its inputs and backward closure.
template <typename Real>
Tensor<Real> make_result(Shape shape, std::vector<Real> data, std::initializer_list<const Tensor<Real>*> inputs,
                         std::function<void(TensorImpl<Real>&)> backward_fn) {
  auto out = Tensor<Real>::from(std::move(shape), std::move(data));
  if (!grad_enabled()) return out;
  bool needs = false;
  for (const auto* in : inputs) needs = needs || (in->defined() && in->requires_grad());
  if (!needs) return out;
  auto& impl = out.impl();
  impl.requires_grad = true;
  for (const auto* in : inputs)
    if (in->defined()) impl.inputs.push_back(in->handle());
  impl.backward_fn = std::move(backward_fn);
  return out;
}

template <typename Real>
Tensor<Real> make_result(Shape shape, std::vector<Real> data, const std::vector<Tensor<Real>>& inputs,
                         std::function<void(TensorImpl<Real>&)> backward_fn) {
  auto out = Tensor<Real>::from(std::move(shape), std::move(data));
  if (!grad_enabled()) return out;
  bool needs = false;
  for (const auto& in : inputs) needs = needs || in.requires_grad();
  if (!needs) return out;
  auto& impl = out.impl();
  impl.requires_grad = true;
  for (const auto& in : inputs) impl.inputs.push_back(in.handle());
  impl.backward_fn = std::move(backward_fn);
  return out;
}

/// Reverse-mode accumulation from a scalar. Nodes are visited in reverse
/// topological order of a depth-first traversal that follows inputs in
/// declaration order, so two identical graphs accumulate identically.
template <typename Real>
void backward(const Tensor<Real>& loss) {
  if (loss.numel() != 1) fail(ErrorKind::NotScalar, "backward() needs a scalar, got shape " + shape_str(loss.shape()));
  using Impl = TensorImpl<Real>;
  enum class Mark : char { Active, Done };
  std::unordered_map<const Impl*, Mark> marks;
  std::vector<Impl*> order;
  struct Frame {
    Impl* node;
    std::size_t next;
  };
  std::vector<Frame> stack{{&loss.impl(), 0}};
  marks[&loss.impl()] = Mark::Active;
  while (!stack.empty()) {
    auto& top = stack.back();
    if (top.next < top.node->inputs.size()) {
      Impl* child = top.node->inputs[top.next++].get();
      if (!child->requires_grad) continue;
      auto it = marks.find(child);
      if (it == marks.end()) {
        marks[child] = Mark::Active;
        stack.push_back({child, 0});
      } else if (it->second == Mark::Active) {
        fail(ErrorKind::GraphCycle, "computation graph contains a cycle");
      }
    } else {
      marks[top.node] = Mark::Done;
      order.push_back(top.node);
      stack.pop_back();
    }
  }
  auto& root = loss.impl();
  root.grad_buffer()[0] += Real(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Impl* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
}

}  // namespace gaitwave::nn
