#include "gaitwave/nn/tensor.hpp"

namespace gaitwave::nn {

namespace {
thread_local bool t_grad_enabled = true;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

bool grad_enabled() noexcept { return t_grad_enabled; }

}  // namespace gaitwave::nn
