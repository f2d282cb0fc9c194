#pragma once

#include <memory>
#include <optional>
#include <string>

#include "gaitwave/backbone.hpp"
#include "gaitwave/fusion.hpp"
#include "gaitwave/stream.hpp"

namespace gaitwave::model {

struct ModelConfig {
  bool use_stream = true;
  std::string backbone = "reference";  // "reference" | "none"
  stream::StreamConfig stream;
  backbone::ReferenceConfig reference;

  void validate() const;
};

/// Inputs for one batch; a part may be left undefined when its branch is off.
template <typename Real>
struct ModelInput {
  nn::Tensor<Real> planes;     // [B*V*2, 1, F, L]
  nn::Tensor<Real> sequences;  // [B, 2V, 1, T]
};

/// Wavelet stream and/or backbone, fused into unit-norm embeddings.
template <typename Real>
class GaitModel {
 public:
  GaitModel(const ModelConfig& cfg, std::uint64_t seed);

  /// [B, 128] l2-normalized embeddings (zero rows stay zero).
  nn::Tensor<Real> embed(const ModelInput<Real>& input, bool training);

  nn::ParamStore<Real>& params() noexcept { return store_; }
  const nn::ParamStore<Real>& params() const noexcept { return store_; }
  const ModelConfig& config() const noexcept { return cfg_; }
  bool uses_stream() const noexcept { return stream_ != nullptr; }
  bool uses_backbone() const noexcept { return backbone_ != nullptr; }
  fusion::FusionHead<Real>& head() noexcept { return *head_; }

  /// Zeroes the fusion FC so every embedding collapses to the zero vector.
  void collapse();

 private:
  ModelConfig cfg_;
  nn::ParamStore<Real> store_;
  std::unique_ptr<stream::WaveletStream<Real>> stream_;
  std::unique_ptr<backbone::Backbone<Real>> backbone_;
  std::unique_ptr<fusion::FusionHead<Real>> head_;
};

}  // namespace gaitwave::model
