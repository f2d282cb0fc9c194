#pragma once

#include <cstdint>
#include <vector>

#include "gaitwave/nn/layers.hpp"

namespace gaitwave::fusion {

inline constexpr int kEmbeddingDim = 128;
inline constexpr double kDefaultMargin = 0.01;

/// Concatenation of backbone feature and wavelet descriptor, FC to 128,
/// then l2 normalization.
template <typename Real>
class FusionHead {
 public:
  FusionHead(int in_dim, nn::ParamStore<Real>& store, Rng& rng, const std::string& prefix = "fusion.");

  /// Either part may be undefined (single-stream models); at least one must be present.
  nn::Tensor<Real> forward(const nn::Tensor<Real>& backbone_feature, const nn::Tensor<Real>& wavelet_descriptor) const;

  /// Pre-normalization projection, [B, 128].
  nn::Tensor<Real> project(const nn::Tensor<Real>& backbone_feature, const nn::Tensor<Real>& wavelet_descriptor) const;

  nn::Linear<Real>& fc() noexcept { return fc_; }
  int in_dim() const noexcept { return in_dim_; }

 private:
  int in_dim_;
  nn::Linear<Real> fc_;
};

/// Single-sample fusion; throws ZeroEmbedding when the projection norm is
/// below 1e-12 instead of returning the zero vector.
template <typename Real>
std::vector<Real> fuse(const FusionHead<Real>& head, const std::vector<Real>& backbone_feature,
                       const std::vector<Real>& wavelet_descriptor);

struct Triplet {
  int anchor, positive, negative;
  bool operator==(const Triplet&) const = default;
};

/// Batch-hard mining on Euclidean distances, one triplet per anchor in index
/// order. Ties resolve to the smallest index. Throws DegenerateBatch when a
/// label occurs once or the batch has a single label.
std::vector<Triplet> mine_hard_triplets(const std::vector<double>& embeddings, int dim, const std::vector<int>& labels);

/// Mean hinge max(0, d(a,p) - d(a,n) + margin) over the given triplets,
/// computed from raw values.
double triplet_loss_value(const std::vector<double>& embeddings, int dim, const std::vector<Triplet>& triplets, double margin);

/// Differentiable batch-hard triplet loss for embeddings [B, D]. Mining runs
/// on the current values; the gradient is zero at the hinge point and for a
/// zero distance.
template <typename Real>
nn::Tensor<Real> triplet_loss(const nn::Tensor<Real>& embeddings, const std::vector<int>& labels, double margin,
                              std::vector<Triplet>* mined = nullptr);

/// P identities x K samples per batch. Identities are laid out as a stream of
/// seeded shuffled rounds (each round lists every identity once), cut into
/// groups of P; ids already in an open group move to the back of the next
/// round. Over any epoch every identity therefore appears either
/// floor(P*batches/N) or that plus one times. Samples within an identity are
/// drawn without replacement until exhausted (with replacement when an
/// identity has fewer than K).
class BalancedSampler {
 public:
  BalancedSampler(const std::vector<int>& labels, int P, int K, std::uint64_t seed);

  /// `batches` batches with balanced identity counts.
  std::vector<std::vector<int>> next_epoch(int batches);
  /// One batch from an epoch of batches_per_pass() batches.
  std::vector<int> next_batch();
  /// Batches needed to visit every identity once.
  int batches_per_pass() const noexcept;
  int num_identities() const noexcept { return static_cast<int>(ids_.size()); }

 private:
  std::vector<int> draw(int identity);

  int P_, K_;
  Rng rng_;
  std::vector<int> ids_;
  std::vector<std::vector<int>> members_;
  std::vector<std::vector<int>> pools_;
  std::vector<std::vector<int>> pending_;
  std::size_t cursor_ = 0;
};

}  // namespace gaitwave::fusion
