#include "gaitwave/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace gaitwave::fusion {

using nn::Tensor;

template <typename Real>
FusionHead<Real>::FusionHead(int in_dim, nn::ParamStore<Real>& store, Rng& rng, const std::string& prefix)
    : in_dim_(in_dim), fc_(store, prefix + "fc", in_dim, kEmbeddingDim, rng) {}

template <typename Real>
Tensor<Real> FusionHead<Real>::project(const Tensor<Real>& fb, const Tensor<Real>& fw) const {
  Tensor<Real> joined;
  if (fb.defined() && fw.defined()) joined = nn::concat<Real>({fb, fw}, 1);
  else if (fb.defined()) joined = fb;
  else if (fw.defined()) joined = fw;
  else fail(ErrorKind::ShapeMismatch, "fusion needs at least one input feature");
  if (joined.rank() != 2 || joined.dim(1) != in_dim_)
    fail(ErrorKind::ShapeMismatch, "fusion expects width " + std::to_string(in_dim_) + ", got " + nn::shape_str(joined.shape()));
  return fc_(joined);
}

template <typename Real>
Tensor<Real> FusionHead<Real>::forward(const Tensor<Real>& fb, const Tensor<Real>& fw) const {
  return nn::l2_normalize(project(fb, fw));
}

template <typename Real>
std::vector<Real> fuse(const FusionHead<Real>& head, const std::vector<Real>& fb, const std::vector<Real>& fw) {
  nn::NoGradGuard guard;
  const auto as_row = [](const std::vector<Real>& v) {
    return v.empty() ? Tensor<Real>() : Tensor<Real>::from({1, static_cast<int>(v.size())}, v);
  };
  for (const auto* part : {&fb, &fw})
    for (Real v : *part)
      if (!std::isfinite(v)) fail(ErrorKind::InvalidRange, "fusion input is not finite");
  auto z = head.project(as_row(fb), as_row(fw));
  double norm = 0.0;
  for (Real v : z.data()) norm += static_cast<double>(v) * v;
  if (std::sqrt(norm) < nn::kL2Floor) fail(ErrorKind::ZeroEmbedding, "fused projection has zero norm");
  auto y = nn::l2_normalize(z);
  return {y.data().begin(), y.data().end()};
}

namespace {

double distance(const double* a, const double* b, int dim) {
  double s = 0.0;
  for (int d = 0; d < dim; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return std::sqrt(s);
}

}  // namespace

std::vector<Triplet> mine_hard_triplets(const std::vector<double>& emb, int dim, const std::vector<int>& labels) {
  const int B = static_cast<int>(labels.size());
  if (dim <= 0 || emb.size() != static_cast<std::size_t>(B) * dim)
    fail(ErrorKind::ShapeMismatch, "embedding count does not match label count");
  std::map<int, int> counts;
  for (int l : labels) ++counts[l];
  if (counts.size() < 2) fail(ErrorKind::DegenerateBatch, "batch holds a single identity");
  for (const auto& [label, n] : counts)
    if (n < 2) fail(ErrorKind::DegenerateBatch, "identity " + std::to_string(label) + " has a single sample in the batch");

  std::vector<double> dist(static_cast<std::size_t>(B) * B);
  for (int i = 0; i < B; ++i)
    for (int j = 0; j < B; ++j) dist[i * B + j] = distance(&emb[i * dim], &emb[j * dim], dim);

  std::vector<Triplet> out;
  out.reserve(B);
  for (int a = 0; a < B; ++a) {
    int p = -1, n = -1;
    for (int j = 0; j < B; ++j) {
      if (j == a) continue;
      const double d = dist[a * B + j];
      if (labels[j] == labels[a]) {
        if (p < 0 || d > dist[a * B + p]) p = j;
      } else if (n < 0 || d < dist[a * B + n]) {
        n = j;
      }
    }
    out.push_back({a, p, n});
  }
  return out;
}

double triplet_loss_value(const std::vector<double>& emb, int dim, const std::vector<Triplet>& triplets, double margin) {
  if (triplets.empty()) return 0.0;
  long double total = 0.0L;
  for (const auto& t : triplets) {
    const double dp = distance(&emb[t.anchor * dim], &emb[t.positive * dim], dim);
    const double dn = distance(&emb[t.anchor * dim], &emb[t.negative * dim], dim);
    total += std::max(0.0L, static_cast<long double>(dp) - dn + margin);
  }
  return static_cast<double>(total / static_cast<long double>(triplets.size()));
}

template <typename Real>
Tensor<Real> triplet_loss(const Tensor<Real>& embeddings, const std::vector<int>& labels, double margin,
                          std::vector<Triplet>* mined) {
  if (embeddings.rank() != 2 || embeddings.dim(0) != static_cast<int>(labels.size()))
    fail(ErrorKind::ShapeMismatch, "triplet loss expects [B,D] embeddings with B labels");
  const int B = embeddings.dim(0), D = embeddings.dim(1);
  const std::vector<double> values(embeddings.data().begin(), embeddings.data().end());
  auto triplets = mine_hard_triplets(values, D, labels);
  if (mined) *mined = triplets;

  struct Term {
    Triplet t;
    double dp, dn;
    bool active;
  };
  std::vector<Term> terms;
  long double total = 0.0L;
  for (const auto& t : triplets) {
    const double dp = distance(&values[t.anchor * D], &values[t.positive * D], D);
    const double dn = distance(&values[t.anchor * D], &values[t.negative * D], D);
    const long double h = static_cast<long double>(dp) - dn + margin;
    terms.push_back({t, dp, dn, h > 0.0L});
    if (h > 0.0L) total += h;
  }
  // A NaN would otherwise vanish inside the hinge.
  const bool finite = std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
  const auto loss = finite ? static_cast<Real>(static_cast<double>(total / static_cast<long double>(B)))
                           : std::numeric_limits<Real>::quiet_NaN();
  Tensor<Real> in = embeddings;
  return nn::make_result<Real>({1}, {loss}, {&embeddings}, [in, terms, B, D, values](nn::TensorImpl<Real>& self) mutable {
    auto g = in.grad();
    const double scale = static_cast<double>(self.grad[0]) / B;
    const auto pull = [&](int a, int b, double d, double sign) {
      if (d <= 0.0) return;
      for (int k = 0; k < D; ++k) {
        const double u = sign * scale * (values[a * D + k] - values[b * D + k]) / d;
        g[a * D + k] += static_cast<Real>(u);
        g[b * D + k] -= static_cast<Real>(u);
      }
    };
    for (const auto& term : terms) {
      if (!term.active) continue;
      pull(term.t.anchor, term.t.positive, term.dp, 1.0);
      pull(term.t.anchor, term.t.negative, term.dn, -1.0);
    }
  });
}

BalancedSampler::BalancedSampler(const std::vector<int>& labels, int P, int K, std::uint64_t seed)
    : P_(P), K_(K), rng_(seed) {
  if (P < 2 || K < 2) fail(ErrorKind::InvalidConfig, "balanced sampler needs P >= 2 and K >= 2");
  std::map<int, std::vector<int>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(static_cast<int>(i));
  if (static_cast<int>(groups.size()) < P)
    fail(ErrorKind::InsufficientIdentities,
         "need " + std::to_string(P) + " identities per batch, training data has " + std::to_string(groups.size()));
  for (auto& [id, members] : groups) {
    ids_.push_back(id);
    members_.push_back(members);
  }
  pools_.resize(ids_.size());
}

int BalancedSampler::batches_per_pass() const noexcept {
  return static_cast<int>((ids_.size() + P_ - 1) / P_);
}

std::vector<int> BalancedSampler::draw(int identity) {
  const auto& members = members_[identity];
  std::vector<int> out;
  if (static_cast<int>(members.size()) < K_) {
    for (int k = 0; k < K_; ++k) out.push_back(members[rng_.below(members.size())]);
    return out;
  }
  auto& pool = pools_[identity];
  while (static_cast<int>(out.size()) < K_) {
    if (pool.empty()) {
      pool = members;
      rng_.shuffle(pool);
      // Never repeat a sample inside one batch when refilling mid-draw.
      std::stable_partition(pool.begin(), pool.end(),
                            [&](int m) { return std::find(out.begin(), out.end(), m) != out.end(); });
    }
    out.push_back(pool.back());
    pool.pop_back();
  }
  return out;
}

std::vector<std::vector<int>> BalancedSampler::next_epoch(int batches) {
  const std::size_t n = ids_.size();
  const std::size_t slots = static_cast<std::size_t>(std::max(batches, 0)) * P_;
  std::vector<int> stream;
  stream.reserve(slots);
  while (stream.size() < slots) {
    std::vector<int> round(n);
    for (std::size_t i = 0; i < n; ++i) round[i] = static_cast<int>(i);
    rng_.shuffle(round);
    const std::vector<int> open(stream.end() - static_cast<std::ptrdiff_t>(stream.size() % P_), stream.end());
    std::stable_partition(round.begin(), round.end(),
                          [&](int id) { return std::find(open.begin(), open.end(), id) == open.end(); });
    round.resize(std::min(n, slots - stream.size()));
    stream.insert(stream.end(), round.begin(), round.end());
  }
  std::vector<std::vector<int>> out;
  out.reserve(static_cast<std::size_t>(batches));
  for (std::size_t start = 0; start < slots; start += P_) {
    std::vector<int> batch;
    for (std::size_t k = start; k < start + P_; ++k) {
      const auto picks = draw(stream[k]);
      batch.insert(batch.end(), picks.begin(), picks.end());
    }
    out.push_back(std::move(batch));
  }
  return out;
}

std::vector<int> BalancedSampler::next_batch() {
  if (cursor_ >= pending_.size()) {
    pending_ = next_epoch(batches_per_pass());
    cursor_ = 0;
  }
  return pending_[cursor_++];
}

template class FusionHead<float>;
template class FusionHead<double>;
template std::vector<float> fuse(const FusionHead<float>&, const std::vector<float>&, const std::vector<float>&);
template std::vector<double> fuse(const FusionHead<double>&, const std::vector<double>&, const std::vector<double>&);
template Tensor<float> triplet_loss(const Tensor<float>&, const std::vector<int>&, double, std::vector<Triplet>*);
template Tensor<double> triplet_loss(const Tensor<double>&, const std::vector<int>&, double, std::vector<Triplet>*);

}  // namespace gaitwave::fusion
