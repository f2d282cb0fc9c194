#include "gaitwave/nn/checkpoint.hpp"

#include <algorithm>

#include "gaitwave/io.hpp"

namespace gaitwave::nn {

namespace {

constexpr std::string_view kMagic = "WCKP";

template <typename Src>
std::vector<float> to_f32(const Src& src) {
  std::vector<float> out(src.size());
  std::transform(src.begin(), src.end(), out.begin(), [](auto v) { return static_cast<float>(v); });
  return out;
}

const CheckpointRecord& require_record(const Checkpoint& ckpt, const std::string& name, std::size_t count) {
  const auto* rec = ckpt.find(name);
  if (!rec) fail(ErrorKind::ShapeMismatch, "checkpoint has no record " + name);
  if (rec->values.size() != count)
    fail(ErrorKind::ShapeMismatch, "checkpoint record " + name + " has " + std::to_string(rec->values.size()) +
                                       " values, expected " + std::to_string(count));
  return *rec;
}

}  // namespace

const CheckpointRecord* Checkpoint::find(const std::string& name) const {
  for (const auto& r : records)
    if (r.name == name) return &r;
  return nullptr;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  io::ByteWriter w;
  w.bytes(kMagic);
  w.u32(kCheckpointVersion);
  w.bytes({reinterpret_cast<const char*>(ckpt.config_hash.data()), ckpt.config_hash.size()});
  w.u64(ckpt.seed);
  w.u64(ckpt.step);
  for (const auto& r : ckpt.records) {
    if (numel(r.shape) != r.values.size()) fail(ErrorKind::ShapeMismatch, "record " + r.name + " size/shape mismatch");
    w.u32(static_cast<std::uint32_t>(r.name.size()));
    w.bytes(r.name);
    w.u32(static_cast<std::uint32_t>(r.shape.size()));
    for (int d : r.shape) w.u32(static_cast<std::uint32_t>(d));
    for (float v : r.values) w.f32(v);
  }
  return w.str();
}

Checkpoint decode_checkpoint(std::string_view bytes, const std::string& origin) {
  io::ByteReader r(bytes, origin);
  if (r.bytes(4) != kMagic) fail(ErrorKind::MalformedFile, origin + ": not a checkpoint (bad magic)");
  const auto version = r.u32();
  if (version != kCheckpointVersion)
    fail(ErrorKind::MalformedFile, origin + ": unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  const auto hash = r.bytes(ckpt.config_hash.size());
  std::copy(hash.begin(), hash.end(), reinterpret_cast<char*>(ckpt.config_hash.data()));
  ckpt.seed = r.u64();
  ckpt.step = r.u64();
  while (!r.done()) {
    CheckpointRecord rec;
    const auto len = r.u32();
    rec.name = std::string(r.bytes(len));
    const auto rank = r.u32();
    if (rank > 8) fail(ErrorKind::MalformedFile, origin + ": implausible rank for record " + rec.name);
    for (std::uint32_t i = 0; i < rank; ++i) rec.shape.push_back(static_cast<int>(r.u32()));
    const auto n = numel(rec.shape);
    if (n > bytes.size()) fail(ErrorKind::MalformedFile, origin + ": record " + rec.name + " exceeds file size");
    rec.values.resize(n);
    for (auto& v : rec.values) v = r.f32();
    ckpt.records.push_back(std::move(rec));
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  io::write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path), path.string());
}

template <typename Real>
Checkpoint capture(const ParamStore<Real>& store, const Adam<Real>* adam, const Sha256& config_hash,
                   std::uint64_t seed) {
  Checkpoint ckpt;
  ckpt.config_hash = config_hash;
  ckpt.seed = seed;
  ckpt.step = adam ? adam->steps() : 0;
  for (const auto& e : store.entries()) ckpt.records.push_back({e.name, e.tensor.shape(), to_f32(e.tensor.data())});
  if (adam)
    for (const auto& s : adam->slots()) {
      ckpt.records.push_back({"adam.m." + s.name, s.param.shape(), to_f32(s.m)});
      ckpt.records.push_back({"adam.v." + s.name, s.param.shape(), to_f32(s.v)});
    }
  return ckpt;
}

template <typename Real>
void restore(const Checkpoint& ckpt, ParamStore<Real>& store, Adam<Real>* adam) {
  for (const auto& e : store.entries()) {
    const auto& rec = require_record(ckpt, e.name, e.tensor.numel());
    if (rec.shape != e.tensor.shape())
      fail(ErrorKind::ShapeMismatch, "checkpoint record " + e.name + " has shape " + shape_str(rec.shape) +
                                         ", model expects " + shape_str(e.tensor.shape()));
    auto dst = Tensor<Real>(e.tensor).data();
    std::transform(rec.values.begin(), rec.values.end(), dst.begin(),
                   [](float v) { return static_cast<Real>(v); });
  }
  if (adam) {
    for (auto& s : adam->slots()) {
      const auto& m = require_record(ckpt, "adam.m." + s.name, s.m.size());
      const auto& v = require_record(ckpt, "adam.v." + s.name, s.v.size());
      std::transform(m.values.begin(), m.values.end(), s.m.begin(), [](float x) { return static_cast<Real>(x); });
      std::transform(v.values.begin(), v.values.end(), s.v.begin(), [](float x) { return static_cast<Real>(x); });
    }
    adam->set_steps(ckpt.step);
  }
}

template Checkpoint capture(const ParamStore<float>&, const Adam<float>*, const Sha256&, std::uint64_t);
template Checkpoint capture(const ParamStore<double>&, const Adam<double>*, const Sha256&, std::uint64_t);
template void restore(const Checkpoint&, ParamStore<float>&, Adam<float>*);
template void restore(const Checkpoint&, ParamStore<double>&, Adam<double>*);

}  // namespace gaitwave::nn
