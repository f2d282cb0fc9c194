#include <doctest.h>

#include <cstring>

#include "gaitwave/error.hpp"
#include "gaitwave/io.hpp"
#include "gaitwave/model.hpp"
#include "gaitwave/nn/checkpoint.hpp"
#include "helpers.hpp"

using namespace gaitwave;
using namespace gaitwave::nn;

namespace {

model::ModelConfig tiny() {
  model::ModelConfig cfg;
  cfg.stream.joints = cfg.reference.joints = 3;
  cfg.stream.scales = 6;
  cfg.stream.length = 9;
  cfg.stream.c_stem1 = 2;
  cfg.stream.c_stem2 = 3;
  cfg.stream.c_branch = 2;
  cfg.reference.channels = {4, 4};
  cfg.reference.kernel = 3;
  cfg.reference.feature_dim = 8;
  return cfg;
}

model::ModelInput<float> random_input(Rng& rng) {
  model::ModelInput<float> in;
  in.planes = Tensor<float>::zeros({4 * 3 * 2, 1, 6, 9});
  in.sequences = Tensor<float>::zeros({4, 6, 1, 10});
  for (auto& v : in.planes.data()) v = static_cast<float>(rng.normal());
  for (auto& v : in.sequences.data()) v = static_cast<float>(rng.normal());
  return in;
}

void train_steps(model::GaitModel<float>& m, Adam<float>& adam, int steps, std::uint64_t seed) {
  Rng rng(seed);
  for (int s = 0; s < steps; ++s) {
    const auto in = random_input(rng);
    m.params().zero_grad();
    backward(fusion::triplet_loss(m.embed(in, true), {0, 0, 1, 1}, 0.5));
    adam.step(1e-3);
  }
}

bool same_values(const ParamStore<float>& a, const ParamStore<float>& b) {
  for (std::size_t i = 0; i < a.entries().size(); ++i) {
    const auto x = a.entries()[i].tensor.data(), y = b.entries()[i].tensor.data();
    if (std::memcmp(x.data(), y.data(), x.size_bytes()) != 0) return false;
  }
  return true;
}

AdamConfig adam_cfg() {
  AdamConfig c;
  c.weight_decay = 1e-5;
  return c;
}

}  // namespace

TEST_SUITE("checkpoint") {
  TEST_CASE("capture and restore reproduce parameters and optimizer state bit-exactly") {
    model::GaitModel<float> a(tiny(), 3);
    Adam<float> adam_a(a.params(), adam_cfg());
    train_steps(a, adam_a, 3, 11);

    Sha256 hash{};
    hash[0] = 0xab;
    hash[31] = 0x01;
    test::TempDir dir("ckpt_rt");
    save_checkpoint(dir / "m.ckpt", capture(a.params(), &adam_a, hash, 3));
    const auto loaded = load_checkpoint(dir / "m.ckpt");
    CHECK(loaded.config_hash == hash);
    CHECK(loaded.seed == 3);
    CHECK(loaded.step == 3);
    CHECK(loaded.find("adam.m.fusion.fc.weight") != nullptr);
    CHECK(loaded.find("adam.v.wavelet_stream.fc.bias") != nullptr);
    CHECK(loaded.find("nope") == nullptr);

    model::GaitModel<float> b(tiny(), 99);
    Adam<float> adam_b(b.params(), adam_cfg());
    CHECK_FALSE(same_values(a.params(), b.params()));
    restore(loaded, b.params(), &adam_b);
    CHECK(same_values(a.params(), b.params()));
    CHECK(adam_b.steps() == 3);
    for (std::size_t i = 0; i < adam_a.slots().size(); ++i) {
      CHECK(adam_a.slots()[i].m == adam_b.slots()[i].m);
      CHECK(adam_a.slots()[i].v == adam_b.slots()[i].v);
    }

    // Continuing from the restored state follows the original trajectory.
    train_steps(a, adam_a, 2, 12);
    train_steps(b, adam_b, 2, 12);
    CHECK(same_values(a.params(), b.params()));

    // Re-encoding what was decoded is byte-identical.
    CHECK(encode_checkpoint(loaded) == io::read_file(dir / "m.ckpt"));
  }

  TEST_CASE("two identical trainings produce identical checkpoints") {
    std::string bytes[2];
    for (auto& out : bytes) {
      model::GaitModel<float> m(tiny(), 5);
      Adam<float> adam(m.params(), adam_cfg());
      train_steps(m, adam, 4, 21);
      out = encode_checkpoint(capture(m.params(), &adam, Sha256{}, 5));
    }
    CHECK(bytes[0] == bytes[1]);
  }

  TEST_CASE("binary layout") {
    Checkpoint c;
    c.seed = 7;
    c.step = 9;
    c.records.push_back({"w", {2, 3}, {1, 2, 3, 4, 5, 6}});
    const auto bytes = encode_checkpoint(c);
    CHECK(bytes.substr(0, 4) == "WCKP");
    CHECK(bytes.size() == 4 + 4 + 32 + 8 + 8 + (4 + 1 + 4 + 8 + 24));
    io::ByteReader r(bytes, "t");
    r.bytes(4);
    CHECK(r.u32() == kCheckpointVersion);
    r.bytes(32);
    CHECK(r.u64() == 7);
    CHECK(r.u64() == 9);
    CHECK(r.u32() == 1);
    CHECK(r.bytes(1) == "w");
    CHECK(r.u32() == 2);
    CHECK(r.u32() == 2);
    CHECK(r.u32() == 3);
    CHECK(r.f32() == 1.0f);
  }

  TEST_CASE("corrupt files and mismatched models are rejected") {
    Checkpoint c;
    c.records.push_back({"w", {2}, {1, 2}});
    const auto bytes = encode_checkpoint(c);
    const auto kind = [](const std::function<void()>& f) {
      try {
        f();
      } catch (const Error& e) {
        return e.kind();
      }
      return ErrorKind::Io;
    };
    CHECK(kind([&] { decode_checkpoint("WCKX" + bytes.substr(4), "x"); }) == ErrorKind::MalformedFile);
    CHECK(kind([&] { decode_checkpoint(bytes.substr(0, bytes.size() - 2), "x"); }) == ErrorKind::MalformedFile);
    auto bad_version = bytes;
    bad_version[4] = 9;
    CHECK(kind([&] { decode_checkpoint(bad_version, "x"); }) == ErrorKind::MalformedFile);

    model::GaitModel<float> m(tiny(), 1);
    CHECK(kind([&] { restore(c, m.params(), static_cast<Adam<float>*>(nullptr)); }) == ErrorKind::ShapeMismatch);
    auto full = capture(m.params(), static_cast<const Adam<float>*>(nullptr), Sha256{}, 1);
    full.records[0].shape.push_back(1);
    full.records[0].values.clear();
    CHECK(kind([&] { restore(full, m.params(), static_cast<Adam<float>*>(nullptr)); }) == ErrorKind::ShapeMismatch);
    CHECK(kind([] { load_checkpoint("/nonexistent/m.ckpt"); }) == ErrorKind::Io);
  }

  TEST_CASE("double-precision stores round-trip through float32 payloads") {
    model::GaitModel<double> m(tiny(), 2);
    const auto c = capture(m.params(), static_cast<const Adam<double>*>(nullptr), Sha256{}, 2);
    model::GaitModel<double> n(tiny(), 8);
    restore(c, n.params(), static_cast<Adam<double>*>(nullptr));
    for (std::size_t i = 0; i < m.params().entries().size(); ++i) {
      const auto x = m.params().entries()[i].tensor.data(), y = n.params().entries()[i].tensor.data();
      for (std::size_t k = 0; k < x.size(); ++k) CHECK(y[k] == static_cast<double>(static_cast<float>(x[k])));
    }
  }
}
