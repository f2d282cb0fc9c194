#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <set>

#include "gaitwave/error.hpp"
#include "gaitwave/eval.hpp"
#include "gaitwave/oracle.hpp"
#include "helpers.hpp"

using namespace gaitwave;
using namespace gaitwave::eval;
using skeleton::Condition;

namespace {

EmbeddingRow row(std::string id, int subject, int angle, std::vector<double> e) {
  return {std::move(id), subject, Condition::NM, angle, std::move(e)};
}

std::vector<double> unit(Rng& rng, int dim) {
  std::vector<double> v(dim);
  double s = 0;
  for (auto& x : v) {
    x = rng.normal();
    s += x * x;
  }
  for (auto& x : v) x /= std::sqrt(s);
  return v;
}

bool same(const EvalReport& a, const EvalReport& b) {
  if (a.cells.size() != b.cells.size() || a.set_means != b.set_means || a.overall_mean != b.overall_mean) return false;
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    const auto &x = a.cells[i], &y = b.cells[i];
    if (x.probe_set != y.probe_set || x.angle_deg != y.angle_deg || x.correct != y.correct || x.total != y.total ||
        x.rank1 != y.rank1)
      return false;
  }
  return true;
}

// CASIA-B layout without files: 124 subjects, NM 1-6, BG 1-2, CL 1-2, 11 views.
skeleton::DatasetManifest casia_manifest() {
  skeleton::DatasetManifest m;
  const std::pair<Condition, int> conds[] = {{Condition::NM, 6}, {Condition::BG, 2}, {Condition::CL, 2}};
  for (int s = 1; s <= 124; ++s)
    for (auto [c, n] : conds)
      for (int k = 1; k <= n; ++k)
        for (int a = 0; a <= 180; a += 18) {
          skeleton::ManifestEntry e;
          char id[48];
          std::snprintf(id, sizeof id, "%03d-%s-%02d-%03d", s, c == Condition::NM ? "nm" : c == Condition::BG ? "bg" : "cl", k, a);
          e.sequence_id = id;
          e.path = std::string(id) + ".csv";
          e.subject_id = s;
          e.condition = c;
          e.angle_deg = a;
          m.entries.push_back(e);
        }
  skeleton::finalize_manifest(m);
  return m;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("probes duplicated from the gallery at another angle are all found") {
    Rng rng(1);
    EmbeddingTable gallery;
    ProbeSet probes{"NM", {}};
    for (int s = 0; s < 10; ++s) {
      auto e = unit(rng, 8);
      gallery.push_back(row("g" + std::to_string(s), s, 0, e));
      probes.rows.push_back(row("p" + std::to_string(s), s, 90, e));
    }
    const auto r = rank1_eval(gallery, {probes}, true);
    REQUIRE(r.cells.size() == 1);
    CHECK(r.cells[0].rank1 == 100.0);
    CHECK(r.cells[0].total == 10);
    CHECK(r.overall_mean == 100.0);
  }

  TEST_CASE("hand dataset: identical view is ignored") {
    // Gallery: subject 1 at angle 0 sits on the probe, subject 2 at 18 is
    // nearer than subject 1 at 18.
    EmbeddingTable gallery{row("a", 1, 0, {0.0, 0.0}), row("b", 1, 18, {3.0, 0.0}), row("c", 2, 18, {1.0, 0.0}),
                           row("d", 2, 0, {0.1, 0.0})};
    ProbeSet probe{"NM", {row("q", 1, 0, {0.0, 0.0})}};
    // With exclusion only b and c remain; c is closer, so the probe is missed.
    CHECK(rank1_eval(gallery, {probe}, true).cells[0].correct == 0);
    // Without exclusion a (distance 0) wins.
    CHECK(rank1_eval(gallery, {probe}, false).cells[0].correct == 1);
    CHECK(rank1_eval(gallery, {probe}, true).cells[0].rank1 == 0.0);
    CHECK(same(rank1_eval(gallery, {probe}, true), oracle::brute_force_rank1(gallery, {probe}, true)));
  }

  TEST_CASE("distance ties go to the smallest sequence id") {
    EmbeddingTable gallery{row("z9", 2, 0, {1.0}), row("a1", 1, 0, {-1.0})};
    ProbeSet probe{"NM", {row("q", 1, 36, {0.0})}};
    CHECK(rank1_eval(gallery, {probe}, true).cells[0].correct == 1);
    gallery[1].subject_id = 3;
    CHECK(rank1_eval(gallery, {probe}, true).cells[0].correct == 0);
  }

  TEST_CASE("identical-view exclusion never helps on the duplicate-gallery fixture") {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
      EmbeddingTable gallery;
      ProbeSet probes{"NM", {}};
      for (int s = 0; s < 12; ++s)
        for (int a : {0, 18, 36}) {
          auto e = unit(rng, 4);
          gallery.push_back(row("g" + std::to_string(s) + "_" + std::to_string(a), s, a, e));
          if (a == 18) probes.rows.push_back(row("p" + std::to_string(s), s, 18, e));
        }
      const auto with = rank1_eval(gallery, {probes}, true);
      const auto without = rank1_eval(gallery, {probes}, false);
      CHECK(without.overall_mean == 100.0);
      CHECK(with.overall_mean <= without.overall_mean);
    }
  }

  TEST_CASE("matches exhaustive search on random datasets") {
    Rng rng(3);
    for (int trial = 0; trial < 30; ++trial) {
      const int subjects = 2 + static_cast<int>(rng.below(8));
      const bool lattice = trial % 2 == 1;
      EmbeddingTable gallery;
      std::vector<ProbeSet> sets{{"A", {}}, {"B", {}}};
      int serial = 0;
      for (int s = 0; s < subjects; ++s)
        for (int a : {0, 18, 36, 54})
          for (int role = 0; role < 3; ++role) {
            std::vector<double> e(3);
            for (auto& x : e) x = lattice ? static_cast<double>(rng.below(2)) : rng.normal();
            char id[16];
            std::snprintf(id, sizeof id, "q%05d", static_cast<int>(rng.below(100000)));
            auto r = row(std::string(id) + "_" + std::to_string(serial++), s, a, e);
            (role == 0 ? gallery : sets[role - 1].rows).push_back(r);
          }
      for (bool ex : {true, false}) CHECK(same(rank1_eval(gallery, sets, ex), oracle::brute_force_rank1(gallery, sets, ex)));
    }
  }

  TEST_CASE("random embeddings land at chance level") {
    Rng rng(4);
    double total = 0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
      EmbeddingTable gallery;
      ProbeSet probes{"NM", {}};
      for (int s = 0; s < 50; ++s) {
        gallery.push_back(row("g" + std::to_string(s), s, 0, unit(rng, 16)));
        probes.rows.push_back(row("p" + std::to_string(s), s, 0, unit(rng, 16)));
      }
      total += rank1_eval(gallery, {probes}, false).overall_mean;
    }
    CHECK(std::abs(total / trials - 2.0) < 1.5);
  }

  TEST_CASE("means follow the per-angle then per-set convention") {
    EmbeddingTable gallery{row("g1", 1, 0, {0.0}), row("g2", 2, 0, {10.0})};
    ProbeSet nm{"NM", {row("a", 1, 18, {0.1}), row("b", 2, 18, {0.2}), row("c", 1, 36, {0.3})}};
    ProbeSet bg{"BG", {row("d", 2, 18, {9.0})}};
    const auto r = rank1_eval(gallery, {nm, bg}, true);
    REQUIRE(r.cells.size() == 3);
    CHECK(r.cells[0].rank1 == 50.0);
    CHECK(r.cells[1].rank1 == 100.0);
    CHECK(r.set_mean("NM") == 75.0);
    CHECK(r.set_mean("BG") == 100.0);
    CHECK(r.overall_mean == 87.5);
    CHECK_THROWS_AS(r.set_mean("CL"), Error);
    CHECK(format_report(r, "tag") ==
          "# tag\nprobe_set,angle,rank1\nNM,18,50\nNM,36,100\nBG,18,100\nNM,mean,75\nBG,mean,100\noverall,mean,87.5\n");
    for (const auto& c : r.cells) {
      CHECK(c.rank1 >= 0.0);
      CHECK(c.rank1 <= 100.0);
    }
  }

  TEST_CASE("empty candidate sets are errors") {
    EmbeddingTable gallery{row("g", 1, 0, {0.0})};
    ProbeSet probe{"NM", {row("p", 1, 0, {0.0})}};
    try {
      rank1_eval(gallery, {probe}, true);
      FAIL("expected EmptyCandidateSet");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::EmptyCandidateSet);
    }
    CHECK_THROWS_AS(rank1_eval({}, {probe}, false), Error);
  }

  TEST_CASE("synthetic protocol split") {
    skeleton::DatasetManifest m;
    for (int s = 1; s <= 3; ++s)
      for (int q = 1; q <= 8; ++q) {
        skeleton::ManifestEntry e;
        e.subject_id = s;
        e.sequence_id = "s" + std::to_string(s) + "_q" + std::to_string(q);
        m.entries.push_back(e);
      }
    skeleton::finalize_manifest(m);
    const auto p = synthetic_protocol(8, 2);
    CHECK_FALSE(p.exclude_identical_view);
    const auto split = apply_protocol(m, p);
    CHECK(split.train.size() == 18);
    CHECK(split.gallery == split.train);
    REQUIRE(split.probes.size() == 2);
    CHECK(split.probes[0].first == "split1");
    CHECK(split.probes[0].second.size() == 3);
    CHECK(m.entries[split.probes[1].second[0]].ordinal == 8);
    CHECK_THROWS_AS(synthetic_protocol(8, 8), Error);
  }

  TEST_CASE("CASIA-B protocol split") {
    const auto m = casia_manifest();
    const auto split = apply_protocol(m, casia_b_protocol());
    CHECK(split.train.size() == 74u * 10 * 11);
    CHECK(split.gallery.size() == 50u * 4 * 11);
    REQUIRE(split.probes.size() == 3);
    CHECK(split.probes[0].first == "NM");
    CHECK(split.probes[1].first == "BG");
    CHECK(split.probes[2].first == "CL");
    for (const auto& [name, rows] : split.probes) CHECK(rows.size() == 50u * 2 * 11);
    std::set<int> seen;
    for (int i : split.train) CHECK(m.entries[i].subject_id <= 74);
    for (int i : split.gallery) {
      CHECK(m.entries[i].subject_id >= 75);
      CHECK(m.entries[i].condition == Condition::NM);
      CHECK(m.entries[i].ordinal <= 4);
      seen.insert(i);
    }
    for (const auto& [name, rows] : split.probes)
      for (int i : rows) CHECK(seen.insert(i).second);
    CHECK(casia_b_protocol().exclude_identical_view);
  }

  TEST_CASE("protocol validation") {
    skeleton::DatasetManifest m;
    for (int q = 1; q <= 3; ++q) {
      skeleton::ManifestEntry e;
      e.subject_id = 1;
      e.sequence_id = "x" + std::to_string(q);
      m.entries.push_back(e);
    }
    skeleton::finalize_manifest(m);
    EvalProtocol p = synthetic_protocol(3, 1);
    p.probe_sets[0].second = {std::nullopt, 2, 3};  // overlaps the gallery
    CHECK_THROWS_AS(apply_protocol(m, p), Error);
    CHECK_THROWS_AS(apply_protocol(m, casia_b_protocol()), Error);
    auto orphan = m;
    orphan.entries[2].subject_id = 2;
    skeleton::finalize_manifest(orphan);
    CHECK_THROWS_AS(apply_protocol(orphan, synthetic_protocol(3, 1)), Error);
  }
}
