#include <sstream>

#include <catch_amalgamated.hpp>

#include "gnnhls/characterize.hpp"
#include "gnnhls/generate.hpp"
#include "oracles.hpp"

using namespace gnnhls;
using Catch::Approx;

namespace {

constexpr ModelKind kAll[] = {ModelKind::gcn,  ModelKind::graphsage, ModelKind::gin,
                              ModelKind::gat,  ModelKind::monet,     ModelKind::gatedgcn};

struct Problem {
  CsrGraph g;
  Fixture f;
};

Problem problem(ModelKind k, const Dims& d, std::size_t n, double avg, std::uint64_t seed,
                Topology topo = Topology::regular_like) {
  auto el = generate({n, avg, topo, seed});
  auto g = build_csr(el);
  auto f = make_fixture(k, d, n, g.num_edges(), seed);
  return {std::move(g), std::move(f)};
}

Trace of_events(std::vector<TraceEvent> ev) {
  Trace t;
  t.events = std::move(ev);
  return t;
}

TraceEvent mem(std::uint64_t a) { return {EventKind::memory, Access::read, a}; }

std::vector<std::uint64_t> addresses(const Trace& t) {
  std::vector<std::uint64_t> out;
  for (const auto& e : t.events)
    if (e.kind == EventKind::memory) out.push_back(e.address);
  return out;
}

}  // namespace

TEST_CASE("isolated GCN node touches only its offsets, U and output") {
  const CsrGraph g = build_csr(EdgeList{2, {}});
  const auto f = make_fixture(ModelKind::gcn, {2, 1, 2}, 2, 0, 7);
  const std::vector<NodeId> sample{1};
  const auto t = run_traced(g, f.H, f.params, f.edge, sample);
  const auto map = AddressMap::for_problem(g, f.params);
  auto in = [&](ArrayId a, const TraceEvent& e) {
    return e.kind == EventKind::memory && e.address >= map.base(a) &&
           e.address < map.base(a) + kRegionWords;
  };
  std::size_t u_reads = 0, feature_reads = 0, offset_reads = 0, writes = 0;
  for (const auto& e : t.events) {
    u_reads += in(ArrayId::w_u, e) && e.access == Access::read;
    feature_reads += in(ArrayId::features, e);
    offset_reads += in(ArrayId::row_offsets, e);
    writes += e.access == Access::write;
  }
  CHECK(u_reads == 4);
  CHECK(feature_reads == 0);
  CHECK(offset_reads == 2);
  CHECK(writes == 2);
  // 2x2 multiply-accumulate plus 2 ReLUs, no aggregation adds.
  CHECK(instruction_mix(t).compute == 2 * 4 + 2);
}

TEST_CASE("instruction mix fractions") {
  std::vector<TraceEvent> ev;
  for (int k = 0; k < 2; ++k) ev.push_back({EventKind::branch, Access::none, 0});
  for (int k = 0; k < 3; ++k) ev.push_back(mem(k));
  for (int k = 0; k < 5; ++k) ev.push_back({EventKind::compute, Access::none, 0});
  const auto m = instruction_mix(of_events(ev));
  CHECK(m.fraction(EventKind::branch) == Approx(0.2));
  CHECK(m.fraction(EventKind::memory) == Approx(0.3));
  CHECK(m.fraction(EventKind::compute) == Approx(0.5));

  const auto pure = instruction_mix(of_events({mem(1), mem(2)}));
  CHECK(pure.fraction(EventKind::memory) == 1.0);
  CHECK(pure.fraction(EventKind::branch) == 0.0);

  CHECK_THROWS_AS(instruction_mix(Trace{}), Error);
}

TEST_CASE("spatial score on synthetic address streams") {
  std::vector<TraceEvent> seq;
  for (std::uint64_t a = 100; a < 200; ++a) seq.push_back(mem(a));
  CHECK(spatial_score(of_events(seq)) == 1.0);

  std::vector<TraceEvent> far;
  for (int k = 0; k < 50; ++k) far.push_back(mem(k % 2 ? kRegionWords : 0));
  CHECK(spatial_score(of_events(far)) < 1e-6);

  CHECK(spatial_score(of_events({mem(5), mem(5), mem(5)})) == 0.0);
  CHECK_THROWS_AS(spatial_score(of_events({mem(5)})), Error);
  CHECK_THROWS_AS(temporal_score(Trace{}), Error);
}

TEST_CASE("temporal score on synthetic address streams") {
  // a b a: second a has reuse distance 1.
  const double w1 = (16.0 - 1.0) / 16.0;
  CHECK(temporal_score(of_events({mem(1), mem(2), mem(1)})) == Approx(w1 / 3));
  // Immediate reuse weighs 1; cold touches weigh 0.
  CHECK(temporal_score(of_events({mem(9), mem(9)})) == Approx(0.5));
  CHECK(temporal_score(of_events({mem(1), mem(2), mem(3)})) == 0.0);
  CHECK(temporal_weight(65535) == 0.0);
  CHECK(temporal_weight(70000) == 0.0);
}

TEST_CASE("locality scores match the brute-force oracles on random streams") {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t len = 2 + rng.below(400);
    const std::size_t span = 1 + rng.below(64);
    std::vector<TraceEvent> ev;
    std::vector<std::uint64_t> a;
    for (std::size_t k = 0; k < len; ++k) {
      a.push_back(rng.below(span) * (trial % 3 == 0 ? kRegionWords : 1));
      ev.push_back(mem(a.back()));
      if (rng.below(3) == 0) ev.push_back({EventKind::compute, Access::none, 0});
    }
    const auto t = of_events(ev);
    CHECK(spatial_score(t) == Approx(oracle::spatial(a)).epsilon(1e-12));
    CHECK(temporal_score(t) == Approx(oracle::temporal_scan(a)).epsilon(1e-12));
    CHECK(temporal_score(t) == Approx(oracle::temporal_stack(a)).epsilon(1e-12));
  }
}

TEST_CASE("locality scores match the oracles on kernel traces") {
  for (auto k : kAll) {
    CAPTURE(to_string(k));
    const Dims d = square_dims(k, 4);
    const auto p = problem(k, d, 30, 3, 11);
    const auto sample = sample_nodes(p.g, 10, 5);
    const auto t = run_traced(p.g, p.f.H, p.f.params, p.f.edge, sample);
    const auto a = addresses(t);
    REQUIRE(a.size() >= 2);
    CHECK(spatial_score(t) == Approx(oracle::spatial(a)).epsilon(1e-12));
    CHECK(temporal_score(t) == Approx(oracle::temporal_scan(a)).epsilon(1e-12));
    CHECK(temporal_score(t) == Approx(oracle::temporal_stack(a)).epsilon(1e-12));

    // Streaming statistics agree with the stored trace.
    const auto c = characterize(p.g, p.f.H, p.f.params, p.f.edge, sample);
    const auto m = instruction_mix(t);
    CHECK(c.mix.branch == m.branch);
    CHECK(c.mix.memory == m.memory);
    CHECK(c.mix.compute == m.compute);
    CHECK(c.scores.spatial == Approx(spatial_score(t)).epsilon(1e-12));
    CHECK(c.scores.temporal == Approx(temporal_score(t)).epsilon(1e-12));
  }
}

TEST_CASE("scores are invariant to shifting all base addresses") {
  for (auto k : kAll) {
    CAPTURE(to_string(k));
    const auto p = problem(k, square_dims(k, 4), 25, 4, 2);
    const auto sample = sample_nodes(p.g, 8, 1);
    const auto map = AddressMap::for_problem(p.g, p.f.params);
    const auto moved = map.shifted(kRegionWords * 37 + 12345);
    const auto a = run_traced(p.g, p.f.H, p.f.params, p.f.edge, sample, "", &map);
    const auto b = run_traced(p.g, p.f.H, p.f.params, p.f.edge, sample, "", &moved);
    CHECK(spatial_score(a) == spatial_score(b));
    CHECK(temporal_score(a) == temporal_score(b));
  }
}

TEST_CASE("traces are deterministic and address regions do not overlap") {
  for (auto k : kAll) {
    CAPTURE(to_string(k));
    const auto p = problem(k, square_dims(k, 6), 40, 5, 9, Topology::powerlaw_like);
    const auto sample = sample_nodes(p.g, 12, 4);
    const auto a = run_traced(p.g, p.f.H, p.f.params, p.f.edge, sample);
    const auto b = run_traced(p.g, p.f.H, p.f.params, p.f.edge, sample);
    CHECK(a.events == b.events);

    const auto map = AddressMap::for_problem(p.g, p.f.params);
    for (std::size_t x = 1; x < kArrayCount; ++x) {
      const auto lo = map.base(static_cast<ArrayId>(x - 1));
      const auto hi = map.base(static_cast<ArrayId>(x));
      CHECK(hi > lo);
      CHECK(hi % kRegionWords == 0);
    }
  }
}

TEST_CASE("trace length scales linearly with sample size on a regular graph") {
  for (auto k : kAll) {
    CAPTURE(to_string(k));
    const auto p = problem(k, square_dims(k, 4), 64, 4, 21);
    const auto all = sample_nodes(p.g, 64, 8);
    const std::vector<NodeId> one(all.begin(), all.begin() + 1);
    const auto base = run_traced(p.g, p.f.H, p.f.params, p.f.edge, one).events.size();
    for (std::size_t s : {2u, 8u, 32u, 64u}) {
      const std::vector<NodeId> part(all.begin(), all.begin() + s);
      const auto len = run_traced(p.g, p.f.H, p.f.params, p.f.edge, part).events.size();
      CHECK(len == s * base);
    }
  }
}

TEST_CASE("trace edge cases") {
  const auto p = problem(ModelKind::gcn, {4, 1, 4}, 10, 2, 1);
  const std::vector<NodeId> none;
  const auto t = run_traced(p.g, p.f.H, p.f.params, p.f.edge, none);
  CHECK(t.events.empty());
  CHECK_THROWS_AS(instruction_mix(t), Error);

  const std::vector<NodeId> bad{3, 10};
  CHECK_THROWS_AS(run_traced(p.g, p.f.H, p.f.params, p.f.edge, bad), RangeError);
  CHECK_THROWS_AS(sample_nodes(p.g, 11, 1), RangeError);
}

TEST_CASE("GNNT dump round-trips") {
  const auto p = problem(ModelKind::gin, {3, 1, 3}, 12, 3, 4);
  const auto sample = sample_nodes(p.g, 4, 2);
  const auto t = run_traced(p.g, p.f.H, p.f.params, p.f.edge, sample);
  std::stringstream ss;
  write_trace(ss, t);
  CHECK(ss.str().size() == 4 + 10 * t.events.size());
  CHECK(ss.str().substr(0, 4) == "GNNT");
  CHECK(read_trace_events(ss) == t.events);

  std::stringstream junk("GNNX");
  CHECK_THROWS_AS(read_trace_events(junk), ParseError);
}

TEST_CASE("dense graphs at default dims: compute dominates, anisotropic reuse is high",
          "[dense]") {
  // Average degree 10, default layer sizes, 40 sampled targets.
  std::map<ModelKind, Characterization> res;
  for (auto k : kAll) {
    const auto p = problem(k, default_dims(k), 300, 10, 17);
    const auto sample = sample_nodes(p.g, 40, 3);
    res[k] = characterize(p.g, p.f.H, p.f.params, p.f.edge, sample);
    const auto& m = res[k].mix;
    CAPTURE(to_string(k), m.branch, m.memory, m.compute);
    CHECK(m.compute > m.memory);
    CHECK(m.compute > m.branch);
  }
  double iso = 0;
  for (auto k : {ModelKind::gcn, ModelKind::graphsage, ModelKind::gin})
    iso = std::max(iso, res[k].scores.temporal);
  for (auto k : {ModelKind::gat, ModelKind::monet, ModelKind::gatedgcn}) {
    CAPTURE(to_string(k), res[k].scores.temporal, iso);
    CHECK(res[k].scores.temporal >= iso);
  }
}
