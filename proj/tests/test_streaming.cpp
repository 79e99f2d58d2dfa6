#include <catch_amalgamated.hpp>

#include "gnnhls/generate.hpp"
#include "gnnhls/streaming.hpp"
#include "oracles.hpp"

using namespace gnnhls;

namespace {

struct Case {
  CsrGraph g;
  Fixture fx;
};

Case make_case(ModelKind m, const Dims& d, std::size_t n, double avg, Topology t,
               std::uint64_t seed) {
  auto g = build_csr(generate({n, avg, t, seed}));
  auto fx = make_fixture(m, d, n, g.num_edges(), seed);
  return {std::move(g), std::move(fx)};
}

LayerOutput run_stream(const Case& c, std::size_t cus, Scheduler s,
                   std::optional<std::uint64_t> cap = std::nullopt) {
  const auto kind = kind_of(c.fx.params);
  const auto spec = build_pipeline(kind, dims_of(c.fx.params), cus);
  return execute_streaming(spec, c.g, c.fx.H, c.fx.params, c.fx.edge, {s, cap});
}

void check_close(const LayerOutput& got, const LayerOutput& want, double tol = 1e-4) {
  CHECK(max_relative_error(got.output, want.output) <= tol);
  if (want.attention.rows()) CHECK(max_relative_error(got.attention, want.attention) <= tol);
  if (want.edge_output.rows())
    CHECK(max_relative_error(got.edge_output, want.edge_output) <= tol);
}

}  // namespace

TEST_CASE("GCN on a four-node graph matches the dense oracle") {
  const EdgeList el{4, {{0, 1}, {2, 1}, {3, 1}, {1, 0}, {0, 2}}};
  const auto g = build_csr(el);
  const auto fx = make_fixture(ModelKind::gcn, Dims{6, 1, 6}, 4, g.num_edges(), 21);
  const auto& p = std::get<GcnParams>(fx.params);
  const auto want = oracle::gcn(el, oracle::to_mat(fx.H), p);
  for (auto s : {Scheduler::threaded, Scheduler::round_robin}) {
    const auto got = execute_streaming(build_pipeline(ModelKind::gcn, Dims{6, 1, 6}, 2), g, fx.H,
                                       fx.params, {}, {s, std::nullopt});
    CHECK(oracle::rel_error(got.output, want) <= 1e-4);
    CHECK(max_relative_error(got.output, gcn_forward(g, fx.H, p)) <= 1e-4);
  }
}

TEST_CASE("streaming equals the reference for every model, size and width") {
  for (ModelKind m : kAllModels)
    for (std::size_t d : {std::size_t{8}, std::size_t{32}, std::size_t{0}})
      for (std::size_t n : {std::size_t{7}, std::size_t{120}, std::size_t{1000}}) {
        const Dims dims = d ? square_dims(m, d) : default_dims(m);
        if (n == 1000 && d != 8) continue;  // the large graph is run once per model
        const auto topo = n % 2 ? Topology::powerlaw_like : Topology::regular_like;
        INFO(to_string(m) << " d " << dims.in << " n " << n);
        const auto c = make_case(m, dims, n, 3.0, topo, 40 + n + d);
        const auto want = reference_forward(c.g, c.fx.H, c.fx.params, c.fx.edge);
        check_close(run_stream(c, default_num_cus(m), Scheduler::round_robin), want);
        if (n <= 120) check_close(run_stream(c, default_num_cus(m), Scheduler::threaded), want);
      }
}

TEST_CASE("graphs without edges reduce to the node path") {
  for (ModelKind m : kAllModels) {
    INFO(to_string(m));
    const auto g = build_csr(EdgeList{9, {}});
    const auto fx = make_fixture(m, square_dims(m, 8), 9, 0, 3);
    const auto want = reference_forward(g, fx.H, fx.params, fx.edge);
    for (auto s : {Scheduler::threaded, Scheduler::round_robin}) {
      const auto got = execute_streaming(build_pipeline(m, square_dims(m, 8), 2), g, fx.H,
                                         fx.params, fx.edge, {s, std::nullopt});
      CHECK(max_relative_error(got.output, want.output) <= 1e-4);
    }
  }
}

TEST_CASE("GAT attention from the pipeline is a per-row distribution matching the oracle") {
  const EdgeList el{5, {{1, 0}, {2, 0}, {3, 0}, {0, 1}, {4, 1}, {4, 2}, {1, 3}, {2, 3}, {3, 3}}};
  const auto g = build_csr(el);
  const Dims dims{6, 3, 4};
  const auto fx = make_fixture(ModelKind::gat, dims, 5, g.num_edges(), 8);
  const auto& p = std::get<GatParams>(fx.params);
  const auto got = execute_streaming(build_pipeline(ModelKind::gat, dims, 1), g, fx.H, fx.params);
  const auto want = oracle::gat(el, oracle::to_mat(fx.H), p);
  CHECK(oracle::rel_error(got.output, want.out) <= 1e-4);
  const auto cols = g.col_indices();
  for (NodeId i = 0; i < 5; ++i) {
    const auto [b, e] = std::pair{g.row_offsets()[i], g.row_offsets()[i + 1]};
    for (std::size_t k = 0; k < dims.heads; ++k) {
      double s = 0.0;
      for (auto q = b; q < e; ++q) {
        s += got.attention(q, k);
        CHECK(got.attention(q, k) ==
              Catch::Approx(want.alpha.at({cols[q], i})[k]).epsilon(1e-5).margin(1e-7));
      }
      if (e > b) CHECK(s == Catch::Approx(1.0).margin(1e-6));
    }
  }
}

TEST_CASE("outputs are bit-identical across capacities, CU counts and schedulers") {
  for (ModelKind m : kAllModels) {
    INFO(to_string(m));
    const auto c = make_case(m, square_dims(m, 8), 90, 4.0, Topology::powerlaw_like, 77);
    const auto base = run_stream(c, 1, Scheduler::round_robin);
    for (std::uint64_t cap : {std::uint64_t{1}, std::uint64_t{2}, std::uint64_t{16}, kUnbounded})
      for (std::size_t cus : {1, 3})
        for (auto s : {Scheduler::round_robin, Scheduler::threaded}) {
          const auto got = run_stream(c, cus, s, cap);
          CHECK(got.output == base.output);
          CHECK(got.attention == base.attention);
          CHECK(got.edge_output == base.edge_output);
        }
    // repeated threaded runs
    for (int r = 0; r < 3; ++r) CHECK(run_stream(c, 2, Scheduler::threaded, 1).output == base.output);
  }
}

TEST_CASE("more CUs than nodes still covers every node") {
  const auto c = make_case(ModelKind::gcn, Dims{8, 1, 8}, 3, 1.0, Topology::regular_like, 5);
  const auto want = reference_forward(c.g, c.fx.H, c.fx.params);
  check_close(run_stream(c, 8, Scheduler::threaded), want);
}

TEST_CASE("mismatched inputs are rejected") {
  const auto c = make_case(ModelKind::gcn, Dims{8, 1, 8}, 10, 2.0, Topology::regular_like, 5);
  CHECK_THROWS_AS(execute_streaming(build_pipeline(ModelKind::gin, Dims{8, 1, 8}, 1), c.g,
                                    c.fx.H, c.fx.params),
                  Error);
  CHECK_THROWS_AS(execute_streaming(build_pipeline(ModelKind::gcn, Dims{16, 1, 16}, 1), c.g,
                                    c.fx.H, c.fx.params),
                  DimensionError);
  const auto gg = make_case(ModelKind::gatedgcn, Dims{8, 1, 8}, 10, 2.0, Topology::regular_like, 5);
  CHECK_THROWS_AS(execute_streaming(build_pipeline(ModelKind::gatedgcn, Dims{8, 1, 8}, 1), gg.g,
                                    gg.fx.H, gg.fx.params, EdgeFeatures{}),
                  DimensionError);
}

namespace {

// producer -> consumer with caller-chosen item counts.
stream::Net counting_net(std::size_t produced, std::size_t consumed, std::uint64_t cap) {
  stream::Net net;
  net.channels.push_back({"producer", "consumer", cap, {}, 0, 0});
  stream::Stage p, q;
  p.id = "producer";
  p.jobs = produced;
  p.out = {0};
  p.body = stream::source([](std::size_t j) { return stream::Item{float(j)}; });
  q.id = "consumer";
  q.jobs = consumed;
  q.in = {{0, false}};
  q.body = stream::sink([](std::size_t, stream::Item&) {});
  net.stages.push_back(std::move(p));
  net.stages.push_back(std::move(q));
  return net;
}

}  // namespace

TEST_CASE("item-count mismatches end in a diagnostic, never a hang") {
  for (auto s : {Scheduler::threaded, Scheduler::round_robin}) {
    SECTION("consumer starves") {
      auto net = counting_net(3, 4, 16);
      CHECK_THROWS_AS(stream::run(net, s), DataflowError);
    }
    SECTION("producer blocked on a full FIFO") {
      auto net = counting_net(10, 4, 2);
      try {
        stream::run(net, s);
        FAIL("expected a DataflowError");
      } catch (const DataflowError& e) {
        CHECK(std::string(e.what()).find("producer->consumer") != std::string::npos);
      }
    }
    SECTION("leftover items") {
      auto net = counting_net(6, 4, 16);
      CHECK_THROWS_WITH(stream::run(net, s), Catch::Matchers::ContainsSubstring("still holds 2"));
    }
    SECTION("matched counts drain") {
      auto net = counting_net(40, 40, 1);
      CHECK_NOTHROW(stream::run(net, s));
      CHECK(net.channels[0].popped == 40);
    }
  }
}

TEST_CASE("stage exceptions propagate out of worker threads") {
  auto net = counting_net(5, 5, 2);
  net.stages[1].body = stream::sink([](std::size_t j, stream::Item&) {
    if (j == 3) throw RangeError("boom");
  });
  CHECK_THROWS_AS(stream::run(net, Scheduler::threaded), RangeError);
}
