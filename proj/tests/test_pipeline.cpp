#include <catch_amalgamated.hpp>

#include <set>

#include "gnnhls/pipeline.hpp"

using namespace gnnhls;

namespace {

std::size_t count_kind(const PipelineSpec& p, StageKind k) {
  std::size_t c = 0;
  for (const auto& s : p.stages) c += s.kind == k;
  return c;
}

}  // namespace

TEST_CASE("II formulas evaluate against hand values") {
  const Dims d{128, 1, 128};
  CHECK(ii_eval(ii::gcn_aggregation(), 5, d) == 22);
  CHECK(ii_eval(ii::gcn_aggregation(), 0, d) == 2);
  CHECK(ii_eval(ii::gcn_vmm(), 7, d) == 128 + 36);
  CHECK(ii_eval(ii::gat_softmax(), 3, Dims{128, 8, 16}) == 3 * 8 + 8 + 17);
  CHECK(ii_eval(ii::gat_aggregation(), 2, Dims{128, 8, 16}) == 16 + 16 + 38);
  CHECK(ii_eval(ii::monet_mh_aggregate(), 9, Dims{64, 2, 64}) == 24);
  CHECK(ii_eval(ii::monet_mhvmm(), 0, Dims{64, 2, 64}) == 2 + 64 + 28);
  CHECK(ii_eval(ii::gated_soft_attention(), 4, Dims{32, 1, 32}) == 112);
  CHECK(ii_base(ii::gcn_aggregation(), d) == 2);
  CHECK(ii_slope(ii::gcn_aggregation(), d) == 4);
  CHECK(ii_slope(ii::gat_mhewm(), Dims{128, 8, 16}) == 8);
}

TEST_CASE("published and reused II entries are labelled") {
  CHECK(ii::gcn_aggregation().published);
  CHECK(ii::gated_sum().published);
  CHECK_FALSE(ii::memory().published);
  CHECK_FALSE(ii::vmm().published);
  CHECK(ii::vmm().source == "gcn.vmm");
  CHECK(ii::elementwise().source == "monet.vmm_pseudo");
  for (ModelKind m : kAllModels)
    for (const auto& s : build_pipeline(m).stages) CHECK(s.ii.constant >= 1);
}

TEST_CASE("II is non-decreasing in degree and width") {
  const IiFormula fs[] = {ii::gcn_aggregation(), ii::gcn_vmm(), ii::gat_softmax(),
                          ii::gat_aggregation(), ii::monet_mhvmm(), ii::gated_soft_attention()};
  for (const auto& f : fs)
    for (std::uint64_t deg = 0; deg < 40; ++deg)
      for (std::size_t w = 1; w < 12; ++w) {
        const Dims a{w, w, w}, b{w + 1, w + 1, w + 1};
        CHECK(ii_eval(f, deg + 1, a) >= ii_eval(f, deg, a));
        CHECK(ii_eval(f, deg, b) >= ii_eval(f, deg, a));
      }
}

TEST_CASE("GCN pipeline has the four-stage shape") {
  const auto p = build_pipeline(ModelKind::gcn);
  REQUIRE(p.stages.size() == 4);
  CHECK(p.num_cus == 2);
  CHECK(p.stage("read").granularity == Granularity::per_edge);
  CHECK(p.stage("aggregate").granularity == Granularity::per_node);
  CHECK(p.kernels.size() == 1);
  CHECK(p.fifos.size() == 3);
  CHECK(is_gather(p, p.fifos[0]));
  CHECK_FALSE(is_gather(p, p.fifos[1]));
  for (const auto& f : p.fifos) CHECK(f.capacity == kDefaultFifoCapacity);
}

TEST_CASE("every model builds a valid stage graph") {
  for (ModelKind m : kAllModels) {
    INFO(to_string(m));
    const auto p = build_pipeline(m);
    CHECK_NOTHROW(validate(p));
    std::set<std::string> ids;
    for (const auto& s : p.stages) CHECK(ids.insert(s.id).second);
    CHECK(count_kind(p, StageKind::memory_read) >= 1);
    CHECK(count_kind(p, StageKind::memory_write) >= 1);
    for (const auto& k : p.kernels) CHECK_FALSE(k.stages.empty());
  }
  CHECK(build_pipeline(ModelKind::gat).kernels.size() == 2);
  CHECK(count_kind(build_pipeline(ModelKind::gatedgcn), StageKind::vmm) == 5);
  CHECK(count_kind(build_pipeline(ModelKind::graphsage), StageKind::vmm) == 2);
  CHECK(count_kind(build_pipeline(ModelKind::gin), StageKind::vmm) == 2);
  CHECK(count_kind(build_pipeline(ModelKind::monet), StageKind::gaussian) == 1);
}

TEST_CASE("validate rejects malformed pipelines") {
  SECTION("cycle") {
    auto p = build_pipeline(ModelKind::gcn);
    p.fifos.push_back({"write", "vmm", 4, 1});
    CHECK_THROWS_AS(validate(p), Error);
  }
  SECTION("zero capacity") {
    auto p = build_pipeline(ModelKind::gcn);
    p.fifos[1].capacity = 0;
    CHECK_THROWS_AS(validate(p), RangeError);
  }
  SECTION("node to edge") {
    auto p = build_pipeline(ModelKind::gcn);
    p.fifos.push_back({"aggregate", "read", 4, 1});
    CHECK_THROWS_AS(validate(p), Error);
  }
  SECTION("unknown stage") {
    auto p = build_pipeline(ModelKind::gcn);
    p.fifos.push_back({"nowhere", "read", 4, 1});
    CHECK_THROWS_AS(validate(p), Error);
  }
  SECTION("cross-kernel fifo") {
    auto p = build_pipeline(ModelKind::gat);
    p.fifos.push_back({"k1_write", "softmax", 4, 1});
    CHECK_THROWS_AS(validate(p), Error);
  }
  SECTION("bad parameters") {
    CHECK_THROWS_AS(build_pipeline(ModelKind::gcn, default_dims(ModelKind::gcn), 0), RangeError);
    CHECK_THROWS(build_pipeline(ModelKind::gcn, Dims{4, 1, 8}, 1));
  }
}

TEST_CASE("pipeline JSON carries stages, fifos and capacities") {
  auto p = build_pipeline(ModelKind::monet);
  p.fifos[0].capacity = kUnbounded;
  p.stages[1].latency = 7;
  const auto j = to_json(p);
  CHECK(j["model"] == "monet");
  CHECK(j["dims"]["heads"] == 2);
  CHECK(j["num_cus"] == 2);
  CHECK(j["stages"].size() == p.stages.size());
  CHECK(j["fifos"][0]["capacity"] == "unbounded");
  CHECK(j["fifos"][1]["capacity"] == 16);
  CHECK(j["stages"][0]["latency"] == "auto");
  CHECK(j["stages"][1]["latency"] == 7);
  CHECK(capacity_from_json(j["fifos"][0]["capacity"]) == kUnbounded);
  CHECK(capacity_from_json(j["fifos"][1]["capacity"]) == 16);
  CHECK_THROWS(capacity_from_json(nlohmann::json("lots")));
}
