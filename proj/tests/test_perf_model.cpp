#include <catch_amalgamated.hpp>

#include "gnnhls/generate.hpp"
#include "gnnhls/perf_model.hpp"

using namespace gnnhls;

namespace {

DegreeStats mt() { return degree_stats(load_graph_summary(data_dir() / "datasets" / "MT.json")); }

double predict(ModelKind m, const DegreeStats& s) {
  return analytic_cycles(m, s, default_dims(m), default_profile(m), "MT").seconds;
}

double shipped_hls_time(const std::vector<BaselineRow>& rows, const std::string& model,
                  const std::string& ds) {
  for (const auto& r : rows)
    if (r.model == model && r.dataset == ds && r.platform == "hls") return *r.time_s;
  FAIL("missing row");
  return 0;
}

}  // namespace

TEST_CASE("hardware profiles carry the achieved frequencies and CU counts") {
  CHECK(default_profile(ModelKind::gcn).frequency_hz == 250e6);
  CHECK(default_profile(ModelKind::gcn).num_cus == 2);
  CHECK(default_profile(ModelKind::graphsage).frequency_hz == 204e6);
  CHECK(default_profile(ModelKind::gin).frequency_hz == 190e6);
  CHECK(default_profile(ModelKind::gat).frequency_hz == 255e6);
  CHECK(default_profile(ModelKind::monet).num_cus == 2);
  CHECK(default_profile(ModelKind::gatedgcn).frequency_hz == 270e6);
}

TEST_CASE("GCN on MT by hand") {
  const auto s = mt();
  REQUIRE(s.n == 145459);
  REQUIRE(s.m == 302190);
  const auto r = analytic_cycles(ModelKind::gcn, s, {128, 1, 128}, {ModelKind::gcn, 250e6, 2});
  CHECK(r.stage("vmm").cycles == 145459ull * (128 + 36));
  CHECK(r.stage("vmm").cycles == 23855276ull);
  CHECK(r.stage("aggregate").cycles == 1499678ull);
  CHECK(r.stage("read").cycles == 302190ull);
  CHECK(r.stage("write").cycles == 145459ull);
  CHECK(r.bottleneck == "vmm");
  CHECK(r.total_cycles == 11927638.0);
  CHECK(r.seconds == Catch::Approx(0.0477).epsilon(1e-3));
}

TEST_CASE("GatedGCN soft attention on MT by hand") {
  const auto r =
      analytic_cycles(ModelKind::gatedgcn, mt(), {32, 1, 32}, {ModelKind::gatedgcn, 270e6, 1});
  CHECK(r.stage("soft_attention").cycles == 10ull * 302190 + 72ull * 145459);
  CHECK(r.stage("soft_attention").cycles == 13494948ull);
  CHECK(double(r.stage("soft_attention").cycles) / 270e6 == Catch::Approx(0.0500).epsilon(1e-3));
  // Per-edge VMMs dominate: 68 cycles for every edge.
  CHECK(r.stage("vmm_b").cycles == 68ull * 302190);
  CHECK(r.bottleneck == "vmm_b");
}

TEST_CASE("GAT and MoNet on MT by hand") {
  const auto s = mt();
  const auto gat = analytic_cycles(ModelKind::gat, s, {128, 8, 16}, {ModelKind::gat, 255e6, 1});
  REQUIRE(gat.kernels.size() == 2);
  CHECK(gat.kernels[0].cycles == 145459.0 * 164);
  CHECK(gat.stage("aggregation").cycles == 8ull * 302190 + (16 + 38) * 145459ull);
  CHECK(gat.kernels[1].cycles == double(gat.stage("aggregation").cycles));
  CHECK(gat.total_cycles == 145459.0 * 164 + 10272306.0);
  const auto mn = analytic_cycles(ModelKind::monet, s, {64, 2, 64}, {ModelKind::monet, 250e6, 2});
  CHECK(mn.stage("mhvmm").cycles == 145459ull * (2 + 64 + 28));
  CHECK(mn.stage("mh_aggregate").cycles == 145459ull * 24);
  CHECK(mn.stage("mhewm").cycles == 4ull * 302190);
  CHECK(mn.total_cycles == 145459.0 * 94 / 2);
}

TEST_CASE("predicted MT seconds against the published HLS column") {
  const auto base = default_baselines();
  const auto s = mt();
  struct Row { ModelKind m; const char* name; double factor; };
  for (const auto& [m, name, factor] :
       {Row{ModelKind::gcn, "GCN", 1.25}, Row{ModelKind::graphsage, "GS", 1.25},
        Row{ModelKind::gin, "GIN", 1.25}, Row{ModelKind::gat, "GAT", 4.0},
        Row{ModelKind::monet, "MN", 4.0}, Row{ModelKind::gatedgcn, "GGCN", 4.0}}) {
    INFO(name);
    const double shipped = shipped_hls_time(base, name, "MT"), got = predict(m, s);
    if (factor == 1.25) {
      CHECK(std::abs(got - shipped) <= 0.25 * shipped);
    } else {
      CHECK(got <= shipped * factor);
      CHECK(got >= shipped / factor);
    }
  }
  CHECK(predict(ModelKind::graphsage, s) == Catch::Approx(0.117).epsilon(5e-3));
  CHECK(predict(ModelKind::gin, s) == Catch::Approx(0.1256).epsilon(5e-3));
}

TEST_CASE("empty graph costs nothing; doubling CUs halves the time") {
  DegreeStats zero;
  for (ModelKind m : kAllModels) {
    const auto r = analytic_cycles(m, zero, default_dims(m), default_profile(m));
    CHECK(r.total_cycles == 0);
    CHECK(r.seconds == 0);
    const auto s = mt();
    const auto one = analytic_cycles(m, s, default_dims(m), {m, 200e6, 1});
    const auto two = analytic_cycles(m, s, default_dims(m), {m, 200e6, 2});
    CHECK(two.seconds * 2 == Catch::Approx(one.seconds).epsilon(1e-12));
  }
}

TEST_CASE("analytic total equals the simulated bottleneck bound on small graphs") {
  SplitMix64 rng(5);
  for (ModelKind m : kAllModels)
    for (int t = 0; t < 10; ++t) {
      const std::size_t n = 2 + rng.below(49);
      const auto g = build_csr(
          generate({n, 0.5 + 6 * rng.unit(), t % 2 ? Topology::powerlaw_like : Topology::regular_like,
                    rng.next()}));
      auto spec = build_pipeline(m, default_dims(m), 1);
      spec.set_capacity(kUnbounded);
      const auto sim = simulate_cycles(spec, g, 1e8);
      const auto model = analytic_cycles(spec, degree_stats(g), {m, 1e8, 1});
      INFO(to_string(m) << " n " << n);
      CHECK(model.total_cycles == sim.bound_cycles);
      for (const auto& st : model.stages) CHECK(st.cycles == sim.stage(st.id).cycles);
    }
}

TEST_CASE("baselines parse and reject malformed input") {
  const auto rows = default_baselines();
  CHECK(rows.size() == 72);
  std::size_t oom = 0;
  for (const auto& r : rows) oom += r.oom;
  CHECK(oom == 3);
  CHECK_THROWS_AS(parse_baselines("model,dataset\nGCN,MT\n"), ParseError);
  CHECK_THROWS_AS(parse_baselines("model,dataset,platform,time_s,energy_j,oom\nGCN,MT,tpu,1,1,0\n"),
                  ParseError);
  CHECK_THROWS_AS(parse_baselines("model,dataset,platform,time_s,energy_j,oom\nGCN,MT,cpu,,1,0\n"),
                  ParseError);
  CHECK_THROWS_AS(parse_baselines("model,dataset,platform,time_s,energy_j,oom\nGCN,MT,cpu,x,1,0\n"),
                  ParseError);
  CHECK(parse_baselines("model,dataset,platform,time_s,energy_j,oom\nGAT,PT,gpu,,,1\n")[0].oom);
}

TEST_CASE("speedup and energy ratios by division of the shipped tables") {
  const auto t = speedup_table(default_baselines());
  auto get = [&](const std::string& m, const std::string& d, const std::string& metric) {
    for (const auto& r : t.rows)
      if (r.model == m && r.dataset == d && r.metric == metric) return r;
    FAIL("row not found");
    return ComparisonRow{};
  };
  CHECK(*get("GCN", "MT", "cpu_speedup").value == Catch::Approx(0.11 / 0.05));
  CHECK(*get("GCN", "MT", "cpu_energy_reduction").value == Catch::Approx(9.06 / 0.80));
  const auto gat_pt = get("GAT", "PT", "gpu_speedup");
  CHECK(gat_pt.oom);
  CHECK_FALSE(gat_pt.value);
  CHECK(get("MN", "PT", "gpu_speedup").oom);
  CHECK(get("GGCN", "PT", "gpu_energy_reduction").oom);
  CHECK(t.warnings.empty());

  const auto cpu = t.max_of("cpu_speedup");
  REQUIRE(cpu);
  CHECK(cpu->model == "MN");
  CHECK(cpu->dataset == "PT");
  CHECK(*cpu->value == Catch::Approx(89.71 / 1.77));
  // Largest GPU ratio in the tables themselves (GCN/MT: 0.28 / 0.05).
  const auto gpu = t.max_of("gpu_speedup");
  REQUIRE(gpu);
  CHECK(gpu->model == "GCN");
  CHECK(*gpu->value == Catch::Approx(0.28 / 0.05));
  CHECK(*t.max_of("gpu_energy_reduction")->value == Catch::Approx(59.67 / 0.80));
  CHECK(*t.max_of("cpu_energy_reduction")->value == Catch::Approx(7625.48 / 17.22));

  const auto csv = comparison_csv_rows(t);
  CHECK(csv.find("GCN,MT,cpu_speedup,2.2\n") != std::string::npos);
  CHECK(csv.find("GAT,PT,gpu_speedup,OoM\n") != std::string::npos);
}

TEST_CASE("ratios do not change when every time is rescaled") {
  auto rows = default_baselines();
  const auto before = speedup_table(rows);
  for (auto& r : rows) {
    if (r.time_s) *r.time_s *= 3.7;
    if (r.energy_j) *r.energy_j *= 0.25;
  }
  const auto after = speedup_table(rows);
  REQUIRE(before.rows.size() == after.rows.size());
  for (std::size_t i = 0; i < before.rows.size(); ++i) {
    CHECK(before.rows[i].oom == after.rows[i].oom);
    if (before.rows[i].value)
      CHECK(*after.rows[i].value == Catch::Approx(*before.rows[i].value).epsilon(1e-12));
  }
}

TEST_CASE("missing baselines become warnings") {
  const auto t = speedup_table({{"GCN", "XX", 0.1, 1.0}, {"GCN", "MT", 0.05, std::nullopt}},
                               default_baselines());
  CHECK(t.warnings.size() >= 2);
  bool found = false;
  for (const auto& r : t.rows) found |= r.dataset == "MT" && r.metric == "cpu_speedup";
  CHECK(found);
}
