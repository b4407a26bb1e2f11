#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "stalesim/config.hpp"
#include "stalesim/datasets.hpp"
#include "stalesim/errors.hpp"
#include "stalesim/experiments.hpp"
#include "stalesim/svg_plot.hpp"
#include "test_support.hpp"

using namespace stalesim;
using stalesim::testing::scratch_dir;

namespace {

const std::filesystem::path kSource = STALESIM_SOURCE_DIR;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.name = "small";
  c.objective.dim = 8;
  for (int i = 0; i < 8; ++i) c.objective.eigenvalues.push_back(1.0 + 3.0 * i / 7.0);
  c.distribution = RuntimeDistribution::exponential(1.0);
  c.replications = 4;
  c.master_seed = 21;
  c.burn_in = 10;
  VariantConfig a;
  a.protocol = Protocol::KSync;
  a.P = 4;
  a.K = 4;
  a.J = 300;
  VariantConfig b = a;
  b.protocol = Protocol::KAsync;
  b.K = 1;
  b.J = 1200;
  c.variants = {{"sync", a}, {"async", b}};
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(STALESIM_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("csv") {

TEST_CASE("format_double round-trips") {
  RandomStream rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double x = (rng.uniform() - 0.5) * std::pow(10.0, static_cast<int>(rng.index(40)) - 20);
    CHECK(parse_double(format_double(x)) == x);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(std::isnan(parse_double(format_double(std::numeric_limits<double>::quiet_NaN()))));
  CHECK(parse_double(format_double(HUGE_VAL)) == HUGE_VAL);
  CHECK(parse_double(format_double(-HUGE_VAL)) == -HUGE_VAL);
  CHECK_THROWS_AS(parse_double("1.0x"), std::invalid_argument);
  CHECK_THROWS_AS(parse_double(""), std::invalid_argument);
}

TEST_CASE("tables round-trip through files") {
  const auto dir = scratch_dir("csv");
  CsvTable t;
  t.header = {"a", "b"};
  t.rows = {{"1", "x"}, {"2.5", ""}};
  write_csv(dir / "t.csv", t);
  const CsvTable back = read_csv(dir / "t.csv");
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
  CHECK(back.numeric_column("a") == std::vector<double>{1.0, 2.5});
  CHECK_THROWS(back.column("zzz"));
  CHECK_THROWS_AS(to_csv_string(CsvTable{{"a,b"}, {}}), std::invalid_argument);
  CHECK_THROWS_WITH(read_csv(dir / "missing.csv"), doctest::Contains("missing.csv"));
}

}  // TEST_SUITE

TEST_SUITE("config") {

TEST_CASE("distribution specs") {
  CHECK(parse_distribution_shorthand("exp:2") == RuntimeDistribution::exponential(2.0));
  CHECK(parse_distribution_shorthand("shifted_exp:1,1") == RuntimeDistribution::shifted_exponential(1.0, 1.0));
  CHECK(parse_distribution_shorthand("pareto:2,1") == RuntimeDistribution::pareto(2.0, 1.0));
  CHECK(parse_distribution_shorthand("det:1") == RuntimeDistribution::deterministic(1.0));
  CHECK(parse_distribution_shorthand("hyperexp:0.5,0.5;0.25,4") ==
        RuntimeDistribution::hyper_exponential({0.5, 0.5}, {0.25, 4.0}));
  CHECK_THROWS(parse_distribution_shorthand("weibull:1"));
  CHECK_THROWS(parse_distribution_shorthand("pareto:1,1"));
  for (const auto& d : {RuntimeDistribution::pareto(2.0, 1.0), RuntimeDistribution::hyper_exponential({0.3, 0.7}, {1.0, 2.0}),
                        RuntimeDistribution::deterministic(0.5), RuntimeDistribution::shifted_exponential(2.0, 3.0)}) {
    CHECK(distribution_from_json(distribution_to_json(d)) == d);
  }
  CHECK(distribution_from_json(Json::parse(R"({"kind": "pareto", "shape": 2.0, "scale": 1.0})")) ==
        RuntimeDistribution::pareto(2.0, 1.0));
}

TEST_CASE("config round-trips through JSON") {
  ExperimentConfig c = small_config();
  c.variants[1].config.schedule = LrSchedule::staleness_compensated(0.001, 0.05);
  c.horizon = 50.0;
  const ExperimentConfig back = experiment_config_from_json(experiment_config_to_json(c));
  CHECK(experiment_config_to_json(back) == experiment_config_to_json(c));
  CHECK(back.variants[1].config.schedule == c.variants[1].config.schedule);
  CHECK(back.variants[1].label == "async");
}

TEST_CASE("every shipped recipe parses") {
  std::size_t n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(kSource / "configs")) {
    if (entry.path().filename().string().rfind("speedup", 0) == 0) continue;
    CHECK_NOTHROW(load_experiment_config(entry.path()));
    ++n;
  }
  CHECK(n >= 7);
}

TEST_CASE("validation lists every violation") {
  Json j = experiment_config_to_json(small_config());
  j["name"] = "bad/name";
  j["replications"] = 0;
  j["variants"][0]["K"] = 9;
  j["variants"][1]["label"] = "sync";
  j["distribution"] = {{"kind", "pareto"}, {"shape", 0.5}, {"scale", 1.0}};
  try {
    experiment_config_from_json(j);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(e.violations().size() >= 5);
  }
  CHECK_THROWS_AS(load_experiment_config(kSource / "no_such_config.json"), ValidationError);
}

TEST_CASE("default labels") {
  Json j = experiment_config_to_json(small_config());
  j["variants"][0].erase("label");
  CHECK(experiment_config_from_json(j).variants[0].label == "ksync_K4_P4");
}

}  // TEST_SUITE

TEST_SUITE("datasets") {

TEST_CASE("IDX and labeled CSV ingestion") {
  const auto dir = scratch_dir("idx");
  const auto be32 = [](std::ofstream& o, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    o.write(reinterpret_cast<const char*>(b), 4);
  };
  {
    std::ofstream img(dir / "img.idx", std::ios::binary);
    be32(img, 0x803);
    be32(img, 3);
    be32(img, 2);
    be32(img, 2);
    for (int i = 0; i < 12; ++i) img.put(static_cast<char>(i * 20));
    std::ofstream lab(dir / "lab.idx", std::ios::binary);
    be32(lab, 0x801);
    be32(lab, 3);
    for (char c : {7, 3, 7}) lab.put(c);
  }
  const Dataset d = load_idx_dataset(dir / "img.idx", dir / "lab.idx", 7);
  CHECK(d.size() == 3);
  CHECK(d.dim() == 4);
  CHECK(d.features(1, 0) == doctest::Approx(80.0 / 255.0));
  CHECK(d.labels[0] == 1.0);
  CHECK(d.labels[1] == -1.0);
  CHECK(load_idx_dataset(dir / "img.idx", dir / "lab.idx", 7, 2).size() == 2);
  {
    std::ofstream bad(dir / "bad.idx", std::ios::binary);
    be32(bad, 0x1234);
  }
  CHECK_THROWS(read_idx(dir / "bad.idx"));

  {
    std::ofstream csv(dir / "d.csv");
    csv << "label,x1,x2\n1,0.5,1\n0,2,3\n1,-1,0\n";
  }
  const Dataset c = load_labeled_csv(dir / "d.csv", 1.0);
  CHECK(c.size() == 3);
  CHECK(c.dim() == 2);
  CHECK(c.labels[1] == -1.0);
  CHECK(c.features(2, 0) == -1.0);
}

}  // TEST_SUITE

TEST_SUITE("experiments") {

TEST_CASE("single deterministic replication reproduces its trace") {
  ExperimentConfig c = small_config();
  c.replications = 1;
  c.distribution = RuntimeDistribution::deterministic(1.0);
  c.variants.resize(1);
  c.variants[0].config.J = 150;
  c.burn_in = 0;
  const auto r = run_experiment(c);
  const auto obj = build_objective(c.objective);
  SimOptions o;
  const SimTrace t = run(c.variants[0].config, *obj, c.distribution, c.master_seed, o);
  const auto& v = r.variants[0];
  REQUIRE(v.by_iteration.size() == t.records.size());
  for (std::size_t i = 0; i < t.records.size(); ++i) {
    CHECK(v.by_iteration.loss[i] == t.records[i].loss);
    CHECK(v.by_iteration.wallclock[i] == t.records[i].wallclock);
    CHECK(std::isnan(v.by_iteration.loss_stderr[i]));
  }
  CHECK(*v.mean_T == doctest::Approx(1.0));
  CHECK_FALSE(v.stderr_T.has_value());
  CHECK(*v.theory_T == 1.0);
  // The time grid holds the last loss at or before each grid time.
  for (std::size_t k = 0; k < v.by_time.time.size(); ++k) {
    const double tk = v.by_time.time[k];
    double expect = t.initial_loss;
    for (const auto& rec : t.records) {
      if (rec.wallclock <= tk) expect = rec.loss;
    }
    CHECK(v.by_time.loss[k] == expect);
  }
}

TEST_CASE("aggregation does not depend on worker count or execution order") {
  ExperimentConfig c = small_config();
  c.workers = 1;
  const auto a = run_experiment(c);
  c.workers = 3;
  const auto b = run_experiment(c);
  const auto da = scratch_dir("agg_a");
  const auto db = scratch_dir("agg_b");
  emit_outputs(a, da, {true, true});
  emit_outputs(b, db, {true, true});
  for (const auto& entry : std::filesystem::directory_iterator(da)) {
    CHECK(slurp(entry.path()) == slurp(db / entry.path().filename()));
  }

  // Aggregating the same traces in reverse order changes nothing but rounding.
  const auto obj = build_objective(c.objective);
  std::vector<SimTrace> traces;
  for (std::size_t r = 0; r < c.replications; ++r) {
    SimOptions o;
    o.replication = r;
    traces.push_back(run(c.variants[0].config, *obj, c.distribution, c.master_seed, o));
  }
  const auto fwd = aggregate_variant(c, c.variants[0], *obj, traces);
  std::reverse(traces.begin(), traces.end());
  const auto rev = aggregate_variant(c, c.variants[0], *obj, traces);
  for (std::size_t i = 0; i < fwd.by_iteration.size(); ++i) {
    CHECK(fwd.by_iteration.loss[i] == doctest::Approx(rev.by_iteration.loss[i]).epsilon(1e-12));
  }
  CHECK(*fwd.mean_T == doctest::Approx(*rev.mean_T).epsilon(1e-12));
  CHECK(fwd.by_iteration.loss == a.variants[0].by_iteration.loss);
}

TEST_CASE("rerunning gives byte-identical outputs") {
  const ExperimentConfig c = small_config();
  const auto d1 = scratch_dir("rerun1");
  const auto d2 = scratch_dir("rerun2");
  emit_outputs(run_experiment(c), d1, {true, true});
  emit_outputs(run_experiment(c), d2, {true, true});
  std::size_t files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(d1)) {
    CHECK(slurp(entry.path()) == slurp(d2 / entry.path().filename()));
    ++files;
  }
  CHECK(files >= 8);
}

TEST_CASE("emitted CSVs round-trip and summary columns") {
  const auto r = run_experiment(small_config());
  const auto dir = scratch_dir("emit");
  emit_outputs(r, dir, {true, false});
  CHECK_FALSE(std::filesystem::exists(dir / "loss_vs_time.svg"));
  const CsvTable s = read_csv(dir / "summary.csv");
  const std::vector<std::string> expected{"variant", "K", "P", "m", "eta", "mean_T", "stderr_T", "theory_T", "final_loss"};
  CHECK(std::vector<std::string>(s.header.begin(), s.header.begin() + 9) == expected);
  CHECK(s.rows.size() == 2);
  for (const auto& v : r.variants) {
    const CsvTable t = read_csv(dir / (v.label + ".csv"));
    CHECK(t.header == trace_csv_header());
    CHECK(t.numeric_column("loss") == v.by_iteration.loss);
    CHECK(t.numeric_column("wallclock") == v.by_iteration.wallclock);
    CHECK(t.numeric_column("mean_staleness") == v.by_iteration.mean_staleness);
    const CsvTable tt = read_csv(dir / (v.label + "_time.csv"));
    CHECK(tt.numeric_column("loss") == v.by_time.loss);
    CHECK(tt.numeric_column("wallclock") == v.by_time.time);
    REQUIRE(v.bound.has_value());
    REQUIRE(v.bound->applicable);
    const CsvTable b = read_csv(dir / (v.label + "_bound.csv"));
    CHECK(b.header[2] == "bound");
    const auto bv = b.numeric_column("bound");
    for (std::size_t i = 0; i < bv.size(); ++i) CHECK(bv[i] == v.bound->series.values[i + 1]);
  }
}

TEST_CASE("empty result writes a header-only summary") {
  const auto dir = scratch_dir("empty");
  emit_outputs(ExperimentResult{"empty", {}}, dir, {true, true});
  const CsvTable s = read_csv(dir / "summary.csv");
  CHECK(s.header == summary_csv_header());
  CHECK(s.rows.empty());
}

TEST_CASE("output failures name the path") {
  const auto dir = scratch_dir("io");
  { std::ofstream(dir / "file") << "x"; }
  CHECK_THROWS_WITH(emit_outputs(ExperimentResult{"x", {}}, dir / "file" / "sub", {true, false}),
                    doctest::Contains("file/sub"));
}

TEST_CASE("theory overlays need the step-size precondition") {
  ExperimentConfig c = small_config();
  c.variants[0].config.schedule = LrSchedule::fixed(0.2);  // above 1/(2L) = 0.125
  const auto r = run_experiment(c);
  REQUIRE(r.variants[0].bound.has_value());
  CHECK_FALSE(r.variants[0].bound->applicable);
  CHECK(r.variants[0].bound->reason.find("eta") != std::string::npos);
  const CsvTable s = summary_table(r);
  CHECK(s.rows[0][s.column("bound_applicable")] == "false");
  CHECK(s.rows[1][s.column("bound_applicable")] == "true");
  const auto dir = scratch_dir("overlay");
  emit_outputs(r, dir, {true, false});
  CHECK_FALSE(std::filesystem::exists(dir / "sync_bound.csv"));
  CHECK(std::filesystem::exists(dir / "async_bound.csv"));
}

TEST_CASE("divergent replications are flagged, not fatal") {
  ExperimentConfig c = small_config();
  c.variants[1].config.schedule = LrSchedule::fixed(0.6);
  const auto r = run_experiment(c);
  CHECK(r.any_diverged());
  CHECK(r.variants[0].diverged.empty());
  CHECK(r.variants[1].diverged.size() == c.replications);
  CHECK_FALSE(r.variants[1].final_loss.has_value());
  CHECK(r.variants[1].by_iteration.size() == 0);
}

TEST_CASE("invalid configs are rejected before running") {
  ExperimentConfig c = small_config();
  c.replications = 0;
  c.variants[0].config.K = 7;
  try {
    run_experiment(c);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(e.violations().size() == 2);
  }
}

TEST_CASE("sweeps") {
  ExperimentConfig c = small_config();
  c.variants.resize(1);
  c.variants[0].config.protocol = Protocol::KAsync;
  c.variants[0].config.K = 1;
  SUBCASE("K-async swept to K=P is the fully synchronous run") {
    const std::vector<double> k{4};
    const auto swept = sweep(c, SweepAxis::K, k);
    ExperimentConfig s = small_config();
    s.variants.resize(1);
    const auto direct = run_experiment(s);
    REQUIRE(swept.size() == 1);
    CHECK(swept[0].variants[0].label == "sync_K4");
    CHECK(swept[0].variants[0].by_iteration.loss == direct.variants[0].by_iteration.loss);
    CHECK(swept[0].variants[0].by_iteration.wallclock == direct.variants[0].by_iteration.wallclock);
  }
  SUBCASE("m sweeps rescale the shifted-exponential shift") {
    c.distribution = RuntimeDistribution::shifted_exponential(0.5, 2.0);
    c.unit_compute_time = 0.25;
    const auto m4 = apply_sweep_value(c, SweepAxis::m, 4);
    CHECK(m4.distribution == RuntimeDistribution::shifted_exponential(1.0, 2.0));
    CHECK(m4.variants[0].config.m == 4);
  }
  SUBCASE("eta sweeps keep the schedule kind") {
    c.variants[0].config.schedule = LrSchedule::staleness_compensated(0.001, 0.05);
    const auto e = apply_sweep_value(c, SweepAxis::eta, 0.02);
    CHECK(e.variants[0].config.schedule == LrSchedule::staleness_compensated(0.001, 0.02));
  }
  CHECK_THROWS_AS(apply_sweep_value(c, SweepAxis::K, 5), ValidationError);
  CHECK_THROWS_AS(apply_sweep_value(c, SweepAxis::K, 1.5), ValidationError);
  CHECK_THROWS_AS(parse_sweep_axis("P"), std::invalid_argument);
}

TEST_CASE("theoretical runtimes") {
  VariantConfig v;
  v.P = 8;
  v.K = 4;
  const auto e1 = RuntimeDistribution::exponential(1.0);
  v.protocol = Protocol::KSync;
  CHECK(*theoretical_runtime(v, e1) == doctest::Approx(0.6345238095238095));
  v.protocol = Protocol::KBatchSync;
  CHECK(*theoretical_runtime(v, e1) == doctest::Approx(0.5));
  CHECK_FALSE(theoretical_runtime(v, RuntimeDistribution::pareto(2.0, 1.0)).has_value());
  v.protocol = Protocol::KAsync;
  CHECK(*theoretical_runtime(v, e1) == doctest::Approx(0.6345238095238095));
  CHECK_FALSE(theoretical_runtime(v, RuntimeDistribution::shifted_exponential(1.0, 1.0)).has_value());
  v.protocol = Protocol::KBatchAsync;
  CHECK(*theoretical_runtime(v, RuntimeDistribution::pareto(2.0, 1.0)) == doctest::Approx(1.0));
}

TEST_CASE("speed-up table recipe") {
  const std::vector<RuntimeDistribution> d{RuntimeDistribution::exponential(1.0),
                                           RuntimeDistribution::shifted_exponential(1.0, 1.0),
                                           RuntimeDistribution::pareto(2.0, 1.0)};
  const std::vector<std::size_t> p{2, 4, 8, 16, 32, 64};
  const CsvTable t = speedup_table(d, p, 100'000, 1);
  CHECK(t.header.size() == 4);
  REQUIRE(t.rows.size() == 6);
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(parse_double(t.rows[i][1]) == doctest::Approx(p[i] * harmonic_number(p[i])).epsilon(1e-14));
    // shifted: P (1 + H_P) / 2
    CHECK(parse_double(t.rows[i][2]) == doctest::Approx(p[i] * (1.0 + harmonic_number(p[i])) / 2.0).epsilon(1e-14));
  }
}

TEST_CASE("async recipe yields one curve per K for each protocol") {
  ExperimentConfig c = load_experiment_config(kSource / "configs" / "kasync_vs_kbatchasync.json");
  c.replications = 2;
  for (auto& v : c.variants) v.config.J = 1000;
  const auto r = run_experiment(c);
  std::vector<std::size_t> kasync, kbatch;
  for (const auto& v : r.variants) {
    (v.config.protocol == Protocol::KAsync ? kasync : kbatch).push_back(v.config.K);
    CHECK(v.by_iteration.size() == 1000);
  }
  CHECK(kasync == std::vector<std::size_t>{1, 4, 8});
  CHECK(kbatch == std::vector<std::size_t>{1, 4, 8});
}

TEST_CASE("runtime recipes order K-sync > K-async > K-batch-async") {
  for (const char* name : {"runtime_pareto.json", "runtime_shifted_exp.json"}) {
    CAPTURE(name);
    ExperimentConfig c = load_experiment_config(kSource / "configs" / name);
    c.replications = 3;
    const auto r = run_experiment(c);
    std::map<Protocol, std::pair<double, double>> t;
    for (const auto& v : r.variants) t[v.config.protocol] = {*v.mean_T, *v.stderr_T};
    const auto above = [&](Protocol a, Protocol b) {
      return t.at(a).first - 3 * t.at(a).second > t.at(b).first + 3 * t.at(b).second;
    };
    CHECK(above(Protocol::KSync, Protocol::KAsync));
    CHECK(above(Protocol::KAsync, Protocol::KBatchAsync));
  }
}

TEST_CASE("loss_at_time is a step lookup") {
  TimeCurve c{{0.0, 1.0, 2.0}, {5.0, 4.0, 3.0}, {}};
  CHECK(loss_at_time(c, 0.5) == 5.0);
  CHECK(loss_at_time(c, 2.0) == 3.0);
  CHECK(std::isnan(loss_at_time(c, -1.0)));
}

TEST_CASE("stability bisection brackets the onset of divergence") {
  ExperimentConfig c = small_config();
  VariantConfig v = c.variants[1].config;
  v.J = 600;
  const auto b = find_stability_threshold(c, v, 0.01, 1.0, 20);
  CHECK(b.stable < b.unstable);
  CHECK(b.unstable - b.stable <= 1.0 / (1 << 20) * 1.01);
  CHECK_THROWS_AS(find_stability_threshold(c, v, 0.9, 1.0, 5), std::invalid_argument);
}

}  // TEST_SUITE

TEST_SUITE("svg") {

TEST_CASE("render_svg") {
  PlotSpec p{"t", "x", "y", true, {}};
  p.series.push_back({"a", {1, 2, 3}, {1, 0.1, std::numeric_limits<double>::quiet_NaN()}, false});
  p.series.push_back({"b <bound>", {1, 2, 3}, {2, 1, -1}, true});
  const std::string svg = render_svg(p);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("&lt;bound&gt;") != std::string::npos);
  CHECK(svg.find("stroke-dasharray") != std::string::npos);
  CHECK(svg.find("nan") == std::string::npos);
}

}  // TEST_SUITE

TEST_SUITE("cli") {

TEST_CASE("exit codes") {
  const auto dir = scratch_dir("cli");
  const auto good = dir / "good.json";
  std::ofstream(good) << experiment_config_to_json(small_config()).dump();
  CHECK(run_cli("run " + good.string() + " --out " + (dir / "out").string()) == 0);
  CHECK(std::filesystem::exists(dir / "out" / "summary.csv"));
  CHECK(std::filesystem::exists(dir / "out" / "loss_vs_time.svg"));

  Json bad = experiment_config_to_json(small_config());
  bad["replications"] = 0;
  std::ofstream(dir / "bad.json") << bad.dump();
  CHECK(run_cli("run " + (dir / "bad.json").string()) == 2);
  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK(run_cli("run " + (dir / "broken.json").string()) == 2);
  CHECK(run_cli("run " + good.string() + " --formats csv,pdf --out " + (dir / "o2").string()) == 2);
  CHECK(run_cli("frobnicate") == 2);

  Json diverging = experiment_config_to_json(small_config());
  diverging["variants"][1]["schedule"]["eta"] = 0.6;
  std::ofstream(dir / "div.json") << diverging.dump();
  CHECK(run_cli("run " + (dir / "div.json").string() + " --out " + (dir / "o3").string()) == 3);

  CHECK(run_cli("sweep " + good.string() + " --axis K --values 1,2 --out " + (dir / "sw").string()) == 0);
  CHECK(std::filesystem::exists(dir / "sw" / "K_2" / "summary.csv"));
  CHECK(run_cli("sweep " + good.string() + " --axis K --values 1,9 --out " + (dir / "sw2").string()) == 2);
  CHECK_FALSE(std::filesystem::exists(dir / "sw2"));

  CHECK(run_cli("theory speedup --dist exp:1 --dist pareto:2,1 --p-max 16 --out " + (dir / "s.csv").string()) == 0);
  const CsvTable s = read_csv(dir / "s.csv");
  CHECK(s.rows.size() == 4);
  CHECK(run_cli("theory speedup --config " + (kSource / "configs" / "speedup.json").string() + " --samples 1000 --out " +
                (dir / "speedup.csv").string()) == 0);
  const CsvTable sp = read_csv(dir / "speedup.csv");
  CHECK(sp.header == std::vector<std::string>{"P", "exp(1)", "1+exp(1)", "pareto(2;1)"});
  CHECK(sp.rows.size() == 6);
  CHECK(run_cli("theory speedup --dist weibull:1") == 2);
  CHECK(run_cli("theory ratio --dist exp:1 -P 8 -K 4") == 0);
  CHECK(run_cli("trace " + good.string() + " --variant async --out " + (dir / "trace.csv").string()) == 0);
  CHECK(read_csv(dir / "trace.csv").rows.size() == 1200);
}

TEST_CASE("worker count precedence") {
  const auto dir = scratch_dir("cli_env");
  const auto good = dir / "good.json";
  std::ofstream(good) << experiment_config_to_json(small_config()).dump();
  setenv("STALESIM_WORKERS", "abc", 1);
  CHECK(run_cli("run " + good.string() + " --out " + (dir / "o").string()) == 2);
  CHECK(run_cli("run " + good.string() + " --workers 2 --out " + (dir / "o").string()) == 0);
  setenv("STALESIM_WORKERS", "3", 1);
  CHECK(run_cli("run " + good.string() + " --out " + (dir / "o").string()) == 0);
  CHECK(run_cli("run " + good.string() + " --workers 0 --out " + (dir / "o").string()) == 2);
  unsetenv("STALESIM_WORKERS");
}

}  // TEST_SUITE
