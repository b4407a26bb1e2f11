// stalesim: command-line front end for the parameter-server simulator.
#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stalesim/config.hpp"
#include "stalesim/errors.hpp"
#include "stalesim/experiments.hpp"
#include "stalesim/theory.hpp"

namespace {

using namespace stalesim;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitDiverged = 3;

struct RunArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string formats = "csv,plot";
};

ExperimentConfig prepare(const RunArgs& a) {
  ExperimentConfig c = load_experiment_config(a.config);
  if (a.seed) c.master_seed = *a.seed;
  if (a.workers) {
    c.workers = *a.workers;
  } else if (const char* env = std::getenv("STALESIM_WORKERS"); env && *env) {
    try {
      c.workers = std::stoul(env);
    } catch (const std::exception&) {
      throw ValidationError({std::string("STALESIM_WORKERS is not a count: ") + env});
    }
  }
  if (c.workers == 0) throw ValidationError({"workers must be >= 1"});
  return c;
}

void print_summary(const ExperimentResult& r) {
  std::cout << to_csv_string(summary_table(r));
  for (const auto& v : r.variants) {
    if (!v.diverged.empty()) {
      std::cerr << "warning: " << v.label << ": " << v.diverged.size() << " of " << v.replications
                << " replications diverged\n";
    }
    if (v.bound && !v.bound->applicable) {
      std::cerr << "note: " << v.label << ": " << v.bound->kind << " bound not attached (" << v.bound->reason << ")\n";
    }
  }
}

int cmd_run(const RunArgs& a) {
  const ExperimentConfig c = prepare(a);
  const OutputFormats formats = parse_formats(a.formats);
  const ExperimentResult r = run_experiment(c);
  emit_outputs(r, a.out.empty() ? c.outputs : std::filesystem::path(a.out), formats);
  print_summary(r);
  return r.any_diverged() ? kExitDiverged : kExitOk;
}

int cmd_sweep(const RunArgs& a, const std::string& axis_name, const std::vector<double>& values) {
  const ExperimentConfig c = prepare(a);
  const OutputFormats formats = parse_formats(a.formats);
  const SweepAxis axis = parse_sweep_axis(axis_name);
  const std::filesystem::path root = a.out.empty() ? c.outputs : std::filesystem::path(a.out);
  bool diverged = false;
  // Validate every value before running anything.
  std::vector<ExperimentConfig> configs;
  for (double v : values) configs.push_back(apply_sweep_value(c, axis, v));
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const ExperimentResult r = run_experiment(configs[i]);
    emit_outputs(r, root / (axis_name + "_" + format_double(values[i])), formats);
    print_summary(r);
    diverged = diverged || r.any_diverged();
  }
  return diverged ? kExitDiverged : kExitOk;
}

std::vector<RuntimeDistribution> parse_dists(const std::vector<std::string>& specs) {
  std::vector<RuntimeDistribution> out;
  std::vector<std::string> errors;
  for (const auto& s : specs) {
    try {
      out.push_back(parse_distribution_shorthand(s));
    } catch (const std::exception& e) {
      errors.push_back(s + ": " + e.what());
    }
  }
  if (!errors.empty()) throw ValidationError(errors);
  return out;
}

int cmd_speedup(std::vector<RuntimeDistribution> dists, std::size_t p_max, std::vector<std::size_t> p_values,
                std::size_t samples, std::uint64_t seed, const std::string& out) {
  if (dists.empty()) throw ValidationError({"no distributions given (use --dist or --config)"});
  if (p_values.empty()) {
    for (std::size_t p = 2; p <= p_max; p *= 2) p_values.push_back(p);
  }
  const CsvTable t = speedup_table(dists, p_values, samples, seed);
  if (out.empty()) {
    std::cout << to_csv_string(t);
  } else {
    write_csv(out, t);
  }
  return kExitOk;
}

int cmd_ratio(const std::vector<std::string>& dist_specs, std::size_t P, std::size_t K, std::size_t samples,
              std::uint64_t seed) {
  const auto dists = parse_dists(dist_specs);
  CsvTable t;
  t.header = {"distribution", "P", "K", "ratio", "stderr", "kind", "class"};
  for (const auto& d : dists) {
    OrderStatisticMethod method = Analytic{};
    if (!(d.is<Exponential>() || d.is<Deterministic>() || d.is<ShiftedExponential>())) method = MonteCarlo{samples, seed};
    const RuntimeRatio r = ratio_kasync_over_kbatchasync(d, P, K, method);
    t.rows.push_back({d.describe(), std::to_string(P), std::to_string(K), format_double(r.ratio.value),
                      format_double(r.ratio.stderr_), to_string(r.kind), to_string(classify_monotonicity(d))});
  }
  std::cout << to_csv_string(t);
  return kExitOk;
}

int cmd_trace(const RunArgs& a, const std::string& label, std::size_t replication) {
  const ExperimentConfig c = prepare(a);
  const auto it = std::find_if(c.variants.begin(), c.variants.end(), [&](const VariantSpec& v) { return v.label == label; });
  if (it == c.variants.end()) throw ValidationError({"no variant labelled '" + label + "'"});
  const ObjectivePtr obj = build_objective(c.objective);
  SimOptions opt;
  opt.replication = replication;
  opt.initial_params = Vector::Constant(static_cast<Eigen::Index>(obj->dim()), c.init_value);
  const SimTrace trace = run(it->config, *obj, c.distribution, c.master_seed, opt);
  if (a.out.empty()) {
    std::cout << to_csv_string(trace_to_csv(trace));
  } else {
    write_trace_csv(a.out, trace);
  }
  return trace.diverged ? kExitDiverged : kExitOk;
}

int cmd_stability(const RunArgs& a, const std::string& label, double lo, double hi, std::size_t steps,
                  std::uint64_t replication) {
  const ExperimentConfig c = prepare(a);
  const auto it = std::find_if(c.variants.begin(), c.variants.end(), [&](const VariantSpec& v) { return v.label == label; });
  if (it == c.variants.end()) throw ValidationError({"no variant labelled '" + label + "'"});
  const StabilityBracket b = find_stability_threshold(c, it->config, lo, hi, steps, replication);
  Json out;
  out["config"] = c.name;
  out["variant"] = label;
  out["master_seed"] = c.master_seed;
  out["replication"] = replication;
  out["bracket"] = {lo, hi};
  out["bisection_steps"] = steps;
  out["stable_eta"] = b.stable;
  out["unstable_eta"] = b.unstable;
  std::cout << out.dump(2) << '\n';
  return kExitOk;
}

// {"distributions": [...], "p_values": [...] or "p_max": 64, "samples": N, "seed": S}
void load_speedup_config(const std::string& path, std::vector<RuntimeDistribution>& parsed,
                         std::size_t& p_max, std::vector<std::size_t>& p_values, std::size_t& samples, std::uint64_t& seed) {
  std::ifstream in(path);
  if (!in) throw ValidationError({"cannot open " + path});
  Json j;
  try {
    in >> j;
    for (const auto& d : j.at("distributions")) parsed.push_back(distribution_from_json(d));
    p_max = j.value("p_max", p_max);
    if (j.contains("p_values")) p_values = j.at("p_values").get<std::vector<std::size_t>>();
    samples = j.value("samples", samples);
    seed = j.value("seed", seed);
  } catch (const Json::exception& e) {
    throw ValidationError({path + ": " + e.what()});
  } catch (const std::invalid_argument& e) {
    throw ValidationError({path + ": " + e.what()});
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete-event simulator for synchronous and asynchronous parameter-server SGD"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("config", run_args.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", run_args.seed, "override master seed");
  };
  auto add_common = [&](CLI::App* sub) {
    add_config(sub);
    sub->add_option("--out", run_args.out, "output directory (default: config 'outputs')");
    sub->add_option("--workers", run_args.workers, "concurrent replications (overrides STALESIM_WORKERS)");
    sub->add_option("--formats", run_args.formats, "comma-separated subset of csv,plot,svg");
  };

  auto* run_cmd = app.add_subcommand("run", "run every variant and replication of a config");
  add_common(run_cmd);

  auto* sweep_cmd = app.add_subcommand("sweep", "rerun a config for each value along one axis");
  add_common(sweep_cmd);
  std::string axis;
  std::vector<double> values;
  sweep_cmd->add_option("--axis", axis, "K, m or eta")->required();
  sweep_cmd->add_option("--values", values, "comma-separated values")->required()->delimiter(',');

  auto* trace_cmd = app.add_subcommand("trace", "export the raw trace of one replication");
  add_config(trace_cmd);
  trace_cmd->add_option("--out", run_args.out, "CSV file (default: stdout)");
  std::string label;
  std::size_t replication = 0;
  trace_cmd->add_option("--variant", label, "variant label")->required();
  trace_cmd->add_option("--replication", replication, "replication index");

  auto* theory_cmd = app.add_subcommand("theory", "closed-form runtime results");
  theory_cmd->require_subcommand(1);
  std::vector<std::string> dists;
  std::size_t samples = 100'000;
  std::uint64_t mc_seed = 1;
  auto* speedup_cmd = theory_cmd->add_subcommand("speedup", "fully-sync over fully-async speed-up table");
  std::size_t p_max = 64;
  std::vector<std::size_t> p_values;
  std::string speedup_out;
  std::string speedup_config;
  speedup_cmd->add_option("--dist", dists, "distribution, e.g. exp:1, shifted_exp:1,1, pareto:2,1");
  speedup_cmd->add_option("--config", speedup_config, "JSON recipe with distributions and P values")
      ->check(CLI::ExistingFile);
  speedup_cmd->add_option("--p-max", p_max, "largest P (rows are powers of two from 2)");
  speedup_cmd->add_option("--p-values", p_values, "explicit P values")->delimiter(',');
  speedup_cmd->add_option("--samples", samples, "Monte-Carlo samples where no closed form exists");
  speedup_cmd->add_option("--seed", mc_seed, "Monte-Carlo seed");
  speedup_cmd->add_option("--out", speedup_out, "write CSV here instead of stdout");

  auto* ratio_cmd = theory_cmd->add_subcommand("ratio", "K-async over K-batch-async runtime ratio");
  std::size_t ratio_p = 8;
  std::size_t ratio_k = 4;
  ratio_cmd->add_option("--dist", dists, "distribution shorthand")->required();
  ratio_cmd->add_option("-P", ratio_p, "learners");
  ratio_cmd->add_option("-K", ratio_k, "learners per update");
  ratio_cmd->add_option("--samples", samples, "Monte-Carlo samples");
  ratio_cmd->add_option("--seed", mc_seed, "Monte-Carlo seed");

  auto* stability_cmd = app.add_subcommand("stability", "bisect the fixed learning rate at which a variant diverges");
  add_config(stability_cmd);
  double lo = 0.01;
  double hi = 1.0;
  std::size_t steps = 40;
  stability_cmd->add_option("--variant", label, "variant label")->required();
  stability_cmd->add_option("--lo", lo, "a rate that does not diverge");
  stability_cmd->add_option("--hi", hi, "a rate that diverges");
  stability_cmd->add_option("--steps", steps, "bisection steps");
  stability_cmd->add_option("--replication", replication, "replication index");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(run_args);
    if (sweep_cmd->parsed()) return cmd_sweep(run_args, axis, values);
    if (trace_cmd->parsed()) return cmd_trace(run_args, label, replication);
    if (stability_cmd->parsed()) return cmd_stability(run_args, label, lo, hi, steps, replication);
    if (speedup_cmd->parsed()) {
      std::vector<RuntimeDistribution> parsed;
      if (!speedup_config.empty()) load_speedup_config(speedup_config, parsed, p_max, p_values, samples, mc_seed);
      for (auto& d : parse_dists(dists)) parsed.push_back(d);
      return cmd_speedup(parsed, p_max, p_values, samples, mc_seed, speedup_out);
    }
    if (ratio_cmd->parsed()) return cmd_ratio(dists, ratio_p, ratio_k, samples, mc_seed);
  } catch (const ValidationError& e) {
    std::cerr << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
