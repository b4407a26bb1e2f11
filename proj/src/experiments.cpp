#include "stalesim/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "stalesim/errors.hpp"
#include "stalesim/svg_plot.hpp"

namespace stalesim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Running mean / variance over replications (Welford).
struct Moments {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double stderr_() const { return n < 2 ? kNaN : std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n)); }
};

bool needs_snapshots(const ExperimentConfig& config, const VariantConfig& v) {
  return config.theory_overlays && !v.synchronous() && v.schedule.kind() == LrSchedule::Kind::Fixed;
}

OrderStatisticMethod preferred_method(const RuntimeDistribution& dist) {
  if (dist.is<Exponential>() || dist.is<Deterministic>() || dist.is<ShiftedExponential>()) return Analytic{};
  return MonteCarlo{100'000, 0x0bd57a7ULL};
}

std::string optional_field(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

BoundOverlay make_bound(const ExperimentConfig& config, const VariantResult& r, const Objective& objective) {
  BoundOverlay b;
  b.params = TheoryParams::from(objective.constants(), r.config);
  const double f0_gap = r.initial_loss - r.f_star;
  const auto& v = r.config;
  const bool fixed = v.schedule.kind() == LrSchedule::Kind::Fixed;
  b.kind = !fixed ? "variable_lr" : v.synchronous() ? "ksync" : "kasync";
  if (r.by_iteration.size() == 0) {
    b.reason = "no replication completed without diverging";
    return b;
  }
  b.params.J = r.by_iteration.size();
  try {
    if (b.kind == "ksync") {
      b.series = bound_ksync(b.params, f0_gap);
    } else if (b.kind == "kasync") {
      if (!r.p0 || !r.gamma) {
        b.reason = "p0 or gamma estimate unavailable";
        return b;
      }
      b.params.p0 = r.p0->p0;
      b.params.gamma = r.gamma->gamma;
      if (r.gamma->hypothesis_violated) {
        b.reason = "estimated gamma exceeds 1";
        return b;
      }
      b.series = bound_kasync(b.params, f0_gap);
    } else {
      b.params.p0 = r.p0 ? r.p0->p0 : 0.0;
      b.series = bound_variable_lr(r.by_iteration.eta, b.params, f0_gap);
    }
    b.applicable = true;
  } catch (const PreconditionError& e) {
    b.reason = e.what();
  }
  (void)config;
  return b;
}

}  // namespace

bool ExperimentResult::any_diverged() const noexcept {
  return std::any_of(variants.begin(), variants.end(), [](const VariantResult& v) { return !v.diverged.empty(); });
}

std::optional<double> theoretical_runtime(const VariantConfig& v, const RuntimeDistribution& dist) {
  switch (v.protocol) {
    case Protocol::KSync: return expected_order_statistic(dist, v.K, v.P, preferred_method(dist)).value;
    case Protocol::KBatchSync:
      if (const auto* e = std::get_if<Exponential>(&dist.params())) {
        return static_cast<double>(v.K) / (static_cast<double>(v.P) * e->rate);
      }
      return std::nullopt;
    case Protocol::KAsync:
      if (classify_monotonicity(dist) == MonotonicityClass::Memoryless) {
        return expected_order_statistic(dist, v.K, v.P, Analytic{}).value;
      }
      return std::nullopt;
    case Protocol::KBatchAsync: return static_cast<double>(v.K) * dist.mean() / static_cast<double>(v.P);
  }
  return std::nullopt;
}

VariantResult aggregate_variant(const ExperimentConfig& config, const VariantSpec& spec, const Objective& objective,
                                std::span<const SimTrace> traces) {
  VariantResult r;
  r.label = spec.label;
  r.config = spec.config;
  r.distribution = config.distribution;
  r.replications = traces.size();
  r.f_star = objective.constants().F_star;
  r.theory_T = theoretical_runtime(spec.config, config.distribution);

  std::vector<const SimTrace*> ok;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    if (traces[i].diverged) {
      r.diverged.push_back(i);
    } else {
      ok.push_back(&traces[i]);
    }
  }
  if (!traces.empty()) r.initial_loss = traces.front().initial_loss;
  if (ok.empty()) {
    if (config.theory_overlays) r.bound = make_bound(config, r, objective);
    return r;
  }

  std::size_t n = std::numeric_limits<std::size_t>::max();
  for (const auto* t : ok) n = std::min(n, t->records.size());

  auto& c = r.by_iteration;
  c.wallclock.assign(n, 0.0);
  c.loss.assign(n, 0.0);
  c.loss_stderr.assign(n, kNaN);
  c.eta.assign(n, 0.0);
  c.grad_norm.assign(n, 0.0);
  c.max_staleness.assign(n, 0.0);
  c.mean_staleness.assign(n, 0.0);
  const auto reps = static_cast<double>(ok.size());
  for (std::size_t i = 0; i < n; ++i) {
    Moments loss;
    for (const auto* t : ok) {
      const auto& rec = t->records[i];
      loss.add(rec.loss - r.f_star);
      c.wallclock[i] += rec.wallclock / reps;
      c.eta[i] += rec.eta / reps;
      c.grad_norm[i] += rec.grad_norm / reps;
      c.max_staleness[i] += static_cast<double>(rec.max_staleness()) / reps;
      c.mean_staleness[i] += rec.mean_staleness() / reps;
    }
    c.loss[i] = loss.mean;
    c.loss_stderr[i] = loss.stderr_();
  }

  double horizon = 0.0;
  if (config.horizon) {
    horizon = *config.horizon;
  } else {
    for (const auto* t : ok) horizon = std::max(horizon, t->records.back().wallclock);
  }
  auto& tc = r.by_time;
  const std::size_t g = config.grid_points;
  tc.time.resize(g);
  tc.loss.resize(g);
  tc.loss_stderr.resize(g);
  std::vector<std::size_t> cursor(ok.size(), 0);
  for (std::size_t k = 0; k < g; ++k) {
    const double t = horizon * static_cast<double>(k) / static_cast<double>(g - 1);
    tc.time[k] = t;
    Moments m;
    for (std::size_t q = 0; q < ok.size(); ++q) {
      const auto& recs = ok[q]->records;
      auto& pos = cursor[q];  // number of records with wallclock <= t
      while (pos < recs.size() && recs[pos].wallclock <= t) ++pos;
      m.add((pos == 0 ? ok[q]->initial_loss : recs[pos - 1].loss) - r.f_star);
    }
    tc.loss[k] = m.mean;
    tc.loss_stderr[k] = m.stderr_();
  }

  Moments runtime;
  Moments final_loss;
  for (const auto* t : ok) {
    final_loss.add(t->records.back().loss - r.f_star);
    if (t->records.size() > config.burn_in && t->records.size() - config.burn_in >= 100) {
      runtime.add(measure_runtime_per_iteration(*t, config.burn_in).mean);
    }
  }
  r.final_loss = final_loss.mean;
  if (final_loss.n >= 2) r.final_loss_stderr = final_loss.stderr_();
  if (runtime.n > 0) r.mean_T = runtime.mean;
  if (runtime.n >= 2) r.stderr_T = runtime.stderr_();

  std::vector<SimTrace> pooled;  // estimators take a contiguous span
  const bool all_ok = ok.size() == traces.size();
  std::span<const SimTrace> view = traces;
  if (!all_ok) {
    for (const auto* t : ok) pooled.push_back(*t);
    view = pooled;
  }
  if (spec.config.synchronous() || n >= 1000) r.p0 = estimate_p0(view);
  if (!view.front().param_history.empty()) r.gamma = estimate_gamma(view, objective);

  if (config.theory_overlays) r.bound = make_bound(config, r, objective);
  return r;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  if (auto v = config.violations(); !v.empty()) throw ValidationError(std::move(v));
  const ObjectivePtr objective = build_objective(config.objective);
  Vector w0 = Vector::Constant(static_cast<Eigen::Index>(objective->dim()), config.init_value);

  const std::size_t nv = config.variants.size();
  const std::size_t reps = config.replications;
  std::vector<std::vector<SimTrace>> traces(nv, std::vector<SimTrace>(reps));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    while (true) {
      const std::size_t task = next.fetch_add(1);
      if (task >= nv * reps) return;
      const std::size_t v = task / reps;
      const std::size_t r = task % reps;
      try {
        SimOptions opt;
        opt.replication = r;
        opt.initial_params = w0;
        opt.record_params = needs_snapshots(config, config.variants[v].config);
        traces[v][r] = run(config.variants[v].config, *objective, config.distribution, config.master_seed, opt);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(nv * reps);
      }
    }
  };
  const std::size_t nthreads = std::max<std::size_t>(1, std::min(config.workers, nv * reps));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentResult result;
  result.name = config.name;
  for (std::size_t v = 0; v < nv; ++v) {
    result.variants.push_back(aggregate_variant(config, config.variants[v], *objective, traces[v]));
    traces[v].clear();
    traces[v].shrink_to_fit();
  }
  return result;
}

OutputFormats parse_formats(const std::string& list) {
  OutputFormats f{false, false};
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t end = std::min(list.find(',', start), list.size());
    const std::string item = list.substr(start, end - start);
    if (item == "csv") {
      f.csv = true;
    } else if (item == "plot" || item == "svg") {
      f.plot = true;
    } else if (!item.empty()) {
      throw std::invalid_argument("unknown output format '" + item + "'");
    }
    start = end + 1;
  }
  return f;
}

const std::vector<std::string>& summary_csv_header() {
  static const std::vector<std::string> h{"variant", "K",        "P",          "m",     "eta",
                                          "mean_T",  "stderr_T", "theory_T",   "final_loss",
                                          "bound",   "bound_applicable"};
  return h;
}

CsvTable summary_table(const ExperimentResult& result) {
  CsvTable t;
  t.header = summary_csv_header();
  for (const auto& v : result.variants) {
    t.rows.push_back({v.label, std::to_string(v.config.K), std::to_string(v.config.P), std::to_string(v.config.m),
                      format_double(v.config.schedule.eta_max()), optional_field(v.mean_T), optional_field(v.stderr_T),
                      optional_field(v.theory_T), optional_field(v.final_loss), v.bound ? v.bound->kind : "",
                      v.bound ? (v.bound->applicable ? "true" : "false") : ""});
  }
  return t;
}

CsvTable iteration_curve_table(const IterationCurve& c) {
  CsvTable t;
  t.header = trace_csv_header();
  for (std::size_t i = 0; i < c.size(); ++i) {
    t.rows.push_back({std::to_string(i + 1), format_double(c.wallclock[i]), format_double(c.loss[i]),
                      format_double(c.eta[i]), format_double(c.grad_norm[i]), format_double(c.max_staleness[i]),
                      format_double(c.mean_staleness[i])});
  }
  return t;
}

CsvTable time_curve_table(const TimeCurve& c) {
  CsvTable t;
  t.header = {"wallclock", "loss", "loss_stderr"};
  for (std::size_t i = 0; i < c.time.size(); ++i) {
    t.rows.push_back({format_double(c.time[i]), format_double(c.loss[i]), format_double(c.loss_stderr[i])});
  }
  return t;
}

CsvTable bound_table(const BoundOverlay& b, const IterationCurve& c) {
  CsvTable t;
  t.header = trace_csv_header();
  t.header[2] = "bound";
  const std::size_t n = std::min(c.size(), b.series.values.size() == 0 ? 0 : b.series.values.size() - 1);
  for (std::size_t i = 0; i < n; ++i) {
    t.rows.push_back({std::to_string(i + 1), format_double(c.wallclock[i]), format_double(b.series.values[i + 1]),
                      format_double(c.eta[i]), format_double(c.grad_norm[i]), format_double(c.max_staleness[i]),
                      format_double(c.mean_staleness[i])});
  }
  return t;
}

void emit_outputs(const ExperimentResult& result, const std::filesystem::path& dir, const OutputFormats& formats) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());

  if (formats.csv) {
    write_csv(dir / "summary.csv", summary_table(result));
    for (const auto& v : result.variants) {
      write_csv(dir / (v.label + ".csv"), iteration_curve_table(v.by_iteration));
      write_csv(dir / (v.label + "_time.csv"), time_curve_table(v.by_time));
      if (v.bound && v.bound->applicable) write_csv(dir / (v.label + "_bound.csv"), bound_table(*v.bound, v.by_iteration));
    }
  }
  if (formats.plot && !result.variants.empty()) {
    PlotSpec by_time{result.name + ": error vs wall-clock time", "wall-clock time", "F(w) - F*", true, {}};
    PlotSpec by_iter{result.name + ": error vs iterations", "iteration", "F(w) - F*", true, {}};
    for (const auto& v : result.variants) {
      by_time.series.push_back({v.label, v.by_time.time, v.by_time.loss, false});
      std::vector<double> iters(v.by_iteration.size());
      for (std::size_t i = 0; i < iters.size(); ++i) iters[i] = static_cast<double>(i + 1);
      by_iter.series.push_back({v.label, iters, v.by_iteration.loss, false});
      if (v.bound && v.bound->applicable) {
        const auto& b = v.bound->series.values;
        std::vector<double> bv(b.begin() + 1, b.begin() + 1 + static_cast<std::ptrdiff_t>(v.by_iteration.size()));
        by_time.series.push_back({v.label + " bound", v.by_iteration.wallclock, bv, true});
        by_iter.series.push_back({v.label + " bound", iters, bv, true});
      }
    }
    write_svg(dir / "loss_vs_time.svg", by_time);
    write_svg(dir / "loss_vs_iteration.svg", by_iter);
  }
}

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "K") return SweepAxis::K;
  if (name == "m") return SweepAxis::m;
  if (name == "eta") return SweepAxis::eta;
  throw std::invalid_argument("unknown sweep axis '" + name + "' (expected K, m or eta)");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::K: return "K";
    case SweepAxis::m: return "m";
    case SweepAxis::eta: return "eta";
  }
  return "?";
}

ExperimentConfig apply_sweep_value(const ExperimentConfig& config, SweepAxis axis, double value) {
  ExperimentConfig c = config;
  const std::string suffix = "_" + to_string(axis) + format_double(value);
  c.name += suffix;
  const auto as_count = [&] {
    if (!(value >= 1.0) || value != std::floor(value)) {
      throw ValidationError({to_string(axis) + " sweep values must be positive integers"});
    }
    return static_cast<std::size_t>(value);
  };
  for (auto& v : c.variants) {
    v.label += suffix;
    switch (axis) {
      case SweepAxis::K: v.config.K = as_count(); break;
      case SweepAxis::m: v.config.m = as_count(); break;
      case SweepAxis::eta:
        if (!(value > 0.0)) throw ValidationError({"eta sweep values must be positive"});
        v.config.schedule = v.config.schedule.kind() == LrSchedule::Kind::Fixed
                                ? LrSchedule::fixed(value)
                                : LrSchedule::staleness_compensated(v.config.schedule.C(), value);
        break;
    }
  }
  if (axis == SweepAxis::m) {
    if (const auto* d = std::get_if<ShiftedExponential>(&c.distribution.params())) {
      c.distribution = RuntimeDistribution::shifted_exponential(value * config.unit_compute_time, d->rate);
    }
  }
  if (auto v = c.violations(); !v.empty()) throw ValidationError(std::move(v));
  return c;
}

std::vector<ExperimentResult> sweep(const ExperimentConfig& config, SweepAxis axis, std::span<const double> values) {
  std::vector<ExperimentConfig> configs;
  for (double v : values) configs.push_back(apply_sweep_value(config, axis, v));
  std::vector<ExperimentResult> out;
  for (const auto& c : configs) out.push_back(run_experiment(c));
  return out;
}

CsvTable speedup_table(std::span<const RuntimeDistribution> dists, std::span<const std::size_t> p_values,
                       std::size_t monte_carlo_samples, std::uint64_t seed) {
  CsvTable t;
  t.header.push_back("P");
  for (const auto& d : dists) {
    std::string name = d.describe();
    std::replace(name.begin(), name.end(), ',', ';');
    t.header.push_back(std::move(name));
  }
  for (std::size_t p : p_values) {
    std::vector<std::string> row{std::to_string(p)};
    for (const auto& d : dists) {
      OrderStatisticMethod method = Analytic{};
      if (!(d.is<Exponential>() || d.is<Deterministic>() || d.is<ShiftedExponential>())) {
        method = MonteCarlo{monte_carlo_samples, seed};
      }
      row.push_back(format_double(speedup_sync_over_async(d, p, method).value));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

StabilityBracket find_stability_threshold(const ExperimentConfig& config, const VariantConfig& variant, double lo,
                                          double hi, std::size_t steps, std::uint64_t replication) {
  if (!(lo > 0.0) || !(hi > lo)) throw std::invalid_argument("stability search needs 0 < lo < hi");
  const ObjectivePtr objective = build_objective(config.objective);
  SimOptions opt;
  opt.replication = replication;
  opt.initial_params = Vector::Constant(static_cast<Eigen::Index>(objective->dim()), config.init_value);
  const auto diverges = [&](double eta) {
    VariantConfig v = variant;
    v.schedule = LrSchedule::fixed(eta);
    return run(v, *objective, config.distribution, config.master_seed, opt).diverged;
  };
  if (diverges(lo)) throw std::invalid_argument("stability search: the lower rate already diverges");
  if (!diverges(hi)) throw std::invalid_argument("stability search: the upper rate does not diverge");
  StabilityBracket b{lo, hi};
  for (std::size_t i = 0; i < steps; ++i) {
    const double mid = 0.5 * (b.stable + b.unstable);
    (diverges(mid) ? b.unstable : b.stable) = mid;
  }
  return b;
}

double loss_at_time(const TimeCurve& curve, double t) {
  double v = kNaN;
  for (std::size_t i = 0; i < curve.time.size() && curve.time[i] <= t; ++i) v = curve.loss[i];
  return v;
}

}  // namespace stalesim
