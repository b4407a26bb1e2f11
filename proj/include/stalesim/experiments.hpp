#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stalesim/config.hpp"
#include "stalesim/sim_engine.hpp"
#include "stalesim/theory.hpp"

namespace stalesim {

/// Mean over replications, one entry per PS iteration (1-based iteration i
/// is stored at index i - 1).
struct IterationCurve {
  std::vector<double> wallclock;
  std::vector<double> loss;
  std::vector<double> loss_stderr;  ///< NaN with fewer than two replications
  std::vector<double> eta;
  std::vector<double> grad_norm;
  std::vector<double> max_staleness;
  std::vector<double> mean_staleness;

  std::size_t size() const noexcept { return loss.size(); }
};

/// Loss on a common wall-clock grid; each replication contributes the loss of
/// its last update at or before the grid time (F(w_0) before the first one).
struct TimeCurve {
  std::vector<double> time;
  std::vector<double> loss;
  std::vector<double> loss_stderr;
};

struct BoundOverlay {
  std::string kind;  ///< "ksync", "kasync" or "variable_lr"
  bool applicable = false;
  std::string reason;  ///< why it is not applicable
  TheoryParams params;
  BoundSeries series;
};

struct VariantResult {
  std::string label;
  VariantConfig config;
  RuntimeDistribution distribution = RuntimeDistribution::exponential(1.0);
  std::size_t replications = 0;
  std::vector<std::size_t> diverged;  ///< replication indices
  double initial_loss = 0.0;
  double f_star = 0.0;
  IterationCurve by_iteration;  ///< loss column holds F(w_j) - F*
  TimeCurve by_time;            ///< F(w) - F*
  std::optional<double> mean_T;
  std::optional<double> stderr_T;
  std::optional<double> theory_T;
  std::optional<double> final_loss;  ///< mean final F(w_J) - F*
  std::optional<double> final_loss_stderr;
  std::optional<P0Estimate> p0;
  std::optional<GammaEstimate> gamma;
  std::optional<BoundOverlay> bound;
};

struct ExperimentResult {
  std::string name;
  std::vector<VariantResult> variants;

  bool any_diverged() const noexcept;
};

/// Executes every (variant, replication) run, up to `config.workers` at a
/// time, and aggregates the traces. Replication r of every variant uses
/// master seed config.master_seed and replication index r.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Aggregates already-computed traces of one variant (traces[r] is
/// replication r). Exposed so aggregation can be tested independently.
VariantResult aggregate_variant(const ExperimentConfig& config, const VariantSpec& spec, const Objective& objective,
                                std::span<const SimTrace> traces);

/// Expected time per iteration predicted by the runtime results, when one
/// applies: E[X_{K:P}] (K-sync; K-async with memoryless service),
/// K/(P mu) (K-batch-sync with exponential service), K E[X]/P (K-batch-async).
std::optional<double> theoretical_runtime(const VariantConfig& config, const RuntimeDistribution& dist);

struct OutputFormats {
  bool csv = true;
  bool plot = true;
};
OutputFormats parse_formats(const std::string& list);

/// Writes summary.csv, per-variant curve CSVs and (optionally) SVG plots
/// into `dir`, creating it if needed.
void emit_outputs(const ExperimentResult& result, const std::filesystem::path& dir, const OutputFormats& formats);

const std::vector<std::string>& summary_csv_header();
CsvTable summary_table(const ExperimentResult& result);
CsvTable iteration_curve_table(const IterationCurve& curve);
CsvTable time_curve_table(const TimeCurve& curve);
/// Bound series in the trace schema with the loss column renamed `bound`.
CsvTable bound_table(const BoundOverlay& bound, const IterationCurve& curve);

enum class SweepAxis { K, m, eta };
SweepAxis parse_sweep_axis(const std::string& name);
std::string to_string(SweepAxis axis);

/// The config with `value` substituted along `axis` in every variant. For
/// axis m with shifted-exponential service, the shift becomes
/// m * unit_compute_time.
ExperimentConfig apply_sweep_value(const ExperimentConfig& config, SweepAxis axis, double value);

std::vector<ExperimentResult> sweep(const ExperimentConfig& config, SweepAxis axis, std::span<const double> values);

/// Speed-up of fully synchronous over fully asynchronous SGD for each P
/// (rows) and distribution (columns).
CsvTable speedup_table(std::span<const RuntimeDistribution> dists, std::span<const std::size_t> p_values,
                       std::size_t monte_carlo_samples, std::uint64_t seed);

/// Learning rates bracketing the onset of divergence.
struct StabilityBracket {
  double stable = 0.0;    ///< largest rate seen that finished without diverging
  double unstable = 0.0;  ///< smallest rate seen that diverged
};

/// Bisects the fixed learning rate of `variant` between a rate whose run
/// finishes (`lo`) and one that diverges (`hi`), using one replication of
/// the config's objective, distribution and master seed.
StabilityBracket find_stability_threshold(const ExperimentConfig& config, const VariantConfig& variant, double lo,
                                          double hi, std::size_t steps, std::uint64_t replication = 0);

/// Mean loss of a time curve at `t` (last grid point at or before t).
double loss_at_time(const TimeCurve& curve, double t);

}  // namespace stalesim
