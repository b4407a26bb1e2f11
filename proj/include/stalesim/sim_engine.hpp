#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "stalesim/csv.hpp"
#include "stalesim/optimization.hpp"
#include "stalesim/runtime_models.hpp"

namespace stalesim {

/// Aggregation protocol run by the parameter server.
///
///  - KSync:       wait for the first K of P learners, cancel the rest.
///  - KBatchSync:  wait for the first K mini-batches (any learner, all at w_j),
///                 then cancel in-flight work.
///  - KAsync:      wait for the first K learners, never cancel; the others
///                 keep their in-flight (stale) work.
///  - KBatchAsync: every K pushed mini-batches trigger an update; a learner
///                 refetches and restarts as soon as it pushes.
enum class Protocol { KSync, KBatchSync, KAsync, KBatchAsync };

std::string to_string(Protocol p);
/// Accepts "ksync", "kbatchsync", "kasync", "kbatchasync" (also with dashes).
Protocol parse_protocol(std::string_view name);

struct VariantConfig {
  Protocol protocol = Protocol::KSync;
  std::size_t P = 1;  ///< learners
  std::size_t K = 1;  ///< learners (or mini-batches) per update
  std::size_t m = 1;  ///< mini-batch size
  LrSchedule schedule = LrSchedule::fixed(0.01);
  std::size_t J = 1;  ///< parameter-server updates

  /// Empty when valid.
  std::vector<std::string> violations() const;
  /// Throws std::invalid_argument listing the violations.
  void validate() const;

  bool synchronous() const noexcept { return protocol == Protocol::KSync || protocol == Protocol::KBatchSync; }
};

/// One parameter-server update. The record for update number `iteration`
/// (1-based) holds F(w_iteration); staleness entries are j - tau(l, j) with
/// j = iteration - 1, one per contributing mini-batch.
struct TraceRecord {
  std::size_t iteration = 0;
  double wallclock = 0.0;
  double loss = 0.0;
  std::vector<std::size_t> staleness;
  double eta = 0.0;
  double grad_norm = 0.0;  ///< |grad F(w_iteration)|

  std::size_t max_staleness() const noexcept;
  double mean_staleness() const noexcept;
};

struct SimTrace {
  VariantConfig config;
  std::uint64_t master_seed = 0;
  std::uint64_t replication = 0;
  double initial_loss = 0.0;  ///< F(w_0)
  std::vector<TraceRecord> records;
  Vector final_params;
  bool diverged = false;
  std::optional<std::size_t> divergence_iteration;
  /// w_0 .. w_n; filled only when SimOptions::record_params is set.
  std::vector<Vector> param_history;
};

struct SimOptions {
  std::uint64_t replication = 0;
  /// Defaults to the all-ones vector.
  std::optional<Vector> initial_params;
  /// Keep every iterate (needed by estimate_gamma).
  bool record_params = false;
  /// Loss above this, or non-finite, truncates the trace as diverged.
  double divergence_threshold = 1e12;
};

/// Runs one replication of the discrete-event simulation.
///
/// Learner l owns the stream derive_seed(master_seed, replication, l); it
/// supplies both its service times and its gradient noise. Events are ordered
/// by (completion time, learner id). All completions sharing a timestamp are
/// processed before any learner that must restart fetches parameters, so a
/// restart always reads the newest w at that instant.
SimTrace run(const VariantConfig& config, const Objective& objective, const RuntimeDistribution& dist,
             std::uint64_t master_seed, const SimOptions& options = {});

struct RuntimeMeasurement {
  double mean = 0.0;
  double stderr_ = 0.0;
  double variance = 0.0;  ///< sample variance of the increments
  std::size_t count = 0;
};

/// Mean and standard error of the wall-clock increments between consecutive
/// updates, after dropping the first burn_in records. Needs at least 100
/// increments after burn-in.
RuntimeMeasurement measure_runtime_per_iteration(const SimTrace& trace, std::size_t burn_in);

/// Header of the trace CSV schema.
const std::vector<std::string>& trace_csv_header();
CsvTable trace_to_csv(const SimTrace& trace);
void write_trace_csv(const std::filesystem::path& path, const SimTrace& trace);

}  // namespace stalesim
