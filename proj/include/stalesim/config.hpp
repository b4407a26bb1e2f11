#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stalesim/optimization.hpp"
#include "stalesim/runtime_models.hpp"
#include "stalesim/sim_engine.hpp"

namespace stalesim {

using Json = nlohmann::json;

/// {"kind": "pareto", "shape": 2, "scale": 1} and friends.
RuntimeDistribution distribution_from_json(const Json& j);
Json distribution_to_json(const RuntimeDistribution& dist);

/// Shorthand used on the command line: "exp:1", "shifted_exp:1,1",
/// "pareto:2,1", "det:1", "hyperexp:0.5,0.5;0.25,4" (weights;rates).
RuntimeDistribution parse_distribution_shorthand(const std::string& text);

struct ObjectiveSpec {
  std::string kind = "quadratic";  ///< "quadratic" or "logistic"
  // quadratic
  std::size_t dim = 8;
  std::vector<double> eigenvalues;
  double sigma = 1.0;
  double multiplicative_variance = 0.0;
  // logistic
  std::size_t n_samples = 1000;
  double lambda = 0.01;
  std::uint64_t data_seed = 0;
  std::optional<std::filesystem::path> csv;         ///< labeled CSV instead of synthetic data
  std::optional<std::filesystem::path> idx_images;  ///< IDX images + labels instead of synthetic data
  std::optional<std::filesystem::path> idx_labels;
  double positive_label = 1.0;
  std::size_t max_samples = 0;
};

ObjectiveSpec objective_spec_from_json(const Json& j);
Json objective_spec_to_json(const ObjectiveSpec& spec);
ObjectivePtr build_objective(const ObjectiveSpec& spec);

struct VariantSpec {
  std::string label;
  VariantConfig config;
};

struct ExperimentConfig {
  std::string name;
  std::vector<VariantSpec> variants;
  ObjectiveSpec objective;
  RuntimeDistribution distribution = RuntimeDistribution::exponential(1.0);
  std::size_t replications = 1;
  std::uint64_t master_seed = 0;
  std::size_t burn_in = 0;
  std::filesystem::path outputs = "out";
  std::size_t workers = 1;
  double init_value = 1.0;        ///< w_0 = init_value * ones
  std::optional<double> horizon;  ///< wall-clock end of the common time grid
  std::size_t grid_points = 200;
  double unit_compute_time = 1.0;  ///< per-sample shift used by m sweeps
  bool theory_overlays = true;

  /// Empty when valid.
  std::vector<std::string> violations() const;
};

/// Parses and validates; throws ValidationError listing every problem.
ExperimentConfig experiment_config_from_json(const Json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
Json experiment_config_to_json(const ExperimentConfig& config);

Json schedule_to_json(const LrSchedule& s);
LrSchedule schedule_from_json(const Json& j);

}  // namespace stalesim
