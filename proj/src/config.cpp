#include "stalesim/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "stalesim/csv.hpp"
#include "stalesim/datasets.hpp"
#include "stalesim/errors.hpp"

namespace stalesim {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<double> split_numbers(const std::string& text, char sep) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(sep, start), text.size());
    out.push_back(parse_double(std::string_view(text).substr(start, end - start)));
    start = end + 1;
  }
  return out;
}

bool filesystem_safe(const std::string& s) {
  if (s.empty() || s == "." || s == "..") return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isalnum(c) || c == '_' || c == '-' || c == '.'; });
}

}  // namespace

RuntimeDistribution distribution_from_json(const Json& j) {
  const std::string kind = lower(j.at("kind").get<std::string>());
  if (kind == "deterministic") return RuntimeDistribution::deterministic(j.at("value").get<double>());
  if (kind == "exponential" || kind == "exp") return RuntimeDistribution::exponential(j.at("rate").get<double>());
  if (kind == "shifted_exponential" || kind == "shifted-exponential") {
    return RuntimeDistribution::shifted_exponential(j.at("shift").get<double>(), j.at("rate").get<double>());
  }
  if (kind == "pareto") return RuntimeDistribution::pareto(j.at("shape").get<double>(), j.at("scale").get<double>());
  if (kind == "hyperexponential" || kind == "hyper_exponential") {
    return RuntimeDistribution::hyper_exponential(j.at("weights").get<std::vector<double>>(),
                                                  j.at("rates").get<std::vector<double>>());
  }
  throw std::invalid_argument("unknown distribution kind '" + kind + "'");
}

Json distribution_to_json(const RuntimeDistribution& dist) {
  const auto& p = dist.params();
  if (const auto* d = std::get_if<Deterministic>(&p)) return {{"kind", "deterministic"}, {"value", d->value}};
  if (const auto* d = std::get_if<Exponential>(&p)) return {{"kind", "exponential"}, {"rate", d->rate}};
  if (const auto* d = std::get_if<ShiftedExponential>(&p)) {
    return {{"kind", "shifted_exponential"}, {"shift", d->shift}, {"rate", d->rate}};
  }
  if (const auto* d = std::get_if<Pareto>(&p)) return {{"kind", "pareto"}, {"shape", d->shape}, {"scale", d->scale}};
  const auto& h = std::get<HyperExponential>(p);
  return {{"kind", "hyperexponential"}, {"weights", h.weights}, {"rates", h.rates}};
}

RuntimeDistribution parse_distribution_shorthand(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("distribution shorthand needs 'kind:params': " + text);
  const std::string kind = lower(text.substr(0, colon));
  const std::string args = text.substr(colon + 1);
  if (kind == "hyperexp") {
    const auto semi = args.find(';');
    if (semi == std::string::npos) throw std::invalid_argument("hyperexp shorthand is 'hyperexp:w1,w2;r1,r2'");
    return RuntimeDistribution::hyper_exponential(split_numbers(args.substr(0, semi), ','),
                                                  split_numbers(args.substr(semi + 1), ','));
  }
  const auto v = split_numbers(args, ',');
  const auto need = [&](std::size_t n) {
    if (v.size() != n) throw std::invalid_argument("wrong parameter count in '" + text + "'");
  };
  if (kind == "det" || kind == "deterministic") {
    need(1);
    return RuntimeDistribution::deterministic(v[0]);
  }
  if (kind == "exp" || kind == "exponential") {
    need(1);
    return RuntimeDistribution::exponential(v[0]);
  }
  if (kind == "shifted_exp" || kind == "shifted_exponential") {
    need(2);
    return RuntimeDistribution::shifted_exponential(v[0], v[1]);
  }
  if (kind == "pareto") {
    need(2);
    return RuntimeDistribution::pareto(v[0], v[1]);
  }
  throw std::invalid_argument("unknown distribution kind '" + kind + "'");
}

ObjectiveSpec objective_spec_from_json(const Json& j) {
  ObjectiveSpec s;
  s.kind = lower(j.contains("objective") ? j.at("objective").get<std::string>() : j.value("kind", std::string("quadratic")));
  if (s.kind == "quadratic") {
    s.dim = j.value("dim", std::size_t{8});
    if (j.contains("eigenvalues")) {
      s.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
    } else if (j.contains("eigen_range")) {
      // Evenly spaced eigenvalues between the two ends.
      const auto range = j.at("eigen_range").get<std::vector<double>>();
      if (range.size() != 2) throw std::invalid_argument("eigen_range needs [min, max]");
      for (std::size_t i = 0; i < s.dim; ++i) {
        const double f = s.dim == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(s.dim - 1);
        s.eigenvalues.push_back(range[0] + f * (range[1] - range[0]));
      }
    } else {
      s.eigenvalues.assign(s.dim, 1.0);
    }
    s.sigma = j.value("sigma", 1.0);
    s.multiplicative_variance = j.value("multiplicative_variance", 0.0);
  } else if (s.kind == "logistic") {
    s.n_samples = j.value("n_samples", std::size_t{1000});
    s.dim = j.value("dim", std::size_t{10});
    s.lambda = j.value("lambda", 0.01);
    s.data_seed = j.value("data_seed", std::uint64_t{0});
    if (j.contains("csv")) s.csv = j.at("csv").get<std::string>();
    if (j.contains("idx_images")) s.idx_images = j.at("idx_images").get<std::string>();
    if (j.contains("idx_labels")) s.idx_labels = j.at("idx_labels").get<std::string>();
    s.positive_label = j.value("positive_label", 1.0);
    s.max_samples = j.value("max_samples", std::size_t{0});
  } else {
    throw std::invalid_argument("unknown objective '" + s.kind + "'");
  }
  return s;
}

Json objective_spec_to_json(const ObjectiveSpec& s) {
  Json j;
  j["objective"] = s.kind;
  if (s.kind == "quadratic") {
    j["dim"] = s.dim;
    j["eigenvalues"] = s.eigenvalues;
    j["sigma"] = s.sigma;
    if (s.multiplicative_variance != 0.0) j["multiplicative_variance"] = s.multiplicative_variance;
  } else {
    j["n_samples"] = s.n_samples;
    j["dim"] = s.dim;
    j["lambda"] = s.lambda;
    j["data_seed"] = s.data_seed;
    if (s.csv) j["csv"] = s.csv->string();
    if (s.idx_images) j["idx_images"] = s.idx_images->string();
    if (s.idx_labels) j["idx_labels"] = s.idx_labels->string();
    j["positive_label"] = s.positive_label;
    if (s.max_samples) j["max_samples"] = s.max_samples;
  }
  return j;
}

ObjectivePtr build_objective(const ObjectiveSpec& s) {
  if (s.kind == "quadratic") return make_quadratic(s.dim, s.eigenvalues, s.sigma, s.multiplicative_variance);
  if (s.kind == "logistic") {
    if (s.csv) return make_logistic(load_labeled_csv(*s.csv, s.positive_label), s.lambda);
    if (s.idx_images && s.idx_labels) {
      return make_logistic(load_idx_dataset(*s.idx_images, *s.idx_labels, static_cast<int>(s.positive_label), s.max_samples),
                           s.lambda);
    }
    RandomStream rng(s.data_seed);
    return make_logistic(s.n_samples, s.dim, s.lambda, rng);
  }
  throw std::invalid_argument("unknown objective '" + s.kind + "'");
}

Json schedule_to_json(const LrSchedule& s) {
  if (s.kind() == LrSchedule::Kind::Fixed) return {{"kind", "fixed"}, {"eta", s.eta_max()}};
  return {{"kind", "staleness_compensated"}, {"C", s.C()}, {"eta_max", s.eta_max()}};
}

LrSchedule schedule_from_json(const Json& j) {
  const std::string kind = lower(j.value("kind", std::string("fixed")));
  if (kind == "fixed") return LrSchedule::fixed(j.at("eta").get<double>());
  if (kind == "staleness_compensated") {
    const double eta_max = j.at("eta_max").get<double>();
    // C may be given absolutely or as a multiple of eta_max.
    const double C = j.contains("C") ? j.at("C").get<double>() : j.at("C_over_eta_max").get<double>() * eta_max;
    return LrSchedule::staleness_compensated(C, eta_max);
  }
  throw std::invalid_argument("unknown schedule kind '" + kind + "'");
}

std::vector<std::string> ExperimentConfig::violations() const {
  std::vector<std::string> v;
  if (!filesystem_safe(name)) v.push_back("name '" + name + "' is not filesystem-safe ([A-Za-z0-9_.-]+)");
  if (replications < 1) v.emplace_back("replications must be at least 1");
  if (workers < 1) v.emplace_back("workers must be at least 1");
  if (grid_points < 2) v.emplace_back("grid_points must be at least 2");
  if (horizon && !(*horizon > 0.0)) v.emplace_back("horizon must be positive");
  if (!(unit_compute_time > 0.0)) v.emplace_back("unit_compute_time must be positive");
  if (variants.empty()) v.emplace_back("at least one variant is required");
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const auto& spec = variants[i];
    const std::string where = "variant " + std::to_string(i) + " (" + spec.label + "): ";
    if (!filesystem_safe(spec.label)) v.push_back(where + "label is not filesystem-safe");
    if (std::find(labels.begin(), labels.end(), spec.label) != labels.end()) v.push_back(where + "duplicate label");
    labels.push_back(spec.label);
    for (const auto& s : spec.config.violations()) v.push_back(where + s);
    if (burn_in >= spec.config.J) v.push_back(where + "burn_in must be smaller than J");
  }
  if (objective.kind == "quadratic" && objective.eigenvalues.size() != objective.dim) {
    v.emplace_back("objective: need one eigenvalue per dimension");
  }
  return v;
}

ExperimentConfig experiment_config_from_json(const Json& j) {
  std::vector<std::string> errors;
  ExperimentConfig c;
  const auto attempt = [&](const char* what, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      errors.push_back(std::string(what) + ": " + e.what());
    }
  };
  if (!j.is_object()) throw ValidationError({"configuration must be a JSON object"});

  attempt("name", [&] { c.name = j.at("name").get<std::string>(); });
  bool objective_failed = true;
  attempt("objective", [&] {
    c.objective = objective_spec_from_json(j.at("objective"));
    objective_failed = false;
  });
  attempt("distribution", [&] { c.distribution = distribution_from_json(j.at("distribution")); });
  attempt("replications", [&] { c.replications = j.value("replications", std::size_t{1}); });
  attempt("master_seed", [&] { c.master_seed = j.value("master_seed", std::uint64_t{0}); });
  attempt("burn_in", [&] { c.burn_in = j.value("burn_in", std::size_t{0}); });
  attempt("outputs", [&] { c.outputs = j.value("outputs", std::string("out")); });
  attempt("workers", [&] { c.workers = j.value("workers", std::size_t{1}); });
  attempt("init_value", [&] { c.init_value = j.value("init_value", 1.0); });
  attempt("horizon", [&] {
    if (j.contains("horizon")) c.horizon = j.at("horizon").get<double>();
  });
  attempt("grid_points", [&] { c.grid_points = j.value("grid_points", std::size_t{200}); });
  attempt("unit_compute_time", [&] { c.unit_compute_time = j.value("unit_compute_time", 1.0); });
  attempt("theory_overlays", [&] { c.theory_overlays = j.value("theory_overlays", true); });

  if (!j.contains("variants") || !j.at("variants").is_array()) {
    errors.emplace_back("variants: a list of variant records is required");
  } else {
    std::size_t index = 0;
    for (const auto& vj : j.at("variants")) {
      const std::string where = "variants[" + std::to_string(index++) + "]";
      try {
        VariantSpec spec;
        spec.config.protocol = parse_protocol(vj.at("protocol").get<std::string>());
        spec.config.P = vj.at("P").get<std::size_t>();
        spec.config.K = vj.at("K").get<std::size_t>();
        spec.config.m = vj.value("m", std::size_t{1});
        spec.config.J = vj.at("J").get<std::size_t>();
        spec.config.schedule = schedule_from_json(vj.at("schedule"));
        spec.label = vj.value("label", to_string(spec.config.protocol) + "_K" + std::to_string(spec.config.K) + "_P" +
                                           std::to_string(spec.config.P));
        c.variants.push_back(std::move(spec));
      } catch (const std::exception& e) {
        errors.push_back(where + ": " + e.what());
      }
    }
  }
  const bool variants_failed = !errors.empty() && c.variants.empty();
  for (auto& v : c.violations()) {
    if (variants_failed && v == "at least one variant is required") continue;
    if (objective_failed && v.rfind("objective:", 0) == 0) continue;
    errors.push_back(std::move(v));
  }
  if (!errors.empty()) throw ValidationError(std::move(errors));
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError({"cannot open config file " + path.string()});
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& e) {
    throw ValidationError({path.string() + ": " + e.what()});
  }
  return experiment_config_from_json(j);
}

Json experiment_config_to_json(const ExperimentConfig& c) {
  Json j;
  j["name"] = c.name;
  j["objective"] = objective_spec_to_json(c.objective);
  j["distribution"] = distribution_to_json(c.distribution);
  j["replications"] = c.replications;
  j["master_seed"] = c.master_seed;
  j["burn_in"] = c.burn_in;
  j["outputs"] = c.outputs.string();
  j["workers"] = c.workers;
  j["init_value"] = c.init_value;
  if (c.horizon) j["horizon"] = *c.horizon;
  j["grid_points"] = c.grid_points;
  j["unit_compute_time"] = c.unit_compute_time;
  j["theory_overlays"] = c.theory_overlays;
  j["variants"] = Json::array();
  for (const auto& v : c.variants) {
    j["variants"].push_back({{"label", v.label},
                             {"protocol", to_string(v.config.protocol)},
                             {"P", v.config.P},
                             {"K", v.config.K},
                             {"m", v.config.m},
                             {"J", v.config.J},
                             {"schedule", schedule_to_json(v.config.schedule)}});
  }
  return j;
}

}  // namespace stalesim
