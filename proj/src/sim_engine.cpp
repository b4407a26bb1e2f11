#include "stalesim/sim_engine.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <queue>
#include <stdexcept>

#include "stalesim/errors.hpp"

namespace stalesim {

std::string to_string(Protocol p) {
  switch (p) {
    case Protocol::KSync: return "ksync";
    case Protocol::KBatchSync: return "kbatchsync";
    case Protocol::KAsync: return "kasync";
    case Protocol::KBatchAsync: return "kbatchasync";
  }
  return "unknown";
}

Protocol parse_protocol(std::string_view name) {
  std::string key;
  for (char ch : name) {
    if (ch != '-' && ch != '_') key += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  if (key == "ksync") return Protocol::KSync;
  if (key == "kbatchsync") return Protocol::KBatchSync;
  if (key == "kasync") return Protocol::KAsync;
  if (key == "kbatchasync") return Protocol::KBatchAsync;
  throw std::invalid_argument("unknown protocol '" + std::string(name) + "'");
}

std::vector<std::string> VariantConfig::violations() const {
  std::vector<std::string> v;
  if (P < 1) v.emplace_back("P must be at least 1");
  if (K < 1 || K > P) v.emplace_back("K must satisfy 1 <= K <= P");
  if (m < 1) v.emplace_back("mini-batch size m must be at least 1");
  if (J < 1) v.emplace_back("J must be at least 1");
  return v;
}

void VariantConfig::validate() const {
  const auto v = violations();
  if (v.empty()) return;
  std::string msg = "invalid variant config:";
  for (const auto& s : v) msg += " " + s + ";";
  throw std::invalid_argument(msg);
}

std::size_t TraceRecord::max_staleness() const noexcept {
  std::size_t m = 0;
  for (auto s : staleness) m = std::max(m, s);
  return m;
}

double TraceRecord::mean_staleness() const noexcept {
  if (staleness.empty()) return 0.0;
  double s = 0.0;
  for (auto x : staleness) s += static_cast<double>(x);
  return s / static_cast<double>(staleness.size());
}

namespace {

struct Event {
  double time;
  std::size_t learner;
  std::uint64_t generation;
};

// Min-heap on (time, learner id).
struct EventAfter {
  bool operator()(const Event& a, const Event& b) const noexcept {
    if (a.time != b.time) return a.time > b.time;
    return a.learner > b.learner;
  }
};

struct Learner {
  explicit Learner(std::uint64_t seed) : rng(seed) {}

  RandomStream rng;
  double busy_until = 0.0;
  std::size_t read_iteration = 0;
  Vector read_params;
  bool in_flight = false;
  std::uint64_t generation = 0;  // bumped on cancellation; stale events are dropped
};

struct Contribution {
  std::size_t learner;
  std::size_t read_iteration;
  Vector read_params;
  Vector gradient;
};

class Simulation {
 public:
  Simulation(const VariantConfig& config, const Objective& objective, const RuntimeDistribution& dist,
             std::uint64_t master_seed, const SimOptions& options)
      : config_(config), objective_(objective), dist_(dist), options_(options) {
    trace_.config = config;
    trace_.master_seed = master_seed;
    trace_.replication = options.replication;
    w_ = options.initial_params ? *options.initial_params : Vector::Ones(static_cast<Eigen::Index>(objective.dim()));
    if (static_cast<std::size_t>(w_.size()) != objective.dim()) {
      throw std::invalid_argument("initial parameter dimension does not match the objective");
    }
    learners_.reserve(config.P);
    for (std::size_t l = 0; l < config.P; ++l) learners_.emplace_back(derive_seed(master_seed, options.replication, l));
    restart_.assign(config.P, false);
    trace_.records.reserve(config.J);
    trace_.initial_loss = objective.loss(w_);
    if (options.record_params) trace_.param_history.push_back(w_);
  }

  SimTrace run() {
    std::fill(restart_.begin(), restart_.end(), true);
    flush_restarts();
    std::vector<Event> batch;
    while (!finished()) {
      if (queue_.empty()) throw std::logic_error("event queue drained before the run finished");
      clock_ = queue_.top().time;
      batch.clear();
      while (!queue_.empty() && queue_.top().time == clock_) {
        batch.push_back(queue_.top());
        queue_.pop();
      }
      for (const auto& e : batch) {
        if (finished()) break;
        Learner& learner = learners_[e.learner];
        if (e.generation != learner.generation || !learner.in_flight) continue;
        learner.in_flight = false;
        complete(e.learner);
      }
      if (!finished()) flush_restarts();
    }
    trace_.final_params = w_;
    return std::move(trace_);
  }

 private:
  bool finished() const noexcept { return trace_.diverged || trace_.records.size() >= config_.J; }

  void start(std::size_t id) {
    Learner& l = learners_[id];
    l.read_iteration = iteration_;
    l.read_params = w_;
    l.busy_until = clock_ + dist_.sample(l.rng);
    l.in_flight = true;
    queue_.push(Event{l.busy_until, id, l.generation});
  }

  void flush_restarts() {
    for (std::size_t id = 0; id < learners_.size(); ++id) {
      if (restart_[id]) {
        restart_[id] = false;
        start(id);
      }
    }
  }

  void cancel_all_and_restart() {
    for (std::size_t id = 0; id < learners_.size(); ++id) {
      if (learners_[id].in_flight) {
        ++learners_[id].generation;
        learners_[id].in_flight = false;
      }
      restart_[id] = true;
    }
  }

  void complete(std::size_t id) {
    Learner& l = learners_[id];
    buffer_.push_back(Contribution{id, l.read_iteration, l.read_params,
                                   objective_.stochastic_gradient(l.read_params, config_.m, l.rng)});
    switch (config_.protocol) {
      case Protocol::KSync:
        if (buffer_.size() == config_.K) {
          apply_update();
          cancel_all_and_restart();
        }
        break;
      case Protocol::KBatchSync:
        restart_[id] = true;  // next mini-batch at the same w_j unless an update intervenes
        if (buffer_.size() == config_.K) {
          apply_update();
          cancel_all_and_restart();
        }
        break;
      case Protocol::KAsync:
        // The learner idles until the update consuming its gradient.
        if (buffer_.size() == config_.K) {
          for (const auto& c : buffer_) restart_[c.learner] = true;
          apply_update();
        }
        break;
      case Protocol::KBatchAsync:
        restart_[id] = true;
        if (buffer_.size() == config_.K) apply_update();
        break;
    }
  }

  void apply_update() {
    TraceRecord rec;
    rec.staleness.reserve(buffer_.size());
    Vector direction = Vector::Zero(w_.size());
    double drift = 0.0;
    const bool compensated = config_.schedule.kind() == LrSchedule::Kind::StalenessCompensated;
    for (const auto& c : buffer_) {
      rec.staleness.push_back(iteration_ - c.read_iteration);
      direction += c.gradient;
      if (compensated) drift = std::max(drift, (w_ - c.read_params).squaredNorm());
    }
    rec.eta = config_.schedule.rate(drift);
    w_ -= (rec.eta / static_cast<double>(buffer_.size())) * direction;
    buffer_.clear();
    ++iteration_;

    rec.iteration = iteration_;
    rec.wallclock = clock_;
    rec.loss = objective_.loss(w_);
    rec.grad_norm = std::isfinite(rec.loss) ? objective_.gradient(w_).norm() : HUGE_VAL;
    trace_.records.push_back(std::move(rec));
    if (options_.record_params) trace_.param_history.push_back(w_);

    const double loss = trace_.records.back().loss;
    if (!std::isfinite(loss) || loss > options_.divergence_threshold) {
      trace_.diverged = true;
      trace_.divergence_iteration = iteration_;
    }
  }

  const VariantConfig& config_;
  const Objective& objective_;
  const RuntimeDistribution& dist_;
  const SimOptions& options_;

  SimTrace trace_;
  Vector w_;
  std::size_t iteration_ = 0;
  double clock_ = 0.0;
  std::vector<Learner> learners_;
  std::vector<bool> restart_;
  std::vector<Contribution> buffer_;
  std::priority_queue<Event, std::vector<Event>, EventAfter> queue_;
};

}  // namespace

SimTrace run(const VariantConfig& config, const Objective& objective, const RuntimeDistribution& dist,
             std::uint64_t master_seed, const SimOptions& options) {
  config.validate();
  return Simulation(config, objective, dist, master_seed, options).run();
}

RuntimeMeasurement measure_runtime_per_iteration(const SimTrace& trace, std::size_t burn_in) {
  const auto& r = trace.records;
  if (burn_in >= r.size()) throw std::invalid_argument("burn-in must be shorter than the trace");
  const std::size_t n = r.size() - burn_in;
  if (n < 100) throw InsufficientDataError("need at least 100 post-burn-in records, have " + std::to_string(n));
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t i = burn_in; i < r.size(); ++i) {
    const double prev = i == 0 ? 0.0 : r[i - 1].wallclock;
    const double d = r[i].wallclock - prev;
    const auto k = static_cast<double>(i - burn_in + 1);
    const double delta = d - mean;
    mean += delta / k;
    m2 += delta * (d - mean);
  }
  RuntimeMeasurement out;
  out.count = n;
  out.mean = mean;
  out.variance = m2 / static_cast<double>(n - 1);
  out.stderr_ = std::sqrt(out.variance / static_cast<double>(n));
  return out;
}

const std::vector<std::string>& trace_csv_header() {
  static const std::vector<std::string> header{"iteration", "wallclock",     "loss",          "eta",
                                               "grad_norm", "max_staleness", "mean_staleness"};
  return header;
}

CsvTable trace_to_csv(const SimTrace& trace) {
  CsvTable t;
  t.header = trace_csv_header();
  t.rows.reserve(trace.records.size());
  for (const auto& rec : trace.records) {
    t.rows.push_back({std::to_string(rec.iteration), format_double(rec.wallclock), format_double(rec.loss),
                      format_double(rec.eta), format_double(rec.grad_norm), std::to_string(rec.max_staleness()),
                      format_double(rec.mean_staleness())});
  }
  return t;
}

void write_trace_csv(const std::filesystem::path& path, const SimTrace& trace) { write_csv(path, trace_to_csv(trace)); }

}  // namespace stalesim
