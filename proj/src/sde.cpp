#include "semilab/sde.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include "semilab/errors.hpp"
#include "semilab/parallel.hpp"
#include "semilab/random.hpp"

namespace semilab {

namespace {

constexpr double kBlowUpFactor = 1e6;

struct Step {
  double h = 0.0;
  long observe = -1;  // observation index reached after this step, or -1
};

struct StepOperator {
  Matrix flow_t;   // (e^{hA})^T, for row-major states
  Matrix noise_t;  // factor(Q_h)^T
};

// Steps from `from` to `to`: full dt steps then one partial step.
void append_steps(std::vector<Step>& schedule, double from, double to, double dt) {
  const double gap = to - from;
  if (gap <= 0.0) return;
  if (!std::isfinite(dt)) {
    schedule.push_back({gap, -1});
    return;
  }
  const double ratio = gap / dt;
  auto full = static_cast<long>(std::floor(ratio + 1e-9));
  double remainder = gap - static_cast<double>(full) * dt;
  if (remainder < 1e-9 * dt) remainder = 0.0;
  if (full == 0 && remainder == 0.0) remainder = gap;
  for (long k = 0; k < full; ++k) schedule.push_back({dt, -1});
  if (remainder > 0.0) schedule.push_back({remainder, -1});
}

std::vector<Step> schedule_for_times(const std::vector<double>& times, double dt, std::vector<long>& initial) {
  std::vector<Step> schedule;
  double current = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] <= current) {
      if (schedule.empty())
        initial.push_back(static_cast<long>(k));
      else if (schedule.back().observe < 0)
        schedule.back().observe = static_cast<long>(k);
      else
        schedule.push_back({0.0, static_cast<long>(k)});
      continue;
    }
    append_steps(schedule, current, times[k], dt);
    schedule.back().observe = static_cast<long>(k);
    current = times[k];
  }
  return schedule;
}

class StepCache {
 public:
  explicit StepCache(const GalerkinModel& model) : model_(model) {}

  const StepOperator& get(double h) {
    auto& slot = cache_[h];
    if (!slot) {
      slot = std::make_unique<StepOperator>();
      slot->flow_t = expm(model_.A(), h).transpose();
      slot->noise_t = covariance_Qt(model_.A(), model_.Q(), h).factor().transpose();
    }
    return *slot;
  }

 private:
  const GalerkinModel& model_;
  std::map<double, std::unique_ptr<StepOperator>> cache_;
};

void check_times(const std::vector<double>& times) {
  double previous = 0.0;
  for (double t : times) {
    if (!std::isfinite(t) || t < 0.0) throw InputError("simulation times must be finite and >= 0");
    if (t < previous) throw InputError("simulation times must be nondecreasing");
    previous = t;
  }
}

using Observer = std::function<void(std::size_t, std::size_t, const Matrix&, const Matrix*)>;

// Shared engine. Observation callbacks see (index, first row, states, tangents or null).
void run_paths(const GalerkinModel& model, const Matrix& starts, const Matrix* tangent_starts,
               const std::vector<Step>& schedule, const std::vector<long>& initial, std::uint64_t seed,
               std::uint64_t stream_offset, const Observer& observe) {
  const int d = model.dim();
  if (starts.cols() != d) throw ContractViolation("simulation: start dimension differs from the model");
  if (!starts.allFinite()) throw InputError("simulation: non-finite start point");

  StepCache cache(model);
  std::vector<const StepOperator*> ops;
  for (const auto& step : schedule) ops.push_back(step.h > 0.0 ? &cache.get(step.h) : nullptr);

  const Drift& drift = model.drift();
  const bool has_drift = !drift.is_zero();
  const auto n = static_cast<std::size_t>(starts.rows());

  parallel_chunks(n, [&](std::size_t, std::size_t begin, std::size_t end) {
    const auto m = static_cast<Eigen::Index>(end - begin);
    Matrix X = starts.middleRows(static_cast<Eigen::Index>(begin), m);
    Matrix eta;
    if (tangent_starts) eta = tangent_starts->middleRows(static_cast<Eigen::Index>(begin), m);
    const Vector limit = kBlowUpFactor * (1.0 + X.rowwise().norm().array()).matrix();

    std::vector<NormalStream> streams;
    streams.reserve(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i)
      streams.emplace_back(seed, stream_offset + begin + static_cast<std::size_t>(i));

    Matrix Z(m, d), F, work;
    double time = 0.0;
    for (long k : initial) observe(static_cast<std::size_t>(k), begin, X, tangent_starts ? &eta : nullptr);
    for (std::size_t s = 0; s < schedule.size(); ++s) {
      const Step& step = schedule[s];
      if (step.h > 0.0) {
        const StepOperator& op = *ops[s];
        for (Eigen::Index i = 0; i < m; ++i)
          for (int j = 0; j < d; ++j) Z(i, j) = streams[static_cast<std::size_t>(i)]();
        if (tangent_starts) {
          Matrix pushed(m, d);
          for (Eigen::Index i = 0; i < m; ++i)
            pushed.row(i) = drift.directional(X.row(i).transpose(), eta.row(i).transpose()).transpose();
          eta = (eta + step.h * pushed) * op.flow_t;
        }
        if (has_drift) {
          drift.apply_rows(X, F);
          work.noalias() = (X + step.h * F) * op.flow_t;
        } else {
          work.noalias() = X * op.flow_t;
        }
        work.noalias() += Z * op.noise_t;
        X.swap(work);
        time += step.h;
        for (Eigen::Index i = 0; i < m; ++i) {
          const double norm = X.row(i).norm();
          if (!(norm <= limit(i))) {
            std::ostringstream msg;
            msg << "simulation blow-up: sample " << begin + static_cast<std::size_t>(i) << " reached |X| = " << norm
                << " at t = " << time << " (limit " << limit(i) << ")";
            throw BlowUpError(msg.str());
          }
        }
      }
      if (step.observe >= 0) observe(static_cast<std::size_t>(step.observe), begin, X, tangent_starts ? &eta : nullptr);
    }
  });
}

Matrix repeat_row(const Vector& x, int n) { return x.transpose().replicate(n, 1); }

std::string format_double(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

double parse_double(const std::string& token) {
  double value = 0.0;
  const auto result = std::from_chars(token.data(), token.data() + token.size(), value);
  if (result.ec != std::errc() || result.ptr != token.data() + token.size())
    throw IoError("trajectory csv: malformed number '" + token + "'");
  return value;
}

void check_handle_point(const SemigroupHandle& handle, const Vector& x) {
  if (x.size() != handle.model().dim()) throw ContractViolation("semigroup: point dimension differs from the model");
  if (!x.allFinite()) throw InputError("semigroup: non-finite point");
}

}  // namespace

// ---------------------------------------------------------------------------------------------

SemigroupHandle::SemigroupHandle(GalerkinModel model, Method method, std::uint64_t seed)
    : model_(std::move(model)), method_(method), seed_(seed) {
  if (const auto* mc = std::get_if<MonteCarlo>(&method_)) {
    if (!(mc->dt > 0.0)) throw InputError("SemigroupHandle: dt must be > 0");
    if (mc->n_samples < 2) throw InputError("SemigroupHandle: n_samples must be >= 2");
  } else {
    if (!model_.is_ou()) throw InputError("SemigroupHandle: the exact OU handle requires F = 0");
    if (std::get<ExactOU>(method_).n_samples < 1) throw InputError("SemigroupHandle: n_samples must be >= 1");
  }
}

SemigroupHandle SemigroupHandle::exact_ou(GalerkinModel model, std::uint64_t seed) {
  return SemigroupHandle(std::move(model), ExactOU{}, seed);
}

SemigroupHandle SemigroupHandle::monte_carlo(GalerkinModel model, double dt, int n_samples, std::uint64_t seed) {
  return SemigroupHandle(std::move(model), MonteCarlo{dt, n_samples}, seed);
}

double SemigroupHandle::dt() const {
  if (const auto* mc = std::get_if<MonteCarlo>(&method_)) return mc->dt;
  return std::numeric_limits<double>::infinity();
}

int SemigroupHandle::n_samples() const {
  if (const auto* mc = std::get_if<MonteCarlo>(&method_)) return mc->n_samples;
  return std::get<ExactOU>(method_).n_samples;
}

SemigroupHandle SemigroupHandle::with_seed(std::uint64_t seed) const { return SemigroupHandle(model_, method_, seed); }

std::string SemigroupHandle::describe() const {
  std::ostringstream out;
  out << (is_exact() ? "exact-ou" : "mc-sde") << " d=" << model_.dim() << " drift=" << model_.drift().name();
  if (!is_exact()) out << " dt=" << format_double(dt()) << " n=" << n_samples();
  out << " seed=" << seed_;
  return out.str();
}

// ---------------------------------------------------------------------------------------------

void write_trajectory_csv(std::ostream& out, const TrajectoryRecord& record) {
  out << "sample,step,time";
  for (int j = 1; j <= record.dim; ++j) out << ",x_" << j;
  out << '\n';
  for (const auto& row : record.rows) {
    out << row.sample << ',' << row.step << ',' << format_double(row.time);
    for (Eigen::Index j = 0; j < row.x.size(); ++j) out << ',' << format_double(row.x(j));
    out << '\n';
  }
  if (!out) throw IoError("trajectory csv: write failed");
}

TrajectoryRecord read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("trajectory csv: missing header");
  TrajectoryRecord record;
  {
    std::istringstream header(line);
    std::string token;
    std::vector<std::string> names;
    while (std::getline(header, token, ',')) names.push_back(token);
    if (names.size() < 4 || names[0] != "sample" || names[1] != "step" || names[2] != "time")
      throw IoError("trajectory csv: unexpected header '" + line + "'");
    record.dim = static_cast<int>(names.size()) - 3;
    for (int j = 0; j < record.dim; ++j)
      if (names[static_cast<std::size_t>(j) + 3] != "x_" + std::to_string(j + 1))
        throw IoError("trajectory csv: unexpected column '" + names[static_cast<std::size_t>(j) + 3] + "'");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string token;
    std::vector<std::string> tokens;
    while (std::getline(fields, token, ',')) tokens.push_back(token);
    if (static_cast<int>(tokens.size()) != record.dim + 3) throw IoError("trajectory csv: wrong field count");
    TrajectoryRow row;
    row.sample = std::stoll(tokens[0]);
    row.step = std::stoll(tokens[1]);
    row.time = parse_double(tokens[2]);
    row.x.resize(record.dim);
    for (int j = 0; j < record.dim; ++j) row.x(j) = parse_double(tokens[static_cast<std::size_t>(j) + 3]);
    record.rows.push_back(std::move(row));
  }
  return record;
}

// ---------------------------------------------------------------------------------------------

Vector exponential_euler_step(const GalerkinModel& model, const Vector& x, double h, const Vector& increment) {
  const Vector shifted = model.drift().is_zero() ? x : Vector(x + h * model.drift()(x));
  return expm_apply(model.A(), h, shifted) + increment;
}

void simulate_paths(const GalerkinModel& model, const Matrix& starts, const std::vector<double>& times, double dt,
                    std::uint64_t seed, std::uint64_t stream_offset,
                    const std::function<void(std::size_t, std::size_t, const Matrix&)>& observe) {
  if (!(dt > 0.0)) throw InputError("simulate_paths: dt must be > 0");
  check_times(times);
  std::vector<long> initial;
  const std::vector<Step> schedule = schedule_for_times(times, dt, initial);
  run_paths(model, starts, nullptr, schedule, initial, seed, stream_offset,
            [&](std::size_t k, std::size_t begin, const Matrix& X, const Matrix*) { observe(k, begin, X); });
}

PathState simulate_mild(const GalerkinModel& model, const Vector& x, double T, double dt, int n, std::uint64_t seed,
                        bool record_trajectory) {
  if (!std::isfinite(T) || T < 0.0) throw InputError("simulate_mild: T must be finite and >= 0");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InputError("simulate_mild: dt must be finite and > 0");
  if (n < 1) throw InputError("simulate_mild: n must be >= 1");
  if (x.size() != model.dim()) throw ContractViolation("simulate_mild: dimension mismatch");
  if (!x.allFinite()) throw InputError("simulate_mild: non-finite start point");

  std::vector<Step> schedule;
  append_steps(schedule, 0.0, T, dt);
  std::vector<long> initial;
  std::vector<double> step_times{0.0};
  for (std::size_t s = 0; s < schedule.size(); ++s) {
    step_times.push_back(s + 1 == schedule.size() ? T : static_cast<double>(s + 1) * dt);
    if (record_trajectory) schedule[s].observe = static_cast<long>(s) + 1;
  }
  if (record_trajectory) initial.push_back(0);
  if (!schedule.empty()) schedule.back().observe = record_trajectory ? static_cast<long>(schedule.size()) : 0;

  const Matrix starts = repeat_row(x, n);
  PathState state;
  state.time = T;
  state.seed = seed;
  state.positions = starts;
  std::vector<Matrix> snapshots;
  if (record_trajectory) snapshots.assign(step_times.size(), Matrix(n, model.dim()));
  const long final_index = record_trajectory ? static_cast<long>(schedule.size()) : 0;

  run_paths(model, starts, nullptr, schedule, initial, seed, 0,
            [&](std::size_t k, std::size_t begin, const Matrix& X, const Matrix*) {
              if (record_trajectory) snapshots[k].middleRows(static_cast<Eigen::Index>(begin), X.rows()) = X;
              if (static_cast<long>(k) == final_index)
                state.positions.middleRows(static_cast<Eigen::Index>(begin), X.rows()) = X;
            });

  if (record_trajectory) {
    TrajectoryRecord record;
    record.dim = model.dim();
    for (int i = 0; i < n; ++i)
      for (std::size_t k = 0; k < snapshots.size(); ++k)
        record.rows.push_back({i, static_cast<std::int64_t>(k), step_times[k], snapshots[k].row(i).transpose()});
    state.trajectory = std::move(record);
  }
  return state;
}

Matrix sample_endpoints(const SemigroupHandle& handle, const Vector& x, double t) {
  check_handle_point(handle, x);
  const int n = handle.n_samples();
  Matrix out(n, handle.model().dim());
  simulate_paths(handle.model(), repeat_row(x, n), {t}, handle.dt(), handle.seed(), 0,
                 [&](std::size_t, std::size_t begin, const Matrix& X) {
                   out.middleRows(static_cast<Eigen::Index>(begin), X.rows()) = X;
                 });
  return out;
}

Estimate transition_apply(const SemigroupHandle& handle, const TestFunction& phi, double t, const Vector& x) {
  return transition_apply(handle, bind(phi, handle.model()), t, x);
}

Estimate transition_apply(const SemigroupHandle& handle, const BoundTestFunction& phi, double t, const Vector& x) {
  return transition_orbit(handle, phi, {t}, x).front();
}

std::vector<Estimate> transition_orbit(const SemigroupHandle& handle, const BoundTestFunction& phi,
                                       const std::vector<double>& times, const Vector& x) {
  check_handle_point(handle, x);
  check_times(times);
  std::vector<Estimate> out(times.size());
  if (phi.is_constant()) {
    for (auto& e : out) e = {phi.constant_term(), 0.0};
    return out;
  }
  if (handle.is_exact()) {
    for (std::size_t k = 0; k < times.size(); ++k)
      out[k] = {phi.ou_transform(handle.model(), times[k]).eval(x), 0.0};
    return out;
  }
  const auto n = static_cast<std::size_t>(handle.n_samples());
  std::vector<std::vector<Moments>> partial(times.size(), std::vector<Moments>(chunk_count(n)));
  simulate_paths(handle.model(), repeat_row(x, static_cast<int>(n)), times, handle.dt(), handle.seed(), 0,
                 [&](std::size_t k, std::size_t begin, const Matrix& X) {
                   Vector values;
                   phi.eval_varying(X, values);
                   Moments& m = partial[k][begin / kChunkSize];
                   for (Eigen::Index i = 0; i < values.size(); ++i) m.add(values(i));
                 });
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] == 0.0) {
      out[k] = {phi.eval(x), 0.0};
      continue;
    }
    Moments total;
    for (const auto& m : partial[k]) total.merge(m);
    out[k] = {phi.constant_term() + total.mean(), total.stderr()};
  }
  return out;
}

Matrix sample_orbit(const SemigroupHandle& handle, const BoundTestFunction& phi, const std::vector<double>& times,
                    const Vector& x) {
  check_handle_point(handle, x);
  check_times(times);
  if (handle.is_exact()) throw ContractViolation("sample_orbit: exact handles have no sample paths");
  const int n = handle.n_samples();
  Matrix out(n, static_cast<Eigen::Index>(times.size()));
  simulate_paths(handle.model(), repeat_row(x, n), times, handle.dt(), handle.seed(), 0,
                 [&](std::size_t k, std::size_t begin, const Matrix& X) {
                   Vector values;
                   phi.eval_varying(X, values);
                   out.col(static_cast<Eigen::Index>(k)).segment(static_cast<Eigen::Index>(begin), values.size()) =
                       values.array() + phi.constant_term();
                 });
  return out;
}

std::vector<ContinuityRow> stochastic_continuity_check(const SemigroupHandle& handle, const Vector& x, double t0,
                                                       const std::vector<double>& deltas) {
  check_handle_point(handle, x);
  if (!std::isfinite(t0) || t0 < 0.0) throw InputError("stochastic_continuity_check: t0 must be >= 0");
  std::vector<double> times{t0};
  for (double delta : deltas) {
    if (!std::isfinite(delta) || delta < 0.0) throw InputError("stochastic_continuity_check: deltas must be >= 0");
    times.push_back(t0 + delta);
  }
  std::vector<std::size_t> order(deltas.size());
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return deltas[a] < deltas[b]; });
  std::vector<double> sorted{t0};
  for (std::size_t j : order) sorted.push_back(t0 + deltas[j]);

  const int n = handle.n_samples();
  std::vector<Matrix> snapshots(sorted.size(), Matrix(n, handle.model().dim()));
  simulate_paths(handle.model(), repeat_row(x, n), sorted, handle.dt(), handle.seed(), 0,
                 [&](std::size_t k, std::size_t begin, const Matrix& X) {
                   snapshots[k].middleRows(static_cast<Eigen::Index>(begin), X.rows()) = X;
                 });
  std::vector<ContinuityRow> rows(deltas.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    const std::size_t j = order[r];
    Moments m;
    if (deltas[j] > 0.0) {
      const Vector sq = (snapshots[r + 1] - snapshots[0]).rowwise().squaredNorm();
      for (Eigen::Index i = 0; i < sq.size(); ++i) m.add(sq(i));
    }
    rows[j] = {t0 + deltas[j], m.count() ? m.mean() : 0.0, m.stderr()};
  }
  return rows;
}

FirstVariation first_variation(const GalerkinModel& model, const Vector& x, const Vector& h, double T, double dt,
                               int n, std::uint64_t seed) {
  if (!std::isfinite(T) || T < 0.0) throw InputError("first_variation: T must be finite and >= 0");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InputError("first_variation: dt must be finite and > 0");
  if (n < 1) throw InputError("first_variation: n must be >= 1");
  if (x.size() != model.dim() || h.size() != model.dim()) throw ContractViolation("first_variation: dimension mismatch");
  if (!h.allFinite()) throw InputError("first_variation: non-finite direction");

  std::vector<Step> schedule;
  append_steps(schedule, 0.0, T, dt);
  std::vector<long> initial;
  if (schedule.empty())
    initial.push_back(0);
  else
    schedule.back().observe = 0;

  const Matrix starts = repeat_row(x, n);
  const Matrix tangent_starts = repeat_row(h, n);
  FirstVariation out{starts, tangent_starts};
  run_paths(model, starts, &tangent_starts, schedule, initial, seed, 0,
            [&](std::size_t, std::size_t begin, const Matrix& X, const Matrix* eta) {
              out.positions.middleRows(static_cast<Eigen::Index>(begin), X.rows()) = X;
              out.tangents.middleRows(static_cast<Eigen::Index>(begin), X.rows()) = *eta;
            });
  if (!out.tangents.allFinite()) throw BlowUpError("first_variation: non-finite tangent");
  return out;
}

Estimate gradient_transition(const SemigroupHandle& handle, const TestFunction& f, double t, const Vector& x,
                             const Vector& h) {
  check_handle_point(handle, x);
  if (h.size() != x.size()) throw ContractViolation("gradient_transition: direction dimension mismatch");
  const BoundTestFunction bound = bind(f, handle.model());
  if (t == 0.0) return {bound.gradient(x).dot(h), 0.0};
  if (handle.is_exact()) return {bound.ou_transform(handle.model(), t).gradient(x).dot(h), 0.0};
  const FirstVariation fv =
      first_variation(handle.model(), x, h, t, handle.dt(), handle.n_samples(), handle.seed());
  Vector values;
  bound.directional_batch(fv.positions, fv.tangents, values);
  Moments m;
  for (Eigen::Index i = 0; i < values.size(); ++i) m.add(values(i));
  return m.estimate();
}

}  // namespace semilab
