#include "panelfm/icm_solver.hpp"

#include "panelfm/weighted_median.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

namespace panelfm {

namespace {

std::string describe_violation(const std::string& block, double before, double after) {
  std::ostringstream ss;
  ss.precision(17);
  ss << "log-posterior decreased in block " << block << ": " << before << " -> " << after;
  return ss.str();
}

// Runs fn(begin, end) over contiguous chunks of [0, count). The partition is
// a pure function of (count, threads) and chunks touch disjoint state, so
// results do not depend on scheduling.
template <typename Fn>
void parallel_chunks(std::size_t count, int threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), count);
  if (workers <= 1) {
    fn(std::size_t{0}, count);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t begin = std::min(count, w * chunk);
    const std::size_t end = std::min(count, begin + chunk);
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  fn(std::size_t{0}, std::min(count, chunk));
}

Side other(Side s) { return s == Side::Individual ? Side::Observation : Side::Individual; }

std::size_t counterpart_of(const Record& rec, Side side) {
  return side == Side::Individual ? rec.timepoint : rec.individual;
}

}  // namespace

AscentViolation::AscentViolation(std::string block, double before, double after)
    : std::runtime_error(describe_violation(block, before, after)),
      block_(std::move(block)),
      before_(before),
      after_(after) {}

std::size_t active_count(const ModelParams& params, Side side) {
  const auto& b = params.b(side);
  return static_cast<std::size_t>((b.array() > 0.0).count());
}

RowContext build_row_context(const ModelParams& params, const LongitudinalDataset& ds,
                             std::size_t entity, Side side) {
  const auto& index = side == Side::Individual ? ds.index_by_individual : ds.index_by_timepoint;
  if (entity >= index.size()) throw std::out_of_range("build_row_context: entity out of range");
  if (index[entity].empty()) throw std::invalid_argument("build_row_context: entity has no records");

  const auto& counterpart = params.theta(other(side));
  RowContext ctx;
  ctx.records = index[entity];
  const auto rows = static_cast<Eigen::Index>(ctx.records.size());
  const auto P = static_cast<Eigen::Index>(ds.p);
  ctx.g.resize(rows);
  ctx.h.resize(rows, P);
  std::vector<const double*> x(static_cast<std::size_t>(rows));
  std::vector<const double*> c(static_cast<std::size_t>(rows));
  for (Eigen::Index j = 0; j < rows; ++j) {
    const auto& rec = ds.records[ctx.records[static_cast<std::size_t>(j)]];
    const auto cp = static_cast<Eigen::Index>(counterpart_of(rec, side));
    x[static_cast<std::size_t>(j)] = rec.features.data();
    c[static_cast<std::size_t>(j)] = counterpart.row(cp).data();
    ctx.g[j] = rec.features.dot(counterpart.row(cp).transpose());
  }
  // Column by column so writes into the column-major h stay contiguous.
  for (Eigen::Index k = 0; k < P; ++k) {
    double* col = ctx.h.col(k).data();
    for (std::size_t j = 0; j < x.size(); ++j) col[j] = x[j][k] + c[j][k];
  }
  ctx.h_norm2 = ctx.h.colwise().squaredNorm().transpose();
  return ctx;
}

IcmSolver::IcmSolver(const LongitudinalDataset& ds, HyperPriors hp, SolverOptions options)
    : ds_(ds), hp_(hp), options_(std::move(options)) {
  hp_.check();
}

const std::vector<std::vector<std::size_t>>& IcmSolver::entities(Side side) const {
  return side == Side::Individual ? ds_.index_by_individual : ds_.index_by_timepoint;
}

void IcmSolver::recompute_residuals(FitState& state) const {
  state.residuals.resize(static_cast<Eigen::Index>(ds_.size()));
  for (std::size_t r = 0; r < ds_.size(); ++r) {
    state.residuals[static_cast<Eigen::Index>(r)] =
        ds_.records[r].outcome - predict_record(state.params, ds_.records[r]);
  }
}

FitState IcmSolver::make_state(ModelParams params) const {
  if (params.n() != ds_.n || params.m() != ds_.m || params.p() != ds_.p)
    throw std::invalid_argument("make_state: parameter dimensions do not match the dataset");
  FitState state;
  state.params = std::move(params);
  recompute_residuals(state);
  state.log_posterior_trace.push_back(log_posterior(state.params, hp_, ds_));
  return state;
}

FitState IcmSolver::initial_state() const {
  return make_state(ModelParams::initial(ds_.n, ds_.m, ds_.p, hp_));
}

double IcmSolver::update_alpha(FitState& state) const {
  double rss = 0.0;
  for (Eigen::Index r = 0; r < state.residuals.size(); ++r) rss += state.residuals[r] * state.residuals[r];
  const double shape = hp_.alpha0 + 0.5 * static_cast<double>(ds_.size()) - 1.0;
  if (shape <= 0.0 && options_.on_warning)
    options_.on_warning("alpha0 + |y|/2 - 1 <= 0; precision clamped to its floor");
  const double alpha = std::max(shape / (hp_.beta0 + 0.5 * rss), kAlphaFloor);
  if (!std::isfinite(alpha)) throw NumericalError("alpha");
  state.params.alpha = alpha;
  return alpha;
}

namespace {

// Soft-thresholded coordinate mode on a prepared context; `res` holds the
// entity's residuals in context order and is updated in place.
double coordinate_step(const RowContext& ctx, Eigen::Ref<Eigen::VectorXd> res, double& theta,
                       Eigen::Index k, double mu, double b, double alpha) {
  const double hh = ctx.h_norm2[k];
  const auto hk = ctx.h.col(k);
  double next = mu;
  if (b > 0.0 && hh > 0.0) {
    const double r = hk.dot(res) + hh * (theta - mu);
    const double excess = std::abs(r) - 1.0 / (alpha * b);
    if (excess > 0.0) next = mu + std::copysign(excess, r) / hh;
  }
  const double delta = theta - next;
  if (delta != 0.0) res += delta * hk;
  theta = next;
  return next;
}

}  // namespace

void IcmSolver::update_theta_row(FitState& state, std::size_t entity, Side side) const {
  auto& params = state.params;
  auto& theta = params.theta(side);
  const auto e = static_cast<Eigen::Index>(entity);
  if (entities(side).at(entity).empty()) {
    // No likelihood terms: the conditional mode is the prior location.
    theta.row(e) = params.mu(side).transpose();
    return;
  }
  const RowContext ctx = build_row_context(params, ds_, entity, side);
  Eigen::VectorXd res(static_cast<Eigen::Index>(ctx.records.size()));
  for (std::size_t j = 0; j < ctx.records.size(); ++j)
    res[static_cast<Eigen::Index>(j)] = state.residuals[static_cast<Eigen::Index>(ctx.records[j])];

  const auto& mu = params.mu(side);
  const auto& b = params.b(side);
  for (Eigen::Index k = 0; k < theta.cols(); ++k) {
    double t = theta(e, k);
    coordinate_step(ctx, res, t, k, mu[k], b[k], params.alpha);
    theta(e, k) = t;
  }
  for (std::size_t j = 0; j < ctx.records.size(); ++j)
    state.residuals[static_cast<Eigen::Index>(ctx.records[j])] = res[static_cast<Eigen::Index>(j)];
}

double IcmSolver::update_theta_coordinate(FitState& state, std::size_t entity, Side side,
                                          std::size_t k) const {
  auto& params = state.params;
  auto& theta = params.theta(side);
  const auto e = static_cast<Eigen::Index>(entity);
  const auto K = static_cast<Eigen::Index>(k);
  if (entities(side).at(entity).empty()) {
    theta(e, K) = params.mu(side)[K];
    return theta(e, K);
  }
  const RowContext ctx = build_row_context(params, ds_, entity, side);
  Eigen::VectorXd res(static_cast<Eigen::Index>(ctx.records.size()));
  for (std::size_t j = 0; j < ctx.records.size(); ++j)
    res[static_cast<Eigen::Index>(j)] = state.residuals[static_cast<Eigen::Index>(ctx.records[j])];
  double t = theta(e, K);
  coordinate_step(ctx, res, t, K, params.mu(side)[K], params.b(side)[K], params.alpha);
  theta(e, K) = t;
  for (std::size_t j = 0; j < ctx.records.size(); ++j)
    state.residuals[static_cast<Eigen::Index>(ctx.records[j])] = res[static_cast<Eigen::Index>(j)];
  return t;
}

double IcmSolver::update_mu(FitState& state, std::size_t k, Side side) const {
  auto& params = state.params;
  const auto K = static_cast<Eigen::Index>(k);
  const double b = params.b(side)[K];
  if (b <= 0.0) return params.mu(side)[K];  // column pinned to its location
  const auto& theta = params.theta(side);
  std::vector<double> column(static_cast<std::size_t>(theta.rows()));
  for (Eigen::Index e = 0; e < theta.rows(); ++e) column[static_cast<std::size_t>(e)] = theta(e, K);
  const double mu = location_mode(column, 1.0 / b, 1.0 / hp_.b_mu0);
  params.mu(side)[K] = mu;
  return mu;
}

double IcmSolver::update_b(FitState& state, std::size_t k, Side side) const {
  auto& params = state.params;
  const auto K = static_cast<Eigen::Index>(k);
  auto& theta = params.theta(side);
  const double mu = params.mu(side)[K];
  double abs_dev = 0.0;
  for (Eigen::Index e = 0; e < theta.rows(); ++e) abs_dev += std::abs(theta(e, K) - mu);

  // Stationary point of N log b + S / b + b / b_b0, i.e. the positive root
  // of b^2 + N b_b0 b - S b_b0, written without cancellation.
  const double N = static_cast<double>(theta.rows());
  double b = 0.0;
  if (abs_dev > 0.0) b = 2.0 * abs_dev / (std::sqrt(N * N + 4.0 * abs_dev / hp_.b_b0) + N);
  if (!std::isfinite(b)) throw NumericalError(std::string("b_") + to_string(side));

  if (b < hp_.b_floor) {
    b = 0.0;
    if (abs_dev > 0.0) {
      // Re-pin the column and patch the residuals of every affected record.
      const auto& counterpart = params.theta(other(side));
      const auto& index = entities(side);
      for (Eigen::Index e = 0; e < theta.rows(); ++e) {
        const double delta = theta(e, K) - mu;
        if (delta == 0.0) continue;
        theta(e, K) = mu;
        for (std::size_t r : index[static_cast<std::size_t>(e)]) {
          const auto& rec = ds_.records[r];
          const double h = rec.features[K] + counterpart(static_cast<Eigen::Index>(counterpart_of(rec, side)), K);
          state.residuals[static_cast<Eigen::Index>(r)] += h * delta;
        }
      }
    }
  }
  params.b(side)[K] = b;
  return b;
}

void IcmSolver::update_theta_block(FitState& state, Side side) const {
  const std::size_t count = entities(side).size();
  parallel_chunks(count, options_.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t e = begin; e < end; ++e) update_theta_row(state, e, side);
  });
  if (!state.params.theta(side).allFinite()) throw NumericalError(std::string("theta_") + to_string(side));
}

void IcmSolver::update_hyper_block(FitState& state, Side side) const {
  for (std::size_t k = 0; k < ds_.p; ++k) {
    update_mu(state, k, side);
    update_b(state, k, side);
  }
  if (!state.params.mu(side).allFinite()) throw NumericalError(std::string("mu_") + to_string(side));
}

void IcmSolver::checkpoint(FitState& state, const std::string& block, double& last) const {
  if (!options_.verify_blocks) return;
  recompute_residuals(state);
  const double now = log_posterior(state.params, hp_, ds_);
  if (std::isnan(now)) throw NumericalError(block);
  if (now < last - options_.ascent_slack * std::abs(last)) throw AscentViolation(block, last, now);
  last = now;
}

void IcmSolver::sweep(FitState& state) const {
  if (state.log_posterior_trace.empty())
    state.log_posterior_trace.push_back(log_posterior(state.params, hp_, ds_));
  const double before = state.log_posterior_trace.back();
  double last = before;

  update_alpha(state);
  checkpoint(state, "alpha", last);
  update_theta_block(state, Side::Individual);
  checkpoint(state, "theta_I", last);
  update_hyper_block(state, Side::Individual);
  checkpoint(state, "mu_I/b_I", last);
  update_theta_block(state, Side::Observation);
  checkpoint(state, "theta_O", last);
  update_hyper_block(state, Side::Observation);
  checkpoint(state, "mu_O/b_O", last);

  recompute_residuals(state);
  const double after = log_posterior(state.params, hp_, ds_);
  if (std::isnan(after)) throw NumericalError("sweep " + std::to_string(state.sweep_count + 1));
  ++state.sweep_count;
  state.log_posterior_trace.push_back(after);
  if (after < before - options_.ascent_slack * std::abs(before))
    throw AscentViolation("sweep " + std::to_string(state.sweep_count), before, after);
}

FitResult IcmSolver::fit(std::uint64_t seed) const {
  FitResult result;
  result.seed = seed;
  result.state = initial_state();
  auto& state = result.state;
  for (int t = 0; t < hp_.max_sweeps; ++t) {
    sweep(state);
    const auto& trace = state.log_posterior_trace;
    const double prev = trace[trace.size() - 2];
    const double now = trace.back();
    const double rel = std::abs(now - prev) / std::max(std::abs(prev), 1e-300);
    if (options_.on_sweep) {
      options_.on_sweep(SweepInfo{state.sweep_count, now, rel, active_count(state.params, Side::Individual),
                                  active_count(state.params, Side::Observation)});
    }
    if (rel < hp_.rel_tol) {
      result.converged = true;
      break;
    }
  }
  result.params = state.params;
  return result;
}

}  // namespace panelfm
