#include "hamcouple/solvers.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <numeric>
#include <random>
#include <thread>

#include "hamcouple/error.hpp"
#include "hamcouple/numfmt.hpp"
#include "hamcouple/sampling.hpp"

namespace hamcouple {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_pm_pi(double a) {
  double r = std::remainder(a, kTwoPi);  // [-pi, pi]
  if (r <= -std::numbers::pi) r += kTwoPi;
  return r;
}

double wrap_0_2pi(double a) {
  double r = std::fmod(a, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

struct NewtonProblem {
  std::function<State(const State&)> residual;
  std::function<std::pair<State, Matrix>(const State&)> residual_and_jacobian;
};

struct NewtonOutcome {
  ShootStatus status = ShootStatus::MaxIterations;
  State x;
  double norm = 0.0;
  int iterations = 0;
  bool used_lm = false;
  std::string message;
};

// Damped Newton with Armijo backtracking on 1/2 |R|^2. Ill-conditioned
// Jacobians switch the step to Levenberg-Marquardt with fixed damping.
NewtonOutcome damped_newton(const NewtonProblem& prob, State x, const ShootingOptions& opts) {
  NewtonOutcome out;
  State R;
  try {
    R = prob.residual(x);
  } catch (const IntegrationFailure& e) {
    out.status = ShootStatus::IntegrationFailed;
    out.x = x;
    out.norm = std::numeric_limits<double>::infinity();
    out.message = e.what();
    return out;
  }
  for (int it = 0;; ++it) {
    out.x = x;
    out.norm = R.norm();
    out.iterations = it;
    if (out.norm <= opts.newton_tol) {
      out.status = ShootStatus::Converged;
      return out;
    }
    if (it >= opts.max_iter) {
      out.status = ShootStatus::MaxIterations;
      out.message = "no convergence after " + std::to_string(it) + " iterations, |R| = " + fmt17(out.norm);
      return out;
    }
    Matrix J;
    try {
      auto rj = prob.residual_and_jacobian(x);
      R = std::move(rj.first);
      J = std::move(rj.second);
    } catch (const IntegrationFailure& e) {
      out.status = ShootStatus::IntegrationFailed;
      out.message = e.what();
      return out;
    }
    const double f0 = 0.5 * R.squaredNorm();
    Eigen::JacobiSVD<Matrix> svd(J);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() ? sv[0] : 0.0;
    const double smin = sv.size() ? sv[sv.size() - 1] : 0.0;
    const double cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    const double noise_limit = opts.fd_step / (100.0 * std::numeric_limits<double>::epsilon());
    State delta;
    if (cond <= std::min(opts.cond_limit, noise_limit)) {
      delta = J.colPivHouseholderQr().solve(-R);
    } else {
      out.used_lm = true;
      const Matrix A = J.transpose() * J + opts.lm_damping * Matrix::Identity(J.cols(), J.cols());
      delta = A.ldlt().solve(-(J.transpose() * R));
    }
    if (!delta.allFinite()) {
      out.status = ShootStatus::Stalled;
      out.message = "non-finite Newton step";
      return out;
    }
    double step = 1.0;
    bool accepted = false;
    for (int k = 0; k < 30; ++k, step *= 0.5) {
      const State xn = x + step * delta;
      State Rn;
      try {
        Rn = prob.residual(xn);
      } catch (const IntegrationFailure&) {
        continue;
      }
      if (0.5 * Rn.squaredNorm() <= (1.0 - 2e-4 * step) * f0) {
        x = xn;
        R = std::move(Rn);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      out.status = ShootStatus::Stalled;
      out.iterations = it + 1;
      out.message = "line search failed at |R| = " + fmt17(out.norm) + " (cond " + fmt17(cond) + ")";
      return out;
    }
  }
}

State wrap_x_difference(const State& end, const State& start, int M) {
  State r = end - start;
  for (int i = 0; i < M; ++i) r[i] = wrap_pm_pi(r[i]);
  return r;
}

std::optional<long> w_turns(const VectorField& f, const CoupledSystem& sys, const State& z0, double tol) {
  try {
    const Trajectory tr = integrate(f, z0, 0.0, sys.T, tol);
    return winding(tr, {sys.u_index(), sys.v_index()}, 1e-8).turns;
  } catch (const OriginTooClose&) {
    return std::nullopt;
  }
}

void require_mode(const CoupledSystem& sys, SystemMode m) {
  if (sys.mode != m) {
    throw Error(m == SystemMode::Periodic ? "periodic shooting needs a periodic-mode system"
                                          : "Neumann shooting needs a Neumann-mode system");
  }
  if (m == SystemMode::Periodic && !(sys.T > 0.0)) throw Error("period T must be positive");
  if (m == SystemMode::Neumann && !(sys.b > sys.a)) throw Error("Neumann interval needs a < b");
}

}  // namespace

std::string to_string(ShootStatus s) {
  switch (s) {
    case ShootStatus::Converged:
      return "converged";
    case ShootStatus::MaxIterations:
      return "max_iterations";
    case ShootStatus::Stalled:
      return "stalled";
    case ShootStatus::IntegrationFailed:
      return "integration_failed";
  }
  return "unknown";
}

State periodic_residual(const VectorField& f, const CoupledSystem& sys, const State& z0, double integration_tol) {
  return wrap_x_difference(flow_map(f, z0, sys.T, integration_tol), z0, sys.M);
}

PeriodicShootResult shoot_periodic(const CoupledSystem& sys, const State& z_guess, const ShootingOptions& opts) {
  require_mode(sys, SystemMode::Periodic);
  if (z_guess.size() != sys.dim()) throw DimensionMismatch("initial guess has the wrong dimension");
  if (!z_guess.allFinite()) throw Error("initial guess is not finite");
  const VectorField f = assemble_field(sys);
  const int n = sys.dim();
  std::vector<int> cols(static_cast<std::size_t>(n));
  std::iota(cols.begin(), cols.end(), 0);

  NewtonProblem prob;
  prob.residual = [&](const State& z) { return periodic_residual(f, sys, z, opts.integration_tol); };
  prob.residual_and_jacobian = [&](const State& z) {
    const auto fj = flow_and_jacobian(f, z, 0.0, sys.T, opts.integration_tol, opts.fd_step, cols);
    return std::pair<State, Matrix>(wrap_x_difference(fj.endpoint, z, sys.M), fj.jacobian - Matrix::Identity(n, n));
  };
  const NewtonOutcome o = damped_newton(prob, z_guess, opts);

  PeriodicShootResult res;
  res.status = o.status;
  res.message = o.message;
  auto& rec = res.record;
  rec.z0 = o.x;
  rec.residual = o.norm;
  rec.iterations = o.iterations;
  rec.used_lm = o.used_lm;
  rec.x_normalized = o.x.head(sys.M);
  for (int i = 0; i < sys.M; ++i) rec.x_normalized[i] = wrap_0_2pi(rec.x_normalized[i]);
  if (res.converged()) rec.turns = w_turns(f, sys, rec.z0, opts.integration_tol);
  return res;
}

State neumann_residual(const VectorField& f, const CoupledSystem& sys, const State& x_a, double u_a,
                       double integration_tol) {
  const int M = sys.M;
  State z0 = State::Zero(sys.dim());
  z0.head(M) = x_a;
  z0[2 * M] = u_a;
  const Trajectory tr = integrate(f, z0, sys.a, sys.b, [&] {
    IntegratorOptions o;
    o.tol = integration_tol;
    o.dense = false;
    return o;
  }());
  State r(M + 1);
  r.head(M) = tr.final_state().segment(M, M);
  r[M] = tr.final_state()[2 * M + 1];
  return r;
}

NeumannShootResult shoot_neumann(const CoupledSystem& sys, const State& x_a, double u_a,
                                 const ShootingOptions& opts) {
  require_mode(sys, SystemMode::Neumann);
  const int M = sys.M;
  if (x_a.size() != M) throw DimensionMismatch("x_a has the wrong dimension");
  const VectorField f = assemble_field(sys);
  std::vector<int> cols;
  for (int i = 0; i < M; ++i) cols.push_back(i);
  cols.push_back(2 * M);
  auto unpack = [M, n = sys.dim()](const State& xi) {
    State z0 = State::Zero(n);
    z0.head(M) = xi.head(M);
    z0[2 * M] = xi[M];
    return z0;
  };

  NewtonProblem prob;
  prob.residual = [&](const State& xi) { return neumann_residual(f, sys, xi.head(M), xi[M], opts.integration_tol); };
  prob.residual_and_jacobian = [&](const State& xi) {
    const auto fj = flow_and_jacobian(f, unpack(xi), sys.a, sys.b, opts.integration_tol, opts.fd_step, cols);
    State r(M + 1);
    Matrix J(M + 1, M + 1);
    r.head(M) = fj.endpoint.segment(M, M);
    r[M] = fj.endpoint[2 * M + 1];
    J.topRows(M) = fj.jacobian.middleRows(M, M);
    J.row(M) = fj.jacobian.row(2 * M + 1);
    return std::pair<State, Matrix>(r, J);
  };
  State xi(M + 1);
  xi.head(M) = x_a;
  xi[M] = u_a;
  const NewtonOutcome o = damped_newton(prob, xi, opts);

  NeumannShootResult res;
  res.status = o.status;
  res.message = o.message;
  auto& rec = res.record;
  rec.x_a = o.x.head(M);
  rec.u_a = o.x[M];
  rec.residual = o.norm;
  rec.iterations = o.iterations;
  rec.used_lm = o.used_lm;
  rec.z0 = unpack(o.x);
  return res;
}

// --- multistart --------------------------------------------------------------

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& work) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        work(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned count = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (count == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < count; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace {

std::vector<std::vector<double>> x_axes(const CoupledSystem& sys, const MultistartSpec& spec) {
  if (static_cast<int>(spec.x_counts.size()) != sys.M) throw DimensionMismatch("x_counts must have M entries");
  std::vector<std::vector<double>> axes;
  for (int c : spec.x_counts) {
    if (c < 1) throw Error("x grid counts must be positive");
    std::vector<double> a;
    for (int k = 0; k < c; ++k) a.push_back(kTwoPi * k / c);
    axes.push_back(std::move(a));
  }
  return axes;
}

// Cartesian product, last axis fastest.
void for_each_product(const std::vector<std::vector<double>>& axes, const std::function<void(const std::vector<double>&)>& f) {
  std::vector<std::size_t> idx(axes.size(), 0);
  std::vector<double> point(axes.size());
  for (const auto& a : axes) {
    if (a.empty()) return;
  }
  while (true) {
    for (std::size_t i = 0; i < axes.size(); ++i) point[i] = axes[i][idx[i]];
    f(point);
    std::size_t k = axes.size();
    while (k > 0) {
      --k;
      if (++idx[k] < axes[k].size()) break;
      idx[k] = 0;
      if (k == 0) return;
    }
    if (axes.empty()) return;
  }
}

void apply_jitter(std::vector<State>& starts, double jitter, std::uint64_t seed) {
  if (jitter <= 0.0) return;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (auto& z : starts) {
    for (Eigen::Index j = 0; j < z.size(); ++j) z[j] += jitter * d(rng) * (1.0 + std::abs(z[j]));
  }
}

double default_tol(double scale) { return 1e-6 * (1.0 + scale); }

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t i) {
    while (parent_[i] != i) i = parent_[i] = parent_[parent_[i]];
    return i;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

DistinctnessPartition partition_by(std::size_t n, const std::function<bool(std::size_t, std::size_t)>& same) {
  UnionFind uf(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (uf.find(i) != uf.find(j) && same(i, j)) uf.unite(i, j);
    }
  }
  DistinctnessPartition p;
  p.class_of.assign(n, -1);
  std::vector<int> id_of_root(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = uf.find(i);
    if (id_of_root[r] < 0) {
      id_of_root[r] = static_cast<int>(p.representatives.size());
      p.representatives.push_back(i);
    }
    p.class_of[i] = id_of_root[r];
  }
  return p;
}

bool angles_match(const State& a, const State& b, double tol) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (std::abs(std::remainder(a[i] - b[i], kTwoPi)) > tol) return false;
  }
  return true;
}

}  // namespace

std::vector<State> periodic_start_grid(const CoupledSystem& sys, const MultistartSpec& spec) {
  const int M = sys.M;
  auto axes = x_axes(sys, spec);
  if (static_cast<int>(spec.y_ranges.size()) != M || static_cast<int>(spec.y_counts.size()) != M) {
    throw DimensionMismatch("y_ranges and y_counts must have M entries");
  }
  for (int i = 0; i < M; ++i) {
    const auto [lo, hi] = spec.y_ranges[static_cast<std::size_t>(i)];
    const int c = spec.y_counts[static_cast<std::size_t>(i)];
    if (c < 1) throw Error("y grid counts must be positive");
    axes.push_back(c == 1 ? std::vector<double>{0.5 * (lo + hi)} : linspace(lo, hi, static_cast<std::size_t>(c)));
  }
  std::vector<Vec2> ws;
  if (spec.radii.empty()) {
    ws.emplace_back(0.0, 0.0);
  } else {
    for (double r : spec.radii) {
      for (int k = 0; k < std::max(1, spec.angles); ++k) {
        const double th = kTwoPi * k / std::max(1, spec.angles);
        ws.emplace_back(r * std::cos(th), r * std::sin(th));
      }
    }
  }
  std::vector<State> starts;
  for_each_product(axes, [&](const std::vector<double>& p) {
    for (const Vec2& w : ws) {
      State z(sys.dim());
      for (int j = 0; j < 2 * M; ++j) z[j] = p[static_cast<std::size_t>(j)];
      z[2 * M] = w[0];
      z[2 * M + 1] = w[1];
      starts.push_back(std::move(z));
    }
  });
  if (starts.size() > spec.max_starts) {
    throw Error("multistart grid has " + std::to_string(starts.size()) + " points, budget is " +
                std::to_string(spec.max_starts));
  }
  apply_jitter(starts, spec.jitter, spec.seed);
  return starts;
}

std::vector<std::pair<State, double>> neumann_start_grid(const CoupledSystem& sys, const MultistartSpec& spec) {
  auto axes = x_axes(sys, spec);
  const std::vector<double> us = spec.u_values.empty() ? std::vector<double>{0.0} : spec.u_values;
  std::vector<State> flat;
  for_each_product(axes, [&](const std::vector<double>& p) {
    for (double u : us) {
      State s(sys.M + 1);
      for (int i = 0; i < sys.M; ++i) s[i] = p[static_cast<std::size_t>(i)];
      s[sys.M] = u;
      flat.push_back(std::move(s));
    }
  });
  if (flat.size() > spec.max_starts) {
    throw Error("multistart grid has " + std::to_string(flat.size()) + " points, budget is " +
                std::to_string(spec.max_starts));
  }
  apply_jitter(flat, spec.jitter, spec.seed);
  std::vector<std::pair<State, double>> out;
  for (auto& s : flat) out.emplace_back(s.head(sys.M), s[sys.M]);
  return out;
}

void canonical_sort(std::vector<PeriodicSolutionRecord>& records, int M) {
  auto key = [M](const PeriodicSolutionRecord& r) {
    std::vector<double> k(r.x_normalized.data(), r.x_normalized.data() + r.x_normalized.size());
    for (Eigen::Index j = M; j < r.z0.size(); ++j) k.push_back(r.z0[j]);
    return k;
  };
  std::stable_sort(records.begin(), records.end(),
                   [&](const PeriodicSolutionRecord& a, const PeriodicSolutionRecord& b) { return key(a) < key(b); });
}

DistinctnessPartition classify_distinct(const std::vector<PeriodicSolutionRecord>& records, int M, double tol) {
  return partition_by(records.size(), [&](std::size_t i, std::size_t j) {
    const State& a = records[i].z0;
    const State& b = records[j].z0;
    if ((a.tail(a.size() - M) - b.tail(b.size() - M)).lpNorm<Eigen::Infinity>() > tol) return false;
    return angles_match(a.head(M), b.head(M), tol);
  });
}

DistinctnessPartition classify_distinct(const std::vector<NeumannSolutionRecord>& records, double tol) {
  return partition_by(records.size(), [&](std::size_t i, std::size_t j) {
    if (std::abs(records[i].u_a - records[j].u_a) > tol) return false;
    return angles_match(records[i].x_a, records[j].x_a, tol);
  });
}

PeriodicMultistartResult multistart_periodic(const CoupledSystem& sys, const MultistartSpec& spec,
                                             const ShootingOptions& opts) {
  const auto starts = periodic_start_grid(sys, spec);
  std::vector<PeriodicShootResult> results(starts.size());
  parallel_for(starts.size(), spec.threads, [&](std::size_t i) { results[i] = shoot_periodic(sys, starts[i], opts); });

  PeriodicMultistartResult out;
  out.stats.starts = starts.size();
  double scale = 0.0;
  for (auto& r : results) {
    if (r.record.used_lm) ++out.stats.lm_used;
    if (r.status == ShootStatus::IntegrationFailed) ++out.stats.integration_failures;
    if (!r.converged()) {
      ++out.stats.failed;
      continue;
    }
    ++out.stats.converged;
    scale = std::max(scale, r.record.z0.tail(r.record.z0.size() - sys.M).lpNorm<Eigen::Infinity>());
    out.records.push_back(std::move(r.record));
  }
  canonical_sort(out.records, sys.M);
  const double tol = spec.dedup_tol > 0.0 ? spec.dedup_tol : default_tol(scale);
  out.partition = classify_distinct(out.records, sys.M, tol);
  for (std::size_t i = 0; i < out.records.size(); ++i) out.records[i].class_id = out.partition.class_of[i];
  return out;
}

NeumannMultistartResult multistart_neumann(const CoupledSystem& sys, const MultistartSpec& spec,
                                           const ShootingOptions& opts) {
  const auto starts = neumann_start_grid(sys, spec);
  std::vector<NeumannShootResult> results(starts.size());
  parallel_for(starts.size(), spec.threads,
               [&](std::size_t i) { results[i] = shoot_neumann(sys, starts[i].first, starts[i].second, opts); });

  NeumannMultistartResult out;
  out.stats.starts = starts.size();
  double scale = 0.0;
  for (auto& r : results) {
    if (r.record.used_lm) ++out.stats.lm_used;
    if (r.status == ShootStatus::IntegrationFailed) ++out.stats.integration_failures;
    if (!r.converged()) {
      ++out.stats.failed;
      continue;
    }
    ++out.stats.converged;
    scale = std::max(scale, std::abs(r.record.u_a));
    auto& x = r.record.x_a;
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = wrap_0_2pi(x[i]);
    r.record.z0.head(sys.M) = x;
    out.records.push_back(std::move(r.record));
  }
  std::stable_sort(out.records.begin(), out.records.end(), [](const NeumannSolutionRecord& a, const NeumannSolutionRecord& b) {
    std::vector<double> ka(a.x_a.data(), a.x_a.data() + a.x_a.size());
    std::vector<double> kb(b.x_a.data(), b.x_a.data() + b.x_a.size());
    ka.push_back(a.u_a);
    kb.push_back(b.u_a);
    return ka < kb;
  });
  const double tol = spec.dedup_tol > 0.0 ? spec.dedup_tol : default_tol(scale);
  out.partition = classify_distinct(out.records, tol);
  for (std::size_t i = 0; i < out.records.size(); ++i) out.records[i].class_id = out.partition.class_of[i];
  return out;
}

double revalidate(const CoupledSystem& sys, const PeriodicSolutionRecord& rec, double integration_tol) {
  return periodic_residual(assemble_field(sys), sys, rec.z0, 0.1 * integration_tol).norm();
}

double revalidate(const CoupledSystem& sys, const NeumannSolutionRecord& rec, double integration_tol) {
  return neumann_residual(assemble_field(sys), sys, rec.x_a, rec.u_a, 0.1 * integration_tol).norm();
}

}  // namespace hamcouple
