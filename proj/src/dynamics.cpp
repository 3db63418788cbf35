#include "hamcouple/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

#include "hamcouple/error.hpp"
#include "hamcouple/numfmt.hpp"

namespace hamcouple {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
// Continuous extension (Hairer, Norsett & Wanner).
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

struct Stages {
  explicit Stages(int n) : k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), y_new(n), err(n) {}
  State k1, k2, k3, k4, k5, k6, k7, tmp, y_new, err;
};

// One DP step from (t, y) with k1 = f(t, y) already in s.k1. Fills y_new,
// k7 = f(t + h, y_new) and the embedded error estimate.
void dp_step(const VectorField& f, double t, const State& y, double h, Stages& s, IntegratorStats& stats) {
  s.tmp = y + h * a21 * s.k1;
  f.rhs(t + c2 * h, s.tmp, s.k2);
  s.tmp = y + h * (a31 * s.k1 + a32 * s.k2);
  f.rhs(t + c3 * h, s.tmp, s.k3);
  s.tmp = y + h * (a41 * s.k1 + a42 * s.k2 + a43 * s.k3);
  f.rhs(t + c4 * h, s.tmp, s.k4);
  s.tmp = y + h * (a51 * s.k1 + a52 * s.k2 + a53 * s.k3 + a54 * s.k4);
  f.rhs(t + c5 * h, s.tmp, s.k5);
  s.tmp = y + h * (a61 * s.k1 + a62 * s.k2 + a63 * s.k3 + a64 * s.k4 + a65 * s.k5);
  f.rhs(t + h, s.tmp, s.k6);
  s.y_new = y + h * (a71 * s.k1 + a73 * s.k3 + a74 * s.k4 + a75 * s.k5 + a76 * s.k6);
  f.rhs(t + h, s.y_new, s.k7);
  s.err = h * (e1 * s.k1 + e3 * s.k3 + e4 * s.k4 + e5 * s.k5 + e6 * s.k6 + e7 * s.k7);
  stats.rhs_evals += 6;
}

// Max-norm of the error scaled by tol * (1 + |z|).
double error_norm(const Stages& s, const State& y, double tol) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double scale = tol * (1.0 + std::max(std::abs(y[i]), std::abs(s.y_new[i])));
    worst = std::max(worst, std::abs(s.err[i]) / scale);
  }
  return worst;
}

void check_state(const State& y, double t, double blowup_norm) {
  if (!y.allFinite()) {
    throw IntegrationFailure(IntegrationFailure::Kind::NonfiniteState,
                             "non-finite state at t = " + fmt17(t));
  }
  if (y.lpNorm<Eigen::Infinity>() > blowup_norm) {
    throw IntegrationFailure(IntegrationFailure::Kind::Blowup,
                             "state norm exceeded " + fmt17(blowup_norm) + " at t = " + fmt17(t));
  }
}

double initial_step(const VectorField& f, double t0, const State& y0, const State& f0, double tol,
                    double span, IntegratorStats& stats) {
  const double d0 = y0.norm() / std::sqrt(static_cast<double>(y0.size()));
  const double dd = f0.norm() / std::sqrt(static_cast<double>(y0.size()));
  double h0 = (d0 < 1e-5 || dd < 1e-5) ? 1e-6 : 0.01 * d0 / dd;
  h0 = std::min(h0, span);
  State y1 = y0 + h0 * f0;
  State f1(y0.size());
  f.rhs(t0 + h0, y1, f1);
  ++stats.rhs_evals;
  const double d2 = (f1 - f0).norm() / std::sqrt(static_cast<double>(y0.size())) / h0;
  const double dmax = std::max(dd, d2);
  const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 * tol / dmax, 1.0 / 5.0);
  return std::min({100.0 * h0, h1, span});
}

}  // namespace

class DenseRecorder {
 public:
  static void begin(Trajectory& tr, const State& z0, double t0, double t1, bool dense) {
    tr.t0_ = t0;
    tr.t1_ = t1;
    tr.dim_ = static_cast<int>(z0.size());
    tr.z0_ = z0;
    tr.mesh_.push_back(t0);
    tr.dense_ = dense;
  }
  static void step(Trajectory& tr, const State& y, double h, const Stages& s) {
    tr.mesh_.push_back(tr.mesh_.back() + h);
    if (!tr.dense_) return;
    const std::size_t n = y.size();
    const std::size_t base = tr.coeffs_.size();
    tr.coeffs_.resize(base + 5 * n);
    double* c = tr.coeffs_.data() + base;
    for (std::size_t i = 0; i < n; ++i) {
      const double ydiff = s.y_new[i] - y[i];
      const double bspl = h * s.k1[i] - ydiff;
      c[i] = y[i];
      c[n + i] = ydiff;
      c[2 * n + i] = bspl;
      c[3 * n + i] = ydiff - h * s.k7[i] - bspl;
      c[4 * n + i] = h * (d1 * s.k1[i] + d3 * s.k3[i] + d4 * s.k4[i] + d5 * s.k5[i] + d6 * s.k6[i] +
                          d7 * s.k7[i]);
    }
  }
  static void finish(Trajectory& tr, const State& z1, const IntegratorStats& stats, double t1) {
    tr.z1_ = z1;
    tr.stats_ = stats;
    tr.mesh_.back() = t1;
  }
};

State Trajectory::query(double t) const {
  if (t <= t0_) return z0_;
  if (t >= t1_) return z1_;
  if (coeffs_.empty()) throw Error("trajectory was integrated without dense output");
  auto it = std::upper_bound(mesh_.begin(), mesh_.end(), t);
  std::size_t k = static_cast<std::size_t>(it - mesh_.begin()) - 1;
  k = std::min(k, mesh_.size() - 2);
  const double h = mesh_[k + 1] - mesh_[k];
  const double theta = (t - mesh_[k]) / h;
  const double theta1 = 1.0 - theta;
  const std::size_t n = static_cast<std::size_t>(dim_);
  const double* c = coeffs_.data() + 5 * n * k;
  State out(dim_);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = c[i] + theta * (c[n + i] + theta1 * (c[2 * n + i] + theta * (c[3 * n + i] + theta1 * c[4 * n + i])));
  }
  return out;
}

Trajectory integrate(const VectorField& f, const State& z0, double t0, double t1, const IntegratorOptions& opts) {
  if (static_cast<int>(z0.size()) != f.dim) throw DimensionMismatch("initial state does not match field dimension");
  if (!(t1 > t0)) throw Error("integrate requires t0 < t1");
  if (!z0.allFinite()) {
    throw IntegrationFailure(IntegrationFailure::Kind::NonfiniteState, "non-finite initial state");
  }

  Trajectory tr;
  DenseRecorder::begin(tr, z0, t0, t1, opts.dense);
  IntegratorStats stats;
  const int n = f.dim;
  Stages s(n);
  State y = z0;
  double t = t0;
  f.rhs(t, y, s.k1);
  ++stats.rhs_evals;

  const double span = t1 - t0;
  double h = opts.initial_step > 0.0 ? opts.initial_step : initial_step(f, t0, y, s.k1, opts.tol, span, stats);
  h = std::min(h, opts.max_step);
  bool last_rejected = false;

  while (t < t1) {
    if (stats.accepted + stats.rejected >= opts.max_steps) {
      throw IntegrationFailure(IntegrationFailure::Kind::TooManySteps, "step budget exhausted at t = " + fmt17(t));
    }
    const double min_step = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
    if (h < min_step) {
      throw IntegrationFailure(IntegrationFailure::Kind::StepUnderflow, "step size underflow at t = " + fmt17(t));
    }
    bool final_step = false;
    if (t + h >= t1 || t1 - (t + h) < min_step) {
      h = t1 - t;
      final_step = true;
    }
    dp_step(f, t, y, h, s, stats);
    double err = error_norm(s, y, opts.tol);
    if (!std::isfinite(err)) err = 1e10;

    if (err <= 1.0) {
      ++stats.accepted;
      DenseRecorder::step(tr, y, h, s);
      t = final_step ? t1 : t + h;
      y = s.y_new;
      s.k1 = s.k7;
      check_state(y, t, opts.blowup_norm);
      double factor = err == 0.0 ? 5.0 : 0.9 * std::pow(err, -0.2);
      factor = std::clamp(factor, 0.2, last_rejected ? 1.0 : 5.0);
      h = std::min(h * factor, opts.max_step);
      last_rejected = false;
    } else {
      ++stats.rejected;
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      last_rejected = true;
    }
  }
  DenseRecorder::finish(tr, y, stats, t1);
  return tr;
}

Trajectory integrate(const VectorField& f, const State& z0, double t0, double t1, double tol) {
  IntegratorOptions opts;
  opts.tol = tol;
  return integrate(f, z0, t0, t1, opts);
}

State integrate_on_mesh(const VectorField& f, const State& z0, std::span<const double> mesh, double blowup_norm) {
  Stages s(f.dim);
  IntegratorStats stats;
  State y = z0;
  for (std::size_t k = 0; k + 1 < mesh.size(); ++k) {
    f.rhs(mesh[k], y, s.k1);
    dp_step(f, mesh[k], y, mesh[k + 1] - mesh[k], s, stats);
    y = s.y_new;
    check_state(y, mesh[k + 1], blowup_norm);
  }
  return y;
}

State flow_map(const VectorField& f, const State& z0, double T, double tol, double t0) {
  IntegratorOptions opts;
  opts.tol = tol;
  opts.dense = false;
  return integrate(f, z0, t0, t0 + T, opts).final_state();
}

FlowWithJacobian flow_and_jacobian(const VectorField& f, const State& z0, double t0, double t1, double tol,
                                   double fd_step, std::span<const int> columns) {
  IntegratorOptions opts;
  opts.tol = tol;
  opts.dense = false;
  Trajectory nominal = integrate(f, z0, t0, t1, opts);
  FlowWithJacobian out;
  out.endpoint = nominal.final_state();
  out.mesh = nominal.mesh();
  out.jacobian.resize(f.dim, static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const int j = columns[c];
    const double dz = fd_step * (1.0 + std::abs(z0[j]));
    State plus = z0;
    State minus = z0;
    plus[j] += dz;
    minus[j] -= dz;
    const State fp = integrate_on_mesh(f, plus, out.mesh);
    const State fm = integrate_on_mesh(f, minus, out.mesh);
    out.jacobian.col(static_cast<Eigen::Index>(c)) = (fp - fm) / (plus[j] - minus[j]);
  }
  return out;
}

Matrix flow_jacobian(const VectorField& f, const State& z0, double T, double tol, double fd_step) {
  std::vector<int> cols(static_cast<std::size_t>(f.dim));
  for (int j = 0; j < f.dim; ++j) cols[static_cast<std::size_t>(j)] = j;
  return flow_and_jacobian(f, z0, 0.0, T, tol, fd_step, cols).jacobian;
}

namespace {

struct PlanarSample {
  double t;
  double u;
  double v;
};

double wrap_pi(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  return a;
}

// Distance from the origin to the segment p-q.
double segment_distance(const PlanarSample& p, const PlanarSample& q) {
  const double du = q.u - p.u;
  const double dv = q.v - p.v;
  const double len2 = du * du + dv * dv;
  double s = len2 > 0.0 ? -(p.u * du + p.v * dv) / len2 : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  return std::hypot(p.u + s * du, p.v + s * dv);
}

}  // namespace

WindingReport winding(const Trajectory& traj, std::pair<int, int> components, double min_radius) {
  const auto [iu, iv] = components;
  if (iu < 0 || iv < 0 || iu >= traj.dim() || iv >= traj.dim()) {
    throw DimensionMismatch("winding component index out of range");
  }
  auto sample = [&](double t) {
    const State z = traj.query(t);
    return PlanarSample{t, z[iu], z[iv]};
  };
  constexpr int kMaxLevels = 30;
  constexpr int kSubsamples = 4;

  WindingReport rep;
  rep.min_radius = std::numeric_limits<double>::infinity();
  auto note_radius = [&](const PlanarSample& p) {
    const double r = std::hypot(p.u, p.v);
    rep.min_radius = std::min(rep.min_radius, r);
    if (r < min_radius) {
      throw OriginTooClose("planar component reaches |w| = " + fmt17(r) + " at t = " + fmt17(p.t));
    }
  };

  // Accumulate the angle increment over [p, q], bisecting until each
  // increment is below pi/2 and the chord stays outside the excluded disc.
  auto accumulate = [&](auto&& self, const PlanarSample& p, const PlanarSample& q, int level) -> double {
    const double d = wrap_pi(std::atan2(q.v, q.u) - std::atan2(p.v, p.u));
    const bool coarse = std::abs(d) >= 0.5 * std::numbers::pi;
    const bool near_origin = segment_distance(p, q) < min_radius;
    if (!coarse && !near_origin) return d;
    if (level >= kMaxLevels) {
      throw OriginTooClose("winding refinement did not resolve near t = " + fmt17(p.t));
    }
    const PlanarSample m = sample(0.5 * (p.t + q.t));
    note_radius(m);
    return self(self, p, m, level + 1) + self(self, m, q, level + 1);
  };

  const auto& mesh = traj.mesh();
  PlanarSample prev = sample(mesh.front());
  note_radius(prev);
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < mesh.size(); ++k) {
    const double a = mesh[k];
    const double b = mesh[k + 1];
    for (int j = 1; j <= kSubsamples; ++j) {
      const PlanarSample cur = sample(j == kSubsamples ? b : a + (b - a) * j / kSubsamples);
      note_radius(cur);
      total += accumulate(accumulate, prev, cur, 0);
      prev = cur;
    }
  }
  rep.delta_theta = total;
  rep.turns = std::lround(-total / (2.0 * std::numbers::pi));
  return rep;
}

void write_trajectory_csv(const Trajectory& traj, double stride, std::ostream& os) {
  os << "t";
  for (int i = 1; i <= traj.dim(); ++i) os << ",z_" << i;
  os << "\n";
  auto row = [&](double t) {
    const State z = traj.query(t);
    os << fmt17(t);
    for (int i = 0; i < traj.dim(); ++i) os << ',' << fmt17(z[i]);
    os << "\n";
  };
  if (!(stride > 0.0)) stride = traj.t1() - traj.t0();
  const auto count = static_cast<long>(std::floor((traj.t1() - traj.t0()) / stride));
  for (long k = 0; k <= count; ++k) {
    const double t = traj.t0() + stride * static_cast<double>(k);
    if (t < traj.t1()) row(t);
  }
  row(traj.t1());
}

}  // namespace hamcouple
