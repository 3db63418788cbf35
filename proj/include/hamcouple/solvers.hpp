#pragma once

// Newton shooting for T-periodic solutions and for the Neumann problem
// y(a) = y(b) = 0, v(a) = v(b) = 0, multistart drivers, and the partition of
// solutions into geometrically distinct classes (x modulo 2 pi).

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hamcouple/dynamics.hpp"
#include "hamcouple/systems.hpp"

namespace hamcouple {

struct ShootingOptions {
  double newton_tol = 1e-10;
  int max_iter = 50;
  double integration_tol = 1e-12;
  double fd_step = 1e-6;
  /// Levenberg-Marquardt with fixed damping replaces the Newton step when
  /// cond(J) exceeds cond_limit or the finite-difference noise floor
  /// fd_step / (100 eps), whichever is smaller.
  double cond_limit = 1e12;
  double lm_damping = 1e-6;
};

enum class ShootStatus { Converged, MaxIterations, Stalled, IntegrationFailed };

std::string to_string(ShootStatus s);

struct PeriodicSolutionRecord {
  State z0;
  double residual = 0.0;
  int iterations = 0;
  bool used_lm = false;
  std::optional<long> turns;  // clockwise turns of w over [0, T]
  State x_normalized;         // x(0) wrapped to [0, 2 pi)
  int class_id = -1;
};

struct PeriodicShootResult {
  ShootStatus status = ShootStatus::MaxIterations;
  PeriodicSolutionRecord record;  // last iterate when not converged
  std::string message;
  bool converged() const { return status == ShootStatus::Converged; }
};

/// Residual Phi_T(z0) - z0 with x components wrapped to (-pi, pi].
State periodic_residual(const VectorField& f, const CoupledSystem& sys, const State& z0, double integration_tol);

PeriodicShootResult shoot_periodic(const CoupledSystem& sys, const State& z_guess, const ShootingOptions& opts = {});

struct NeumannSolutionRecord {
  State x_a;
  double u_a = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool used_lm = false;
  State z0;  // (x_a, 0, u_a, 0)
  int class_id = -1;
};

struct NeumannShootResult {
  ShootStatus status = ShootStatus::MaxIterations;
  NeumannSolutionRecord record;
  std::string message;
  bool converged() const { return status == ShootStatus::Converged; }
};

/// Residual (y(b), v(b)) of the flow from (x_a, 0, u_a, 0) at t = a.
State neumann_residual(const VectorField& f, const CoupledSystem& sys, const State& x_a, double u_a,
                       double integration_tol);

NeumannShootResult shoot_neumann(const CoupledSystem& sys, const State& x_a, double u_a,
                                 const ShootingOptions& opts = {});

// Multistart ---------------------------------------------------------------

struct MultistartSpec {
  std::vector<int> x_counts;                        // per x_i, uniform on [0, 2 pi)
  std::vector<std::pair<double, double>> y_ranges;  // the rectangle D
  std::vector<int> y_counts;
  std::vector<double> radii;   // polar grid of w(0)
  int angles = 8;
  std::vector<double> u_values;  // Neumann mode: u(a) values
  double jitter = 0.0;           // relative uniform jitter, driven by seed
  std::uint64_t seed = 0;
  std::size_t max_starts = 2000;
  unsigned threads = 1;
  double dedup_tol = 0.0;  // 0 selects 1e-6 (1 + state scale)
};

struct MultistartStats {
  std::size_t starts = 0;
  std::size_t converged = 0;
  std::size_t failed = 0;
  std::size_t integration_failures = 0;
  std::size_t lm_used = 0;
};

struct DistinctnessPartition {
  std::vector<std::size_t> representatives;  // one record index per class
  std::vector<int> class_of;                 // record index -> class id
  std::size_t count() const { return representatives.size(); }
};

struct PeriodicMultistartResult {
  std::vector<PeriodicSolutionRecord> records;  // canonical order, class_id set
  DistinctnessPartition partition;
  MultistartStats stats;
};

struct NeumannMultistartResult {
  std::vector<NeumannSolutionRecord> records;
  DistinctnessPartition partition;
  MultistartStats stats;
};

std::vector<State> periodic_start_grid(const CoupledSystem& sys, const MultistartSpec& spec);
std::vector<std::pair<State, double>> neumann_start_grid(const CoupledSystem& sys, const MultistartSpec& spec);

PeriodicMultistartResult multistart_periodic(const CoupledSystem& sys, const MultistartSpec& spec,
                                             const ShootingOptions& opts = {});
NeumannMultistartResult multistart_neumann(const CoupledSystem& sys, const MultistartSpec& spec,
                                           const ShootingOptions& opts = {});

/// Union-find over: |y - y'| <= tol, |w - w'| <= tol and x = x' modulo 2 pi
/// within tol (max norms), comparing states at t = 0.
DistinctnessPartition classify_distinct(const std::vector<PeriodicSolutionRecord>& records, int M, double tol);
/// Neumann classes: x_a modulo 2 pi, u_a compared directly.
DistinctnessPartition classify_distinct(const std::vector<NeumannSolutionRecord>& records, double tol);

/// Sorts records canonically (normalized x, then y, then w) for determinism.
void canonical_sort(std::vector<PeriodicSolutionRecord>& records, int M);

/// Re-evaluates the residual at integration_tol / 10.
double revalidate(const CoupledSystem& sys, const PeriodicSolutionRecord& rec, double integration_tol);
double revalidate(const CoupledSystem& sys, const NeumannSolutionRecord& rec, double integration_tol);

/// Index-ordered parallel map over [0, n); exceptions from work items are
/// rethrown in index order after all workers finish.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& work);

}  // namespace hamcouple
