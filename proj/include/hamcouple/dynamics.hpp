#pragma once

// Adaptive Dormand-Prince 5(4) integration with dense output, time-T flow
// maps and their Jacobians, and winding numbers of planar components.

#include <Eigen/Core>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace hamcouple {

using State = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct VectorField {
  int dim = 0;
  /// Writes f(t, z) into dz (already sized to dim).
  std::function<void(double t, const State& z, State& dz)> rhs;
};

struct IntegratorOptions {
  double tol = 1e-10;
  double initial_step = 0.0;  // 0 selects automatically
  double max_step = std::numeric_limits<double>::infinity();
  std::size_t max_steps = 2'000'000;
  double blowup_norm = 1e8;
  bool dense = true;
};

struct IntegratorStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evals = 0;
};

/// Immutable solution with 4th-order continuous extension on [t0, t1].
class Trajectory {
 public:
  double t0() const { return t0_; }
  double t1() const { return t1_; }
  int dim() const { return dim_; }
  const State& initial_state() const { return z0_; }
  const State& final_state() const { return z1_; }
  const IntegratorStats& stats() const { return stats_; }
  /// Accepted step boundaries t0 = m0 < m1 < ... < mK = t1.
  const std::vector<double>& mesh() const { return mesh_; }
  bool has_dense_output() const { return dense_; }

  State query(double t) const;

 private:
  friend class DenseRecorder;
  double t0_ = 0.0;
  double t1_ = 0.0;
  int dim_ = 0;
  bool dense_ = true;
  State z0_;
  State z1_;
  IntegratorStats stats_;
  std::vector<double> mesh_;
  std::vector<double> coeffs_;  // 5 * dim per step
};

Trajectory integrate(const VectorField& f, const State& z0, double t0, double t1, const IntegratorOptions& opts);
Trajectory integrate(const VectorField& f, const State& z0, double t0, double t1, double tol);

/// Replays a step sequence with fixed steps (no error control). Used for
/// differentiating the discrete flow consistently with a nominal run.
State integrate_on_mesh(const VectorField& f, const State& z0, std::span<const double> mesh,
                        double blowup_norm = 1e8);

State flow_map(const VectorField& f, const State& z0, double T, double tol, double t0 = 0.0);

struct FlowWithJacobian {
  State endpoint;
  Matrix jacobian;  // n x columns.size()
  std::vector<double> mesh;
};

/// Endpoint of the adaptive run plus central finite-difference columns
/// d endpoint / d z0[j] for j in `columns`, each perturbed by
/// fd_step * (1 + |z0_j|) and integrated on the nominal mesh.
FlowWithJacobian flow_and_jacobian(const VectorField& f, const State& z0, double t0, double t1, double tol,
                                   double fd_step, std::span<const int> columns);

Matrix flow_jacobian(const VectorField& f, const State& z0, double T, double tol, double fd_step);

struct WindingReport {
  double delta_theta = 0.0;  // continuous angle change, counterclockwise positive
  long turns = 0;            // clockwise turns, rounded
  double min_radius = 0.0;   // smallest |w| seen along the path
};

/// Throws OriginTooClose if the planar component (components.first,
/// components.second) comes within min_radius of the origin.
WindingReport winding(const Trajectory& traj, std::pair<int, int> components, double min_radius);

/// CSV with header t,z_1,...,z_n sampled every `stride` (plus the endpoint).
void write_trajectory_csv(const Trajectory& traj, double stride, std::ostream& os);

}  // namespace hamcouple
