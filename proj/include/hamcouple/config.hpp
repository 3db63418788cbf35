#pragma once

// Experiment configuration: a JSON file describing the system (a preset or
// explicit expressions), the decomposition, solver settings and condition
// checks. load_config parses every expression and checks dimensions, and
// reports all violations at once.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hamcouple/conditions.hpp"
#include "hamcouple/error.hpp"
#include "hamcouple/solvers.hpp"
#include "hamcouple/systems.hpp"

namespace hamcouple {

/// Unreadable file or malformed JSON; the message carries the location.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public ConfigError {
 public:
  explicit ValidationError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  std::vector<std::string> violations_;
};

struct NamedHamiltonian {
  std::string name;
  PlanarHamiltonian H;
  std::optional<double> closed_form;  // asym_period when the family is known
};

struct ClassifyOverride {
  std::optional<double> tau1, tau2, T;
  double tol = 1e-12;
};

struct EnsembleConfig {
  std::vector<Vec2> constants = {Vec2(0.0, 0.0)};
  std::size_t fourier_count = 0;
  double fourier_amplitude = 1.0;
  int fourier_modes = 3;
  bool include_solutions = false;
};

struct RectangleCheck {
  Rectangle D;
  std::vector<int> sigma;
  TwistOptions opts;
};

struct BodyCheck {
  State center;
  State semi_axes;
  int sigma = 1;
  Matrix A;  // indefinite twist only
  BoundaryOptions opts;
};

struct ConditionsConfig {
  std::size_t decomposition_samples = 1000;
  double decomposition_tol = 1e-8;
  double periodicity_tol = 1e-10;
  std::size_t mbar_samples = 10000;
  SampleBox mbar_box;
  std::optional<double> mbar_override;
  LLOptions ll;
  std::vector<LLSide> ll_sides;  // empty: chosen from the resonance class
  double orbit_tol = 1e-9;  // reference orbit energy drift and closure
  EnsembleConfig ensemble;
  std::optional<RectangleCheck> twist;
  std::optional<BodyCheck> avoiding_rays;
  std::optional<BodyCheck> indefinite_twist;
};

struct OutputConfig {
  double trajectory_stride = 0.01;
};

struct ExperimentConfig {
  nlohmann::json raw;  // as loaded, after command-line overrides
  std::string source;  // path
  SystemMode mode = SystemMode::Periodic;
  int M = 1;
  std::uint64_t seed = 0;
  expr::Binding parameters;  // includes pi
  CoupledSystem system;
  /// The decomposition's H1 and H2 with their closed-form periods if known.
  std::optional<NamedHamiltonian> H1, H2;
  std::vector<NamedHamiltonian> hamiltonians;  // extra entries of the period table
  ClassifyOverride classify;
  ShootingOptions shooting;
  MultistartSpec multistart;
  ConditionsConfig conditions;
  OutputConfig output;
};

/// Throws ConfigError or ValidationError.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const nlohmann::json& j, const std::string& source = "<memory>");

/// FNV-1a 64 of the canonical (sorted-key) dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& j);

}  // namespace hamcouple
