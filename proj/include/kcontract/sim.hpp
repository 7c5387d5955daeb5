#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "kcontract/lurie.hpp"
#include "kcontract/network.hpp"
#include "kcontract/rng.hpp"

namespace kcontract {

class IntegrationError : public std::runtime_error {
public:
  IntegrationError(const std::string& what, double t, Eigen::VectorXd last_state)
      : std::runtime_error(what), t_fail(t), last_state(std::move(last_state)) {}
  double t_fail;
  Eigen::VectorXd last_state;
};

struct SimConfig {
  double t_end = 10.0;
  double rtol = 1e-8;
  double atol = 1e-10;
  double max_step = 0.0;  // 0: no cap
  std::uint64_t seed = 0;
  std::optional<Box> ic_box;  // default [-3,3]^n
};

struct Trajectory {
  std::vector<double> times;              // strictly increasing, 0 .. t_end
  std::vector<Eigen::VectorXd> states;
  double terminal_velocity = 0.0;         // |xdot(t_end)|_2
};

/// Vector field with Jacobian access; the common face of Lurie and
/// networked systems for the integrator.
struct Dynamics {
  Eigen::Index n = 0;
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> rhs;
  std::function<Eigen::MatrixXd(double, const Eigen::VectorXd&)> jacobian;
};

Dynamics make_dynamics(const LurieSystem& sys);
Dynamics make_dynamics(const NetworkedSystem& sys);

/// Adaptive Dormand-Prince 5(4) integration from t = 0 to cfg.t_end,
/// recording every accepted step. Deterministic for a given config.
Trajectory integrate(const Dynamics& dyn, const Eigen::VectorXd& x0,
                     const SimConfig& cfg);

struct EquilibriaReport {
  std::vector<Eigen::VectorXd> points;  // |rhs(x*)| <= 1e-10, deduplicated at 1e-6
  std::vector<int> start_tally;         // Newton starts that landed on each point
  int failed_starts = 0;
};

/// Damped-Newton refinement from n_starts random starts in the IC box.
EquilibriaReport find_equilibria(const Dynamics& dyn, int n_starts,
                                 std::uint64_t seed,
                                 const std::optional<Box>& box = std::nullopt);

struct VolumeAudit {
  std::vector<double> times;
  std::vector<double> log_volumes;  // s(t) = log |Q^(k) X^(k)(t)|_2
  double observed_rate = 0.0;       // least-squares slope of s
  bool decay_bound_satisfied = false;  // s(t)-s(0) <= -rate*t + log_tol for all t
  double max_violation = 0.0;
  bool underflow_truncated = false;
};

/// Co-integrates the variational equation Xdot = J(t,x) X from k random
/// orthonormal columns and tracks the certified scaled parallelotope volume
/// in log space. Requires a certified certificate.
VolumeAudit volume_decay_audit(const Dynamics& dyn, const Certificate& cert,
                               const Eigen::VectorXd& x0, Eigen::Index k,
                               const SimConfig& cfg);

struct VariationalRun {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::MatrixXd> frames;  // X(t), n x k
};

/// Joint integration of the state and the variational frame; the raw
/// machinery behind volume_decay_audit, exposed for consistency checks.
VariationalRun integrate_variational(const Dynamics& dyn, const Eigen::VectorXd& x0,
                                     const Eigen::MatrixXd& X0, const SimConfig& cfg);

struct SweepReport {
  int n_trajectories = 0;
  int converged = 0;  // terminal state within 1e-4 of a found equilibrium
  std::vector<Eigen::VectorXd> equilibria;
  std::vector<int> arrivals;  // per-equilibrium terminal tally
  double max_terminal_velocity = 0.0;
  int unbounded = 0;  // trajectories that left |x|_inf <= 1e6
  bool informational = false;  // set when 2-contraction + boundedness not certified
};

/// Random-IC convergence study against the equilibria found by Newton.
SweepReport convergence_sweep(const Dynamics& dyn, int n_traj, const SimConfig& cfg,
                              bool certified_2contractive_bounded = false);

}  // namespace kcontract
