#include "kcontract/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kcontract/compound.hpp"

namespace kcontract {

Dynamics make_dynamics(const LurieSystem& sys) {
  sys.validate();
  Dynamics d;
  d.n = sys.n();
  d.rhs = [sys](double t, const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return sys.A * x - sys.B * sys.phi.eval(t, sys.C * x);
  };
  d.jacobian = [sys](double t, const Eigen::VectorXd& x) -> Eigen::MatrixXd {
    return closed_loop_jacobian(sys, t, x);
  };
  return d;
}

Dynamics make_dynamics(const NetworkedSystem& sys) {
  sys.validate();
  Dynamics d;
  d.n = sys.n();
  d.rhs = [sys](double, const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return sys.rhs(x);
  };
  d.jacobian = [sys](double, const Eigen::VectorXd& x) -> Eigen::MatrixXd {
    return sys.jacobian(x);
  };
  return d;
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// 4th-order embedded weights.
constexpr double e1 = 5179.0 / 57600, e3 = 7571.0 / 16695, e4 = 393.0 / 640,
                 e5 = -92097.0 / 339200, e6 = 187.0 / 2100, e7 = 1.0 / 40;

using Field = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;

// One shared adaptive driver; the observer sees every accepted (t, y).
void dopri5(const Field& f, Eigen::VectorXd y, double t_end, double rtol,
            double atol, double max_step,
            const std::function<void(double, const Eigen::VectorXd&)>& observe) {
  if (!(t_end > 0)) throw std::invalid_argument("integrate: t_end must be positive");
  if (!y.allFinite())
    throw IntegrationError("integrate: non-finite initial state", 0.0, y);
  double t = 0.0;
  observe(t, y);

  Eigen::VectorXd k1 = f(t, y);
  if (!k1.allFinite()) throw IntegrationError("integrate: non-finite derivative", t, y);

  // Initial step from the derivative scale.
  double h = 0.01 * std::max(1e-6, y.norm()) / std::max(1e-6, k1.norm());
  h = std::min(h, t_end);
  if (max_step > 0) h = std::min(h, max_step);

  const int max_steps = 10'000'000;
  for (int step = 0; step < max_steps && t < t_end; ++step) {
    h = std::min(h, t_end - t);
    if (h < 1e-14 * std::max(1.0, std::abs(t)))
      throw IntegrationError("integrate: step size collapsed at t=" + std::to_string(t),
                             t, y);

    const Eigen::VectorXd k2 = f(t + c2 * h, y + h * (a21 * k1));
    const Eigen::VectorXd k3 = f(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
    const Eigen::VectorXd k4 = f(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Eigen::VectorXd k5 =
        f(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Eigen::VectorXd k6 =
        f(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Eigen::VectorXd y5 =
        y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Eigen::VectorXd k7 = f(t + h, y5);  // FSAL
    const Eigen::VectorXd y4 =
        y + h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    if (!y5.allFinite() || !k7.allFinite())
      throw IntegrationError("integrate: non-finite derivative at t=" + std::to_string(t),
                             t, y);

    double err = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double sc = atol + rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
      const double e = (y5[i] - y4[i]) / sc;
      err += e * e;
    }
    err = std::sqrt(err / static_cast<double>(y.size()));

    if (err <= 1.0) {
      t += h;
      y = y5;
      k1 = k7;
      observe(t, y);
    }
    double factor = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
    factor = std::clamp(factor, 0.2, 5.0);
    h *= factor;
    if (max_step > 0) h = std::min(h, max_step);
  }
  if (t < t_end)
    throw IntegrationError("integrate: step budget exhausted at t=" + std::to_string(t),
                           t, y);
}

Box default_box(Eigen::Index n, const std::optional<Box>& box) {
  if (box) {
    if (box->dim() != n) throw std::invalid_argument("IC box dimension mismatch");
    return *box;
  }
  return Box::centered(n, 3.0);
}

}  // namespace

Trajectory integrate(const Dynamics& dyn, const Eigen::VectorXd& x0,
                     const SimConfig& cfg) {
  if (x0.size() != dyn.n) throw std::invalid_argument("integrate: x0 dimension mismatch");
  if (!(cfg.rtol > 0) || !(cfg.atol > 0))
    throw std::invalid_argument("integrate: tolerances must be positive");
  Trajectory traj;
  dopri5(dyn.rhs, x0, cfg.t_end, cfg.rtol, cfg.atol, cfg.max_step,
         [&](double t, const Eigen::VectorXd& y) {
           traj.times.push_back(t);
           traj.states.push_back(y);
         });
  traj.terminal_velocity = dyn.rhs(traj.times.back(), traj.states.back()).norm();
  return traj;
}

EquilibriaReport find_equilibria(const Dynamics& dyn, int n_starts, std::uint64_t seed,
                                 const std::optional<Box>& box) {
  if (n_starts < 1) throw std::invalid_argument("find_equilibria: n_starts must be >= 1");
  const Box ic = default_box(dyn.n, box);
  Rng rng(seed);
  EquilibriaReport report;

  for (int s = 0; s < n_starts; ++s) {
    Eigen::VectorXd x = rng.uniform_in(ic);
    bool ok = false;
    double fnorm = dyn.rhs(0.0, x).norm();
    for (int it = 0; it < 100; ++it) {
      const Eigen::VectorXd fx = dyn.rhs(0.0, x);
      fnorm = fx.norm();
      if (fnorm <= 1e-12) {
        ok = true;
        break;
      }
      const Eigen::MatrixXd J = dyn.jacobian(0.0, x);
      const Eigen::VectorXd step = J.partialPivLu().solve(-fx);
      if (!step.allFinite()) break;
      // Backtracking damping on |f|.
      double lambda = 1.0;
      bool improved = false;
      for (int half = 0; half < 40; ++half) {
        const Eigen::VectorXd xn = x + lambda * step;
        const double fn = dyn.rhs(0.0, xn).norm();
        if (fn < fnorm) {
          x = xn;
          fnorm = fn;
          improved = true;
          break;
        }
        lambda *= 0.5;
      }
      if (!improved) break;
      if (fnorm <= 1e-12) {
        ok = true;
        break;
      }
    }
    if (!ok && fnorm <= 1e-10) ok = true;
    if (!ok) {
      ++report.failed_starts;
      continue;
    }
    bool merged = false;
    for (std::size_t i = 0; i < report.points.size(); ++i) {
      if ((report.points[i] - x).norm() < 1e-6) {
        ++report.start_tally[i];
        merged = true;
        break;
      }
    }
    if (!merged) {
      report.points.push_back(x);
      report.start_tally.push_back(1);
    }
  }
  return report;
}

VariationalRun integrate_variational(const Dynamics& dyn, const Eigen::VectorXd& x0,
                                     const Eigen::MatrixXd& X0, const SimConfig& cfg) {
  const Eigen::Index n = dyn.n;
  const Eigen::Index k = X0.cols();
  if (x0.size() != n || X0.rows() != n)
    throw std::invalid_argument("integrate_variational: dimension mismatch");

  // Joint state [x; vec(X)].
  Eigen::VectorXd y0(n + n * k);
  y0.head(n) = x0;
  for (Eigen::Index j = 0; j < k; ++j) y0.segment(n * (1 + j), n) = X0.col(j);

  Field joint = [&dyn, n, k](double t, const Eigen::VectorXd& y) -> Eigen::VectorXd {
    const Eigen::VectorXd x = y.head(n);
    const Eigen::MatrixXd J = dyn.jacobian(t, x);
    Eigen::VectorXd dy(y.size());
    dy.head(n) = dyn.rhs(t, x);
    for (Eigen::Index j = 0; j < k; ++j)
      dy.segment(n * (1 + j), n) = J * y.segment(n * (1 + j), n);
    return dy;
  };

  VariationalRun run;
  dopri5(joint, y0, cfg.t_end, cfg.rtol, cfg.atol, cfg.max_step,
         [&](double t, const Eigen::VectorXd& y) {
           run.times.push_back(t);
           run.states.push_back(y.head(n));
           Eigen::MatrixXd X(n, k);
           for (Eigen::Index j = 0; j < k; ++j) X.col(j) = y.segment(n * (1 + j), n);
           run.frames.push_back(std::move(X));
         });
  return run;
}

VolumeAudit volume_decay_audit(const Dynamics& dyn, const Certificate& cert,
                               const Eigen::VectorXd& x0, Eigen::Index k,
                               const SimConfig& cfg) {
  if (cert.status != CertStatus::Certified)
    throw std::invalid_argument("volume_decay_audit: certificate is not certified");
  if (cert.k != k)
    throw std::invalid_argument("volume_decay_audit: certificate order != k");
  Rng rng(cfg.seed);
  const Eigen::MatrixXd X0 = rng.orthonormal_columns(dyn.n, k);
  const Eigen::MatrixXd Qk =
      cert.Qk.size() ? cert.Qk : mult_compound(cert.Q, k);

  const VariationalRun run = integrate_variational(dyn, x0, X0, cfg);

  VolumeAudit audit;
  for (std::size_t i = 0; i < run.times.size(); ++i) {
    const double vol = (Qk * mult_compound(run.frames[i], k)).norm();
    if (vol < 1e-300) {
      audit.underflow_truncated = true;
      break;
    }
    audit.times.push_back(run.times[i]);
    audit.log_volumes.push_back(std::log(vol));
  }

  // Least-squares slope of s(t).
  const auto m = audit.times.size();
  if (m >= 2) {
    double tbar = 0, sbar = 0;
    for (std::size_t i = 0; i < m; ++i) {
      tbar += audit.times[i];
      sbar += audit.log_volumes[i];
    }
    tbar /= static_cast<double>(m);
    sbar /= static_cast<double>(m);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < m; ++i) {
      num += (audit.times[i] - tbar) * (audit.log_volumes[i] - sbar);
      den += (audit.times[i] - tbar) * (audit.times[i] - tbar);
    }
    audit.observed_rate = num / den;
  }

  const double log_tol = 1e-6;
  audit.max_violation = -std::numeric_limits<double>::infinity();
  const double s0 = audit.log_volumes.empty() ? 0.0 : audit.log_volumes.front();
  for (std::size_t i = 0; i < m; ++i) {
    const double excess =
        (audit.log_volumes[i] - s0) - (-cert.rate * audit.times[i]);
    audit.max_violation = std::max(audit.max_violation, excess);
  }
  audit.decay_bound_satisfied = audit.max_violation <= log_tol;
  return audit;
}

SweepReport convergence_sweep(const Dynamics& dyn, int n_traj, const SimConfig& cfg,
                              bool certified_2contractive_bounded) {
  SweepReport report;
  report.informational = !certified_2contractive_bounded;
  report.n_trajectories = n_traj;

  const EquilibriaReport eq = find_equilibria(dyn, std::max(32, 4 * n_traj),
                                              cfg.seed + 1, cfg.ic_box);
  report.equilibria = eq.points;
  report.arrivals.assign(eq.points.size(), 0);

  const Box ic = default_box(dyn.n, cfg.ic_box);
  Rng rng(cfg.seed);
  for (int i = 0; i < n_traj; ++i) {
    const Eigen::VectorXd x0 = rng.uniform_in(ic);
    bool unbounded = false;
    Eigen::VectorXd terminal = x0;
    double terminal_speed = 0.0;
    try {
      dopri5(dyn.rhs, x0, cfg.t_end, cfg.rtol, cfg.atol, cfg.max_step,
             [&](double t, const Eigen::VectorXd& y) {
               if (y.lpNorm<Eigen::Infinity>() > 1e6) {
                 unbounded = true;
                 throw IntegrationError("unbounded trajectory", t, y);
               }
               terminal = y;
             });
      terminal_speed = dyn.rhs(cfg.t_end, terminal).norm();
    } catch (const IntegrationError&) {
      if (!unbounded) throw;  // genuine integration failure propagates
    }
    if (unbounded) {
      ++report.unbounded;
      continue;
    }
    report.max_terminal_velocity = std::max(report.max_terminal_velocity, terminal_speed);
    for (std::size_t j = 0; j < report.equilibria.size(); ++j) {
      if ((terminal - report.equilibria[j]).norm() <= 1e-4) {
        ++report.arrivals[j];
        ++report.converged;
        break;
      }
    }
  }
  return report;
}

}  // namespace kcontract
