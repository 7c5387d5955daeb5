#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>

#include "kcontract/lurie.hpp"
#include "kcontract/rng.hpp"

namespace kcontract {

/// Activation f: R^q -> R^m of a networked system, with Jacobian access and
/// a uniform bound on ||J_f||_2 over the domain.
struct ActivationDescriptor {
  enum class Kind { TanhDiagonal, OpinionOddSaturating, PowerTrig, User };

  Kind kind = Kind::User;
  Eigen::Index in_dim = 0;   // q
  Eigen::Index out_dim = 0;  // m
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> eval;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jac;
  double jac_norm_bound = 0.0;
  Provenance bound_provenance = Provenance::Sampled;
  bool uniformly_bounded = false;
  double parameter = 0.0;  // PowerTrig phase angle

  static ActivationDescriptor tanh_diagonal(Eigen::Index n);
  static ActivationDescriptor opinion_odd_saturating(Eigen::Index n);

  /// f(z) = [sin(z1 + phi), sin(z1 - phi), z2]^T with the exact bound
  /// ||J_f||_2^2 <= 1 + |cos 2 phi|. Not uniformly bounded (z2 passes through).
  static ActivationDescriptor power_trig(double phi);

  static ActivationDescriptor user(
      Eigen::Index q, Eigen::Index m,
      std::function<Eigen::VectorXd(const Eigen::VectorXd&)> eval,
      std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jac,
      double sampled_bound, bool uniformly_bounded);
};

/// xdot = -D x + W1 f(W2 x) + v over an optional box domain Omega.
struct NetworkedSystem {
  Eigen::VectorXd d;   // diagonal of D
  Eigen::MatrixXd W1;  // n x m
  Eigen::MatrixXd W2;  // q x n
  Eigen::VectorXd v;   // n
  ActivationDescriptor f;
  std::optional<Box> omega;

  Eigen::Index n() const { return d.size(); }

  Eigen::VectorXd rhs(const Eigen::VectorXd& x) const {
    return -d.cwiseProduct(x) + W1 * f.eval(W2 * x) + v;
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd J = W1 * f.jac(W2 * x) * W2;
    J -= Eigen::MatrixXd(d.asDiagonal());
    return J;
  }

  void validate() const;
};

/// alpha_k = (1/k) * (sum of the k smallest diagonal damping entries).
double alpha_k(const Eigen::VectorXd& d, Eigen::Index k);

/// Theorem-2 style check: certified iff alpha_k > 0 and
/// bound^2 * sum_{i<=k} sigma_i^2(W1) sigma_i^2(W2) < alpha_k^2 k.
/// A certified result also carries a concrete scalar-P Theorem-1 witness
/// (gamma = (alpha_k + sqrt(LHS/k))/2, p = 1/gamma) so the certificate has
/// explicit (Q, eta1, eta2), and margin = alpha_k^2 k - LHS.
Certificate net_k_contraction_check(const NetworkedSystem& sys, Eigen::Index k);

struct HopfieldThresholds {
  double alpha_1star = 0.0;  // sigma_1(W): Theorem 2 flip point at k = 1
  double alpha_2star = 0.0;  // sqrt((sigma_1^2 + sigma_2^2)/2)
};

HopfieldThresholds hopfield_thresholds(const Eigen::MatrixXd& W);

/// Opinion-dynamics instance of the networked check: W1 = diag(u),
/// W2 = A_conn, v = b, odd saturating activation.
Certificate opinion_check(const Eigen::VectorXd& d, const Eigen::VectorXd& u_weights,
                          const Eigen::MatrixXd& A_conn, const Eigen::VectorXd& b,
                          Eigen::Index k);

struct Power2BusParams {
  double M1 = 0.1, M2 = 0.1;  // inertia constants
  double R1 = 10.0, R2 = 10.0;  // damping coefficients
  double a = 1.0;             // coupling amplitude
  double phi = 0.0;           // line phase in (-pi/2, pi/2)
  double p1 = 1.0, p2 = 1.0;  // constant power draws
};

struct Power2BusResult {
  bool corollary4_pass = false;
  double corollary4_lhs = 0.0;  // 3 a^2 (1 + |cos 2 phi|)
  double corollary4_rhs = 0.0;  // (min M / max M) * min R_i^2 / 2
  Certificate theorem2;         // generic check at k = 2
  NetworkedSystem system;
};

/// Two-generator swing model as a networked system, with both the
/// closed-form 2-contraction test and the generic Theorem-2 test.
Power2BusResult power_2bus_check(const Power2BusParams& p);

/// Lurie representation of a networked system for a spectral split gamma:
/// (A, B, C) = (-D, gamma I, I), Phi(y) = -gamma^-1 (W1 f(W2 y) + v).
LurieSystem as_lurie(const NetworkedSystem& sys, double gamma);

// Paper example presets.
NetworkedSystem hopfield_example(double alpha);          // 3-neuron cyclic W
NetworkedSystem opinion_example(double u);               // 3 agents, path graph
NetworkedSystem power_2bus_system(const Power2BusParams& p);

}  // namespace kcontract
