#include "kcontract/network.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "kcontract/compound.hpp"
#include "kcontract/measures.hpp"

namespace kcontract {

ActivationDescriptor ActivationDescriptor::tanh_diagonal(Eigen::Index n) {
  ActivationDescriptor a;
  a.kind = Kind::TanhDiagonal;
  a.in_dim = n;
  a.out_dim = n;
  a.eval = [](const Eigen::VectorXd& z) -> Eigen::VectorXd { return z.array().tanh(); };
  a.jac = [](const Eigen::VectorXd& z) -> Eigen::MatrixXd {
    return (1.0 - z.array().tanh().square()).matrix().asDiagonal();
  };
  a.jac_norm_bound = 1.0;
  a.bound_provenance = Provenance::Analytic;
  a.uniformly_bounded = true;
  return a;
}

ActivationDescriptor ActivationDescriptor::opinion_odd_saturating(Eigen::Index n) {
  ActivationDescriptor a = tanh_diagonal(n);
  a.kind = Kind::OpinionOddSaturating;
  return a;
}

ActivationDescriptor ActivationDescriptor::power_trig(double phi) {
  ActivationDescriptor a;
  a.kind = Kind::PowerTrig;
  a.in_dim = 2;
  a.out_dim = 3;
  a.parameter = phi;
  a.eval = [phi](const Eigen::VectorXd& z) -> Eigen::VectorXd {
    Eigen::VectorXd out(3);
    out << std::sin(z[0] + phi), std::sin(z[0] - phi), z[1];
    return out;
  };
  a.jac = [phi](const Eigen::VectorXd& z) -> Eigen::MatrixXd {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(3, 2);
    J(0, 0) = std::cos(z[0] + phi);
    J(1, 0) = std::cos(z[0] - phi);
    J(2, 1) = 1.0;
    return J;
  };
  a.jac_norm_bound = std::sqrt(1.0 + std::abs(std::cos(2.0 * phi)));
  a.bound_provenance = Provenance::Analytic;
  a.uniformly_bounded = false;  // z2 passes through unsaturated
  return a;
}

ActivationDescriptor ActivationDescriptor::user(
    Eigen::Index q, Eigen::Index m,
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> eval,
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jac,
    double sampled_bound, bool uniformly_bounded) {
  ActivationDescriptor a;
  a.kind = Kind::User;
  a.in_dim = q;
  a.out_dim = m;
  a.eval = std::move(eval);
  a.jac = std::move(jac);
  a.jac_norm_bound = sampled_bound;
  a.bound_provenance = Provenance::Sampled;
  a.uniformly_bounded = uniformly_bounded;
  return a;
}

void NetworkedSystem::validate() const {
  if (W1.rows() != n()) throw std::invalid_argument("NetworkedSystem: W1 row count != n");
  if (W2.cols() != n()) throw std::invalid_argument("NetworkedSystem: W2 column count != n");
  if (v.size() != n()) throw std::invalid_argument("NetworkedSystem: v size != n");
  if (f.in_dim != W2.rows() || f.out_dim != W1.cols())
    throw std::invalid_argument("NetworkedSystem: activation arity does not match W1/W2");
  if (omega && omega->dim() != n())
    throw std::invalid_argument("NetworkedSystem: omega dimension != n");
}

double alpha_k(const Eigen::VectorXd& d, Eigen::Index k) {
  if (k < 1 || k > d.size()) throw std::invalid_argument("alpha_k: k out of range");
  Eigen::VectorXd sorted = d;
  std::sort(sorted.data(), sorted.data() + sorted.size());
  return sorted.head(k).sum() / static_cast<double>(k);
}

namespace {

// sum_{i<=k} sigma_i^2(W1) sigma_i^2(W2), singular values padded with zeros
// when k exceeds their count.
double paired_sv_square_sum(const Eigen::MatrixXd& W1, const Eigen::MatrixXd& W2,
                            Eigen::Index k) {
  const Eigen::VectorXd s1 = W1.size() ? singular_values(W1) : Eigen::VectorXd();
  const Eigen::VectorXd s2 = W2.size() ? singular_values(W2) : Eigen::VectorXd();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double a = i < s1.size() ? s1[i] : 0.0;
    const double b = i < s2.size() ? s2[i] : 0.0;
    sum += a * a * b * b;
  }
  return sum;
}

}  // namespace

LurieSystem as_lurie(const NetworkedSystem& sys, double gamma) {
  sys.validate();
  if (!(gamma > 0)) throw std::invalid_argument("as_lurie: gamma must be positive");
  const Eigen::Index n = sys.n();

  LurieSystem lurie;
  lurie.A = Eigen::MatrixXd((-sys.d).asDiagonal());
  lurie.B = gamma * Eigen::MatrixXd::Identity(n, n);
  lurie.C = Eigen::MatrixXd::Identity(n, n);

  NonlinearityDescriptor phi;
  phi.kind = (sys.f.kind == ActivationDescriptor::Kind::TanhDiagonal ||
              sys.f.kind == ActivationDescriptor::Kind::OpinionOddSaturating)
                 ? NonlinearityDescriptor::Kind::AffineTanh
                 : NonlinearityDescriptor::Kind::UserSampled;
  phi.in_dim = n;
  phi.out_dim = n;
  const Eigen::MatrixXd W1 = sys.W1;
  const Eigen::MatrixXd W2 = sys.W2;
  const Eigen::VectorXd v = sys.v;
  const auto f_eval = sys.f.eval;
  const auto f_jac = sys.f.jac;
  phi.eval = [W1, W2, v, f_eval, gamma](double, const Eigen::VectorXd& y) -> Eigen::VectorXd {
    return (-1.0 / gamma) * (W1 * f_eval(W2 * y) + v);
  };
  phi.jac = [W1, W2, f_jac, gamma](double, const Eigen::VectorXd& y) -> Eigen::MatrixXd {
    return (-1.0 / gamma) * W1 * f_jac(W2 * y) * W2;
  };
  const Eigen::VectorXd sv1 = W1.size() ? singular_values(W1) : Eigen::VectorXd();
  const Eigen::VectorXd sv2 = W2.size() ? singular_values(W2) : Eigen::VectorXd();
  const double s1 = sv1.size() ? sv1(0) : 0.0;
  const double s2 = sv2.size() ? sv2(0) : 0.0;
  phi.gain_bound = s1 * sys.f.jac_norm_bound * s2 / gamma;
  // Horn-Johnson pairing bound on sum_{i<=k} sigma_i^2(J_Phi), the quantity
  // the Theorem 2 proof actually controls.
  Eigen::VectorXd sums(n);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = i < sv1.size() ? sv1(i) : 0.0;
    const double b = i < sv2.size() ? sv2(i) : 0.0;
    const double term = sys.f.jac_norm_bound * a * b / gamma;
    acc += term * term;
    sums(i) = acc;
  }
  phi.sv_square_sum_bound = sums;
  phi.gain_provenance = sys.f.bound_provenance;
  lurie.phi = std::move(phi);
  return lurie;
}

Certificate net_k_contraction_check(const NetworkedSystem& sys, Eigen::Index k) {
  sys.validate();
  const Eigen::Index n = sys.n();
  if (k < 1 || k > n)
    throw std::invalid_argument("net_k_contraction_check: k out of range");

  const double ak = alpha_k(sys.d, k);
  const double bound = sys.f.jac_norm_bound;
  const double lhs = bound * bound * paired_sv_square_sum(sys.W1, sys.W2, k);
  const double rhs = ak * ak * static_cast<double>(k);

  Certificate cert;
  cert.k = k;
  cert.margin = rhs - lhs;
  cert.gain_provenance = sys.f.bound_provenance;
  cert.convergence_implied = false;

  const bool condition = ak > 0.0 && cert.margin > 0.0;
  if (!condition) {
    cert.status = CertStatus::Infeasible;
    cert.Q = Eigen::MatrixXd::Identity(n, n);
    cert.which_gain = GainSide::None;
    return cert;
  }

  // Materialize the Theorem-1 scalar-P witness behind the condition:
  // gamma strictly between sqrt(LHS/k) and alpha_k, p = 1/gamma.
  const double gamma = 0.5 * (ak + std::sqrt(lhs / static_cast<double>(k)));
  const double p = 1.0 / gamma;
  cert.Q = std::sqrt(p) * Eigen::MatrixXd::Identity(n, n);
  cert.eta1 = 2.0 * static_cast<double>(k) * (ak - gamma);
  cert.eta2 = gamma * (static_cast<double>(k) - lhs / (gamma * gamma));
  cert.rate = 0.5 * (cert.eta1 + cert.eta2);
  cert.which_gain = GainSide::CSide;  // C = I_n in the Lurie rewrite
  cert.status = sys.f.bound_provenance == Provenance::Analytic
                    ? CertStatus::Certified
                    : CertStatus::SampledOnly;
  cert.convergence_implied =
      cert.status == CertStatus::Certified && k == 2 && sys.f.uniformly_bounded;
  if (!binomial_exceeds(n, k, kDefaultMaxCompoundDim)) cert.Qk = mult_compound(cert.Q, k);
  return cert;
}

HopfieldThresholds hopfield_thresholds(const Eigen::MatrixXd& W) {
  if (W.rows() != W.cols())
    throw std::invalid_argument("hopfield_thresholds: W must be square");
  HopfieldThresholds t;
  if (W.size() == 0 || W.norm() == 0.0) return t;
  const Eigen::VectorXd s = singular_values(W);
  t.alpha_1star = s[0];
  const double s2 = s.size() > 1 ? s[1] : 0.0;
  t.alpha_2star = std::sqrt(0.5 * (s[0] * s[0] + s2 * s2));
  return t;
}

Certificate opinion_check(const Eigen::VectorXd& d, const Eigen::VectorXd& u_weights,
                          const Eigen::MatrixXd& A_conn, const Eigen::VectorXd& b,
                          Eigen::Index k) {
  const Eigen::Index n = d.size();
  if (u_weights.size() != n || A_conn.rows() != n || A_conn.cols() != n || b.size() != n)
    throw std::invalid_argument("opinion_check: inconsistent dimensions");
  NetworkedSystem sys;
  sys.d = d;
  sys.W1 = Eigen::MatrixXd(u_weights.asDiagonal());
  sys.W2 = A_conn;
  sys.v = b;
  sys.f = ActivationDescriptor::opinion_odd_saturating(n);
  return net_k_contraction_check(sys, k);
}

NetworkedSystem power_2bus_system(const Power2BusParams& p) {
  NetworkedSystem sys;
  sys.d = Eigen::Vector3d(p.R1 / p.M1, p.R2 / p.M2, 0.0);
  sys.W1 = Eigen::Vector3d(-p.a / p.M1, p.a / p.M2, 1.0).asDiagonal();
  sys.W2 = Eigen::MatrixXd(2, 3);
  sys.W2 << 0, 0, 1, -1, 1, 0;
  sys.v = Eigen::Vector3d(p.p1 / p.M1, p.p2 / p.M2, 0.0);
  sys.f = ActivationDescriptor::power_trig(p.phi);
  return sys;
}

Power2BusResult power_2bus_check(const Power2BusParams& p) {
  if (!(p.M1 > 0 && p.M2 > 0 && p.R1 > 0 && p.R2 > 0 && p.a > 0))
    throw std::invalid_argument("power_2bus_check: M, R, a must be positive");
  if (!(p.phi > -std::numbers::pi / 2 && p.phi < std::numbers::pi / 2))
    throw std::invalid_argument("power_2bus_check: phi must lie in (-pi/2, pi/2)");
  if (!(p.a > std::max(p.M1, p.M2)))
    throw std::invalid_argument("power_2bus_check: hypothesis a > max{M1, M2} violated");

  Power2BusResult r;
  r.system = power_2bus_system(p);
  r.corollary4_lhs = 3.0 * p.a * p.a * (1.0 + std::abs(std::cos(2.0 * p.phi)));
  const double minM = std::min(p.M1, p.M2), maxM = std::max(p.M1, p.M2);
  const double minR = std::min(p.R1, p.R2);
  r.corollary4_rhs = (minM / maxM) * minR * minR / 2.0;
  r.corollary4_pass = r.corollary4_lhs < r.corollary4_rhs;
  r.theorem2 = net_k_contraction_check(r.system, 2);
  return r;
}

NetworkedSystem hopfield_example(double alpha) {
  NetworkedSystem sys;
  const Eigen::Index n = 3;
  sys.d = Eigen::VectorXd::Constant(n, alpha);
  sys.W1 = Eigen::MatrixXd(n, n);
  sys.W1 << 0, 1, 1, 0, 0, 1, 1, 0, 0;
  sys.W2 = Eigen::MatrixXd::Identity(n, n);
  sys.v = Eigen::VectorXd::Zero(n);
  sys.f = ActivationDescriptor::tanh_diagonal(n);
  return sys;
}

NetworkedSystem opinion_example(double u) {
  const Eigen::Index n = 3;
  Eigen::MatrixXd A(n, n);
  A << 1, -1, 0, -1, 1, -1, 0, -1, 1;
  NetworkedSystem sys;
  sys.d = Eigen::VectorXd::Ones(n);
  sys.W1 = u * Eigen::MatrixXd::Identity(n, n);
  sys.W2 = A;
  sys.v = Eigen::Vector3d(0.2, 0.0, -0.2);
  sys.f = ActivationDescriptor::opinion_odd_saturating(n);
  return sys;
}

}  // namespace kcontract
