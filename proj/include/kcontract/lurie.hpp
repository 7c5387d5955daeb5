#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kcontract/rng.hpp"

namespace kcontract {

enum class Provenance { Analytic, Sampled };
enum class CertStatus { Certified, Infeasible, SampledOnly };
enum class GainSide { CSide, BSide, Both, None };

std::string to_string(Provenance p);
std::string to_string(CertStatus s);
std::string to_string(GainSide g);

/// Memoryless feedback nonlinearity Phi: R_+ x R^q -> R^m with Jacobian
/// access and an optional uniform bound on sigma_1(J_Phi).
struct NonlinearityDescriptor {
  enum class Kind { TanhDiagonal, AffineTanh, UserSampled };

  Kind kind = Kind::UserSampled;
  Eigen::Index in_dim = 0;   // q
  Eigen::Index out_dim = 0;  // m
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> eval;
  std::function<Eigen::MatrixXd(double, const Eigen::VectorXd&)> jac;
  std::optional<double> gain_bound;  // uniform bound on sigma_1(J_Phi)
  /// Entry k-1 bounds sup over (t,y) of sum_{i<=k} sigma_i^2(J_Phi): the
  /// Horn-Johnson pairing bound for structured nonlinearities, sharper than
  /// k * gain_bound^2. Usable only summed, never per index.
  std::optional<Eigen::VectorXd> sv_square_sum_bound;
  Provenance gain_provenance = Provenance::Sampled;
  bool time_varying = false;

  /// Phi(t,y) = tanh(y) applied elementwise (m = q = n); sigma_1(J) <= 1.
  static NonlinearityDescriptor tanh_diagonal(Eigen::Index n);

  /// Phi(t,y) = scale * (W1 tanh(W2 y) + v); analytic gain bound
  /// |scale| sigma_1(W1) sigma_1(W2).
  static NonlinearityDescriptor affine_tanh(const Eigen::MatrixXd& W1,
                                            const Eigen::MatrixXd& W2,
                                            const Eigen::VectorXd& v,
                                            double scale = 1.0);

  /// Phi identically zero (m x q); gain bound 0.
  static NonlinearityDescriptor zero(Eigen::Index m, Eigen::Index q);

  /// Caller-supplied maps; any gain bound is treated as sampled evidence.
  static NonlinearityDescriptor user_sampled(
      Eigen::Index q, Eigen::Index m,
      std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> eval,
      std::function<Eigen::MatrixXd(double, const Eigen::VectorXd&)> jac,
      std::optional<double> sampled_bound = std::nullopt);
};

/// Feedback interconnection xdot = A x - B Phi(t, C x).
struct LurieSystem {
  Eigen::MatrixXd A;  // n x n
  Eigen::MatrixXd B;  // n x m
  Eigen::MatrixXd C;  // q x n
  NonlinearityDescriptor phi;

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
  Eigen::Index q() const { return C.rows(); }

  void validate() const;
};

/// Witness (k, Q, eta1, eta2) for the compound-matrix contraction condition,
/// with the margins actually achieved.
struct Certificate {
  Eigen::Index k = 0;
  Eigen::MatrixXd Q;       // n x n SPD weight, P = Q*Q
  Eigen::MatrixXd Qk;      // Q^(k), the scaled-norm weight actually certified
  double eta1 = 0.0;
  double eta2 = 0.0;
  double rate = 0.0;       // (eta1 + eta2) / 2
  CertStatus status = CertStatus::Infeasible;
  double margin = 0.0;     // worst slack over the checked inequalities
  GainSide which_gain = GainSide::None;
  Provenance gain_provenance = Provenance::Sampled;
  bool convergence_implied = false;  // k == 2 with uniformly bounded activation

  bool certified() const { return status == CertStatus::Certified; }
};

/// Jacobian of the closed loop: J(t,x) = A - B J_Phi(t, Cx) C.
Eigen::MatrixXd closed_loop_jacobian(const LurieSystem& sys, double t,
                                     const Eigen::VectorXd& x);

struct AriResult {
  bool holds = false;
  double margin = 0.0;  // -sum of the k largest eigenvalues of S
};

/// k-ARI feasibility for a given weight Q and slack eta1, evaluated through
/// the S-matrix route: S = QAQ^-1 + Q^-1 A^T Q + (eta1/k) I + QBB^TQ +
/// Q^-1 C^T C Q^-1 and the test sum_{i<=k} lambda_i(S) <= 0.
AriResult k_ari_check(const LurieSystem& sys, Eigen::Index k,
                      const Eigen::MatrixXd& Q, double eta1);

struct GainResult {
  double eta2 = 0.0;
  GainSide side = GainSide::None;
  Provenance provenance = Provenance::Sampled;
};

/// Best eta2 for which one of the two small-gain conditions holds, from the
/// analytic gain bound when the nonlinearity carries one, otherwise from the
/// worst case over the supplied (t, y) samples.
GainResult gain_condition_check(const LurieSystem& sys, Eigen::Index k,
                                const Eigen::MatrixXd& Q,
                                const std::vector<std::pair<double, Eigen::VectorXd>>& samples);

enum class CertifyStrategy { ScalarP, GivenQ };

struct CertifyOptions {
  std::optional<Box> sample_box;  // y-box for sampled gain conditions
  int n_samples = 512;
  std::uint64_t seed = 0;
  std::pair<double, double> t_range = {0.0, 10.0};  // sampled only if time_varying
};

/// Full Theorem-1 style certification. ScalarP searches the family
/// P = p I_n for the p maximizing eta1(p) + eta2(p); GivenQ evaluates the
/// caller's candidate. Certified requires analytic gain provenance and
/// eta1 + eta2 above tolerance; sampled gain evidence caps the status at
/// SampledOnly.
Certificate certify_lurie(const LurieSystem& sys, Eigen::Index k,
                          CertifyStrategy strategy,
                          const std::optional<Eigen::MatrixXd>& Q_opt = std::nullopt,
                          const CertifyOptions& opts = {});

/// Re-verify a certificate's (Q, eta1, eta2) at a higher order ell.
bool verify_at_order(const LurieSystem& sys, Eigen::Index ell,
                     const Eigen::MatrixXd& Q, double eta1, double eta2);

struct ScalarPResult {
  double p = 0.0;
  bool feasible = false;
};

/// Minimizer of g(p) = gamma^2 p + 1/p (the scalar k-ARI profile) and
/// feasibility of the strict bound g(p*) = 2 gamma < 2 alpha_k.
ScalarPResult scalar_p_search(double gamma, double alpha_k);

/// lambda_max( (-MN - N^TM^T - N^TN)^[k] - (MM^T)^[k] ); nonpositive for
/// every M, N by the compound small-gain lemma.
double lemma1_gap(const Eigen::MatrixXd& M, const Eigen::MatrixXd& N,
                  Eigen::Index k);

}  // namespace kcontract
