#include "kcontract/lurie.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "kcontract/compound.hpp"
#include "kcontract/measures.hpp"

namespace kcontract {

std::string to_string(Provenance p) {
  return p == Provenance::Analytic ? "analytic" : "sampled";
}

std::string to_string(CertStatus s) {
  switch (s) {
    case CertStatus::Certified: return "certified";
    case CertStatus::Infeasible: return "infeasible";
    case CertStatus::SampledOnly: return "sampled-only";
  }
  return "?";
}

std::string to_string(GainSide g) {
  switch (g) {
    case GainSide::CSide: return "C-side";
    case GainSide::BSide: return "B-side";
    case GainSide::Both: return "both";
    case GainSide::None: return "none";
  }
  return "?";
}

NonlinearityDescriptor NonlinearityDescriptor::tanh_diagonal(Eigen::Index n) {
  NonlinearityDescriptor d;
  d.kind = Kind::TanhDiagonal;
  d.in_dim = n;
  d.out_dim = n;
  d.eval = [](double, const Eigen::VectorXd& y) -> Eigen::VectorXd {
    return y.array().tanh();
  };
  d.jac = [](double, const Eigen::VectorXd& y) -> Eigen::MatrixXd {
    return (1.0 - y.array().tanh().square()).matrix().asDiagonal();
  };
  d.gain_bound = 1.0;
  d.sv_square_sum_bound = Eigen::VectorXd::LinSpaced(n, 1.0, static_cast<double>(n));
  d.gain_provenance = Provenance::Analytic;
  return d;
}

NonlinearityDescriptor NonlinearityDescriptor::affine_tanh(const Eigen::MatrixXd& W1,
                                                           const Eigen::MatrixXd& W2,
                                                           const Eigen::VectorXd& v,
                                                           double scale) {
  if (W1.cols() != W2.rows() || W1.rows() != v.size())
    throw std::invalid_argument("affine_tanh: inconsistent W1/W2/v dimensions");
  NonlinearityDescriptor d;
  d.kind = Kind::AffineTanh;
  d.in_dim = W2.cols();
  d.out_dim = W1.rows();
  d.eval = [W1, W2, v, scale](double, const Eigen::VectorXd& y) -> Eigen::VectorXd {
    return scale * (W1 * (W2 * y).array().tanh().matrix() + v);
  };
  d.jac = [W1, W2, scale](double, const Eigen::VectorXd& y) -> Eigen::MatrixXd {
    const Eigen::VectorXd z = W2 * y;
    const Eigen::VectorXd slope = (1.0 - z.array().tanh().square()).matrix();
    return scale * W1 * slope.asDiagonal() * W2;
  };
  const Eigen::VectorXd sv1 = W1.size() ? singular_values(W1) : Eigen::VectorXd();
  const Eigen::VectorXd sv2 = W2.size() ? singular_values(W2) : Eigen::VectorXd();
  const double s1 = sv1.size() ? sv1(0) : 0.0;
  const double s2 = sv2.size() ? sv2(0) : 0.0;
  d.gain_bound = std::abs(scale) * s1 * s2;
  // Horn-Johnson pairing: sum_{i<=k} sigma_i^2(scale W1 D W2) <=
  // sum_{i<=k} (|scale| sigma_i(W1) sigma_i(W2))^2 since ||D||_2 <= 1.
  const Eigen::Index kmax = std::min(d.in_dim, d.out_dim);
  Eigen::VectorXd sums(kmax);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < kmax; ++i) {
    const double a = i < sv1.size() ? sv1(i) : 0.0;
    const double b = i < sv2.size() ? sv2(i) : 0.0;
    const double term = scale * a * b;
    acc += term * term;
    sums(i) = acc;
  }
  d.sv_square_sum_bound = sums;
  d.gain_provenance = Provenance::Analytic;
  return d;
}

NonlinearityDescriptor NonlinearityDescriptor::zero(Eigen::Index m, Eigen::Index q) {
  NonlinearityDescriptor d;
  d.kind = Kind::AffineTanh;
  d.in_dim = q;
  d.out_dim = m;
  d.eval = [m](double, const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(m).eval(); };
  d.jac = [m, q](double, const Eigen::VectorXd&) { return Eigen::MatrixXd::Zero(m, q).eval(); };
  d.gain_bound = 0.0;
  d.sv_square_sum_bound = Eigen::VectorXd::Zero(std::min(m, q));
  d.gain_provenance = Provenance::Analytic;
  return d;
}

NonlinearityDescriptor NonlinearityDescriptor::user_sampled(
    Eigen::Index q, Eigen::Index m,
    std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> eval,
    std::function<Eigen::MatrixXd(double, const Eigen::VectorXd&)> jac,
    std::optional<double> sampled_bound) {
  NonlinearityDescriptor d;
  d.kind = Kind::UserSampled;
  d.in_dim = q;
  d.out_dim = m;
  d.eval = std::move(eval);
  d.jac = std::move(jac);
  d.gain_bound = sampled_bound;
  d.gain_provenance = Provenance::Sampled;
  return d;
}

void LurieSystem::validate() const {
  if (A.rows() != A.cols()) throw std::invalid_argument("LurieSystem: A must be square");
  if (B.rows() != A.rows()) throw std::invalid_argument("LurieSystem: B row count != n");
  if (C.cols() != A.rows()) throw std::invalid_argument("LurieSystem: C column count != n");
  if (phi.in_dim != C.rows() || phi.out_dim != B.cols())
    throw std::invalid_argument("LurieSystem: phi arity does not match B/C");
}

Eigen::MatrixXd closed_loop_jacobian(const LurieSystem& sys, double t,
                                     const Eigen::VectorXd& x) {
  const Eigen::MatrixXd Jphi = sys.phi.jac(t, sys.C * x);
  if (!Jphi.allFinite())
    throw std::runtime_error("closed_loop_jacobian: non-finite nonlinearity Jacobian");
  return sys.A - sys.B * Jphi * sys.C;
}

namespace {

struct QFactors {
  Eigen::MatrixXd Q, Qinv;
};

QFactors factor_weight(const Eigen::MatrixXd& Q, Eigen::Index n) {
  if (Q.rows() != n || Q.cols() != n)
    throw std::invalid_argument("weight Q has wrong dimensions");
  if ((Q - Q.transpose()).norm() > 1e-10 * std::max(1.0, Q.norm()))
    throw std::invalid_argument("weight Q must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  const double lmax = es.eigenvalues().maxCoeff();
  if (!(lmin > 0) || lmin / lmax < 1e-12)
    throw std::invalid_argument("weight Q must be positive definite and well-conditioned");
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(Q);
  return {Q, lu.inverse()};
}

// S = QAQ^-1 + Q^-1 A^T Q + (eta1/k) I + QBB^TQ + Q^-1 C^T C Q^-1, without
// the eta1 term when eta1 == 0; the k-ARI adds eta1 to the top-k sum.
Eigen::MatrixXd s_matrix(const LurieSystem& sys, const QFactors& f, double eta1,
                         Eigen::Index k) {
  const Eigen::Index n = sys.n();
  Eigen::MatrixXd S = f.Q * sys.A * f.Qinv + f.Qinv * sys.A.transpose() * f.Q +
                      f.Q * sys.B * sys.B.transpose() * f.Q +
                      f.Qinv * sys.C.transpose() * sys.C * f.Qinv;
  S += (eta1 / static_cast<double>(k)) * Eigen::MatrixXd::Identity(n, n);
  return S;
}

// Best eta2 on one side from an analytic gain bound q: the condition matrix
// is bounded above (Loewner) by (q^2 - 1) G with G PSD, and Ky Fan sums are
// monotone under the Loewner order.
double analytic_eta2_side(const Eigen::MatrixXd& G, double q, Eigen::Index k) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (G + G.transpose()),
                                                    Eigen::EigenvaluesOnly);
  const Eigen::VectorXd ev = es.eigenvalues();  // increasing
  const double c = q * q - 1.0;
  double topk = 0.0;
  if (c <= 0) {
    topk = c * ev.head(k).sum();  // largest of c*G come from smallest of G
  } else {
    topk = c * ev.tail(k).sum();
  }
  return -topk;
}

}  // namespace

AriResult k_ari_check(const LurieSystem& sys, Eigen::Index k,
                      const Eigen::MatrixXd& Q, double eta1) {
  sys.validate();
  if (k < 1 || k > sys.n()) throw std::invalid_argument("k_ari_check: k out of range");
  const QFactors f = factor_weight(Q, sys.n());
  const Eigen::MatrixXd S = s_matrix(sys, f, eta1, k);
  const double sum = top_k_eig_sum(S, k);
  AriResult r;
  r.margin = -sum;
  r.holds = sum <= definiteness_tolerance(S);
  return r;
}

GainResult gain_condition_check(
    const LurieSystem& sys, Eigen::Index k, const Eigen::MatrixXd& Q,
    const std::vector<std::pair<double, Eigen::VectorXd>>& samples) {
  sys.validate();
  if (k < 1 || k > sys.n())
    throw std::invalid_argument("gain_condition_check: k out of range");
  const QFactors f = factor_weight(Q, sys.n());

  GainResult r;
  const bool analytic = sys.phi.gain_bound.has_value() &&
                        sys.phi.gain_provenance == Provenance::Analytic;
  if (analytic) {
    const double qb = *sys.phi.gain_bound;
    const Eigen::MatrixXd Gc = f.Qinv * sys.C.transpose() * sys.C * f.Qinv;
    const Eigen::MatrixXd Gb = f.Q * sys.B * sys.B.transpose() * f.Q;
    double etaC = analytic_eta2_side(Gc, qb, k);
    double etaB = analytic_eta2_side(Gb, qb, k);

    // Sharper route when a top-k singular-value square-sum bound is carried
    // and the side's matrix is an identity under a scalar weight: the
    // condition reduces to sum_i sigma_i^2(J_Phi) <= k - eta2 * p^{+-1}.
    const double qscale = Q(0, 0);
    const bool scalarQ =
        (Q - qscale * Eigen::MatrixXd::Identity(sys.n(), sys.n())).norm() <=
        1e-12 * std::max(1.0, Q.norm());
    if (sys.phi.sv_square_sum_bound && scalarQ) {
      const auto& sums = *sys.phi.sv_square_sum_bound;
      const double bound_k =
          k <= sums.size() ? sums(k - 1) : (sums.size() ? sums(sums.size() - 1) : 0.0);
      const double p = qscale * qscale;
      const Eigen::Index n = sys.n();
      const bool c_identity =
          sys.C.rows() == n &&
          (sys.C - Eigen::MatrixXd::Identity(n, n)).norm() <= 1e-12 * std::sqrt((double)n);
      const bool b_identity =
          sys.B.cols() == n &&
          (sys.B - Eigen::MatrixXd::Identity(n, n)).norm() <= 1e-12 * std::sqrt((double)n);
      if (c_identity) etaC = std::max(etaC, (static_cast<double>(k) - bound_k) / p);
      if (b_identity) etaB = std::max(etaB, (static_cast<double>(k) - bound_k) * p);
    }

    r.eta2 = std::max(etaC, etaB);
    r.provenance = Provenance::Analytic;
    const double tie = 1e-12 * std::max(1.0, std::abs(r.eta2));
    if (std::abs(etaC - etaB) <= tie)
      r.side = GainSide::Both;
    else
      r.side = etaC > etaB ? GainSide::CSide : GainSide::BSide;
    return r;
  }

  if (samples.empty())
    throw std::invalid_argument(
        "gain_condition_check: samples required when no analytic gain bound is declared");
  const Eigen::Index m = sys.m(), q = sys.q();
  double worstC = -std::numeric_limits<double>::infinity();
  double worstB = -std::numeric_limits<double>::infinity();
  for (const auto& [t, y] : samples) {
    const Eigen::MatrixXd J = sys.phi.jac(t, y);
    if (!J.allFinite())
      throw std::runtime_error("gain_condition_check: non-finite J_Phi at a sample");
    const Eigen::MatrixXd Mc = f.Qinv * sys.C.transpose() *
                               (J.transpose() * J - Eigen::MatrixXd::Identity(q, q)) *
                               sys.C * f.Qinv;
    const Eigen::MatrixXd Mb = f.Q * sys.B *
                               (J * J.transpose() - Eigen::MatrixXd::Identity(m, m)) *
                               sys.B.transpose() * f.Q;
    worstC = std::max(worstC, top_k_eig_sum(Mc, k));
    worstB = std::max(worstB, top_k_eig_sum(Mb, k));
  }
  const double etaC = -worstC, etaB = -worstB;
  r.eta2 = std::max(etaC, etaB);
  r.provenance = Provenance::Sampled;
  const double tie = 1e-12 * std::max(1.0, std::abs(r.eta2));
  if (std::abs(etaC - etaB) <= tie)
    r.side = GainSide::Both;
  else
    r.side = etaC > etaB ? GainSide::CSide : GainSide::BSide;
  return r;
}

namespace {

std::vector<std::pair<double, Eigen::VectorXd>> default_samples(
    const LurieSystem& sys, const CertifyOptions& opts) {
  const bool analytic = sys.phi.gain_bound.has_value() &&
                        sys.phi.gain_provenance == Provenance::Analytic;
  if (analytic) return {};
  Box box = opts.sample_box.value_or(Box::centered(sys.q(), 3.0));
  if (box.dim() != sys.q())
    throw std::invalid_argument("certify_lurie: sample box dimension != q");
  Rng rng(opts.seed);
  auto pts = latin_hypercube(box, opts.n_samples, rng);
  std::vector<std::pair<double, Eigen::VectorXd>> samples;
  samples.reserve(pts.size());
  for (auto& y : pts) {
    const double t = sys.phi.time_varying
                         ? rng.uniform(opts.t_range.first, opts.t_range.second)
                         : 0.0;
    samples.emplace_back(t, std::move(y));
  }
  return samples;
}

struct Evaluation {
  double eta1 = 0.0;
  GainResult gain;
};

// Best achievable eta1 for a weight Q is -sum_{i<=k} lambda_i(S0) since the
// eta1/k identity shift adds exactly eta1 to the top-k sum.
Evaluation evaluate_weight(const LurieSystem& sys, Eigen::Index k,
                           const Eigen::MatrixXd& Q,
                           const std::vector<std::pair<double, Eigen::VectorXd>>& samples) {
  Evaluation e;
  const QFactors f = factor_weight(Q, sys.n());
  const Eigen::MatrixXd S0 = s_matrix(sys, f, 0.0, k);
  e.eta1 = -top_k_eig_sum(S0, k);
  e.gain = gain_condition_check(sys, k, Q, samples);
  return e;
}

}  // namespace

Certificate certify_lurie(const LurieSystem& sys, Eigen::Index k,
                          CertifyStrategy strategy,
                          const std::optional<Eigen::MatrixXd>& Q_opt,
                          const CertifyOptions& opts) {
  sys.validate();
  if (k < 1 || k > sys.n()) throw std::invalid_argument("certify_lurie: k out of range");
  const auto samples = default_samples(sys, opts);

  Eigen::MatrixXd Q;
  if (strategy == CertifyStrategy::GivenQ) {
    if (!Q_opt) throw std::invalid_argument("certify_lurie: given-Q strategy needs Q");
    Q = *Q_opt;
  } else {
    // Golden-section search on log10(p) for the scalar family Q = sqrt(p) I.
    const Eigen::Index n = sys.n();
    auto rate_of = [&](double log10p) {
      const double p = std::pow(10.0, log10p);
      const Eigen::MatrixXd Qp = std::sqrt(p) * Eigen::MatrixXd::Identity(n, n);
      const Evaluation e = evaluate_weight(sys, k, Qp, samples);
      return e.eta1 + e.gain.eta2;
    };
    double lo = -6.0, hi = 6.0;
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = rate_of(x1), f2 = rate_of(x2);
    for (int it = 0; it < 80; ++it) {
      if (f1 < f2) {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + gr * (hi - lo);
        f2 = rate_of(x2);
      } else {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - gr * (hi - lo);
        f1 = rate_of(x1);
      }
    }
    const double p = std::pow(10.0, 0.5 * (lo + hi));
    Q = std::sqrt(p) * Eigen::MatrixXd::Identity(n, n);
  }

  const Evaluation e = evaluate_weight(sys, k, Q, samples);

  Certificate cert;
  cert.k = k;
  cert.Q = Q;
  cert.eta1 = e.eta1;
  cert.eta2 = e.gain.eta2;
  cert.rate = 0.5 * (cert.eta1 + cert.eta2);
  cert.margin = cert.eta1 + cert.eta2;
  cert.which_gain = e.gain.side;
  cert.gain_provenance = e.gain.provenance;

  const double eps = 1e-9 * std::max(1.0, std::abs(cert.eta1) + std::abs(cert.eta2));
  if (cert.margin > eps) {
    cert.status = e.gain.provenance == Provenance::Analytic ? CertStatus::Certified
                                                            : CertStatus::SampledOnly;
  } else {
    cert.status = CertStatus::Infeasible;
  }
  if (!binomial_exceeds(sys.n(), k, kDefaultMaxCompoundDim))
    cert.Qk = mult_compound(Q, k);
  return cert;
}

bool verify_at_order(const LurieSystem& sys, Eigen::Index ell,
                     const Eigen::MatrixXd& Q, double eta1, double eta2) {
  const AriResult ari = k_ari_check(sys, ell, Q, eta1);
  if (!ari.holds) return false;
  const GainResult gain = gain_condition_check(sys, ell, Q, {});
  const double eps = 1e-9 * std::max(1.0, std::abs(eta2));
  return gain.eta2 >= eta2 - eps;
}

ScalarPResult scalar_p_search(double gamma, double alpha_k) {
  if (!(gamma > 0)) throw std::invalid_argument("scalar_p_search: gamma must be positive");
  ScalarPResult r;
  r.p = 1.0 / gamma;
  r.feasible = 2.0 * gamma < 2.0 * alpha_k;
  return r;
}

double lemma1_gap(const Eigen::MatrixXd& M, const Eigen::MatrixXd& N,
                  Eigen::Index k) {
  if (M.cols() != N.rows() || M.rows() != N.cols())
    throw std::invalid_argument("lemma1_gap: M must be n x m and N m x n");
  const Eigen::MatrixXd X =
      -M * N - N.transpose() * M.transpose() - N.transpose() * N;
  const Eigen::MatrixXd Y = M * M.transpose();
  const Eigen::MatrixXd D = add_compound(X, k) - add_compound(Y, k);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (D + D.transpose()),
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

}  // namespace kcontract
