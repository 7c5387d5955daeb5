// Test-only oracles, independent of the library's compound/certification
// code paths: recursive enumeration, finite differences of the
// multiplicative compound, the explicitly assembled compound k-ARI, and
// spectral k-sum/k-product predictions.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <vector>

#include "kcontract/compound.hpp"
#include "kcontract/lurie.hpp"
#include "kcontract/rng.hpp"

namespace oracles {

// All strictly increasing 1-based k-tuples from [1,n], by recursive descent
// (the library enumerates iteratively).
inline void combos_rec(Eigen::Index n, Eigen::Index k, Eigen::Index start,
                       std::vector<Eigen::Index>& cur,
                       std::vector<std::vector<Eigen::Index>>& out) {
  if (static_cast<Eigen::Index>(cur.size()) == k) {
    out.push_back(cur);
    return;
  }
  for (Eigen::Index v = start; v <= n; ++v) {
    cur.push_back(v);
    combos_rec(n, k, v + 1, cur, out);
    cur.pop_back();
  }
}

inline std::vector<std::vector<Eigen::Index>> enumerate_tuples(Eigen::Index n,
                                                               Eigen::Index k) {
  std::vector<std::vector<Eigen::Index>> out;
  std::vector<Eigen::Index> cur;
  combos_rec(n, k, 1, cur, out);
  return out;
}

// Central finite difference of (I + eps A)^(k) with one Richardson step:
// (4 C(eps/2) - C(eps)) / 3 has O(eps^4) truncation error.
inline Eigen::MatrixXd fd_add_compound(const Eigen::MatrixXd& A, Eigen::Index k,
                                       double eps) {
  const Eigen::Index n = A.rows();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  auto central = [&](double e) {
    return ((kcontract::mult_compound(I + e * A, k) -
             kcontract::mult_compound(I - e * A, k)) /
            (2.0 * e))
        .eval();
  };
  return (4.0 * central(eps / 2.0) - central(eps)) / 3.0;
}

// The Theorem-1 k-ARI left-hand side assembled literally from compounds:
// P^(k) A^[k] + (A^[k])^T P^(k) + eta1 P^(k)
//   + Q^(k) ((QBB^TQ)^[k] + (Q^-1 C^T C Q^-1)^[k]) Q^(k).
inline Eigen::MatrixXd direct_k_ari_lhs(const kcontract::LurieSystem& sys,
                                        Eigen::Index k, const Eigen::MatrixXd& Q,
                                        double eta1) {
  using namespace kcontract;
  const Eigen::MatrixXd P = Q * Q;
  const Eigen::MatrixXd Qinv = Q.partialPivLu().inverse();
  const Eigen::MatrixXd Pk = mult_compound(P, k);
  const Eigen::MatrixXd Qk = mult_compound(Q, k);
  const Eigen::MatrixXd Ak = add_compound(sys.A, k);
  const Eigen::MatrixXd Bterm = add_compound((Q * sys.B * sys.B.transpose() * Q).eval(), k);
  const Eigen::MatrixXd Cterm =
      add_compound((Qinv * sys.C.transpose() * sys.C * Qinv).eval(), k);
  return Pk * Ak + Ak.transpose() * Pk + eta1 * Pk + Qk * (Bterm + Cterm) * Qk;
}

// All k-element sums (or products) of a complex spectrum.
inline std::vector<std::complex<double>> k_fold(
    const Eigen::VectorXcd& eig, Eigen::Index k, bool product) {
  std::vector<std::complex<double>> out;
  const auto tuples = enumerate_tuples(eig.size(), k);
  out.reserve(tuples.size());
  for (const auto& t : tuples) {
    std::complex<double> acc = product ? 1.0 : 0.0;
    for (auto i : t) acc = product ? acc * eig[i - 1] : acc + eig[i - 1];
    out.push_back(acc);
  }
  return out;
}

// Greedy multiset match: every predicted value must have a distinct computed
// partner within tol.
inline bool spectra_match(std::vector<std::complex<double>> predicted,
                          std::vector<std::complex<double>> computed, double tol) {
  if (predicted.size() != computed.size()) return false;
  for (const auto& p : predicted) {
    double best = 1e300;
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < computed.size(); ++i) {
      const double d = std::abs(computed[i] - p);
      if (d < best) {
        best = d;
        best_i = i;
      }
    }
    if (best > tol) return false;
    computed.erase(computed.begin() + static_cast<std::ptrdiff_t>(best_i));
  }
  return true;
}

inline Eigen::MatrixXd random_spd(Eigen::Index n, kcontract::Rng& rng,
                                  double shift = 0.5) {
  const Eigen::MatrixXd G = rng.gaussian_matrix(n, n);
  return G * G.transpose() + shift * Eigen::MatrixXd::Identity(n, n);
}

// Symmetric positive definite square root.
inline Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& P) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

}  // namespace oracles
