#pragma once

#include <Eigen/Dense>

#include <iostream>
#include <stdexcept>
#include <string>

namespace kcontract {

/// Tolerance used by every semidefiniteness / negativity test: a paper
/// inequality S <= 0 is accepted when the tested quantity is below this,
/// and a strict inequality is certified only when the margin exceeds it.
/// Frobenius norm bounds the spectral norm from above, which only widens
/// the acceptance band.
template <typename Derived>
double definiteness_tolerance(const Eigen::MatrixBase<Derived>& S) {
  return 1e-9 * std::max(1.0, static_cast<double>(S.norm()));
}

/// L2 matrix measure (logarithmic norm): mu2(A) = (1/2) lambda_max(A + A^T).
template <typename Derived>
typename Derived::Scalar mu2(const Eigen::MatrixBase<Derived>& A) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (A.rows() != A.cols()) throw std::invalid_argument("mu2: matrix must be square");
  Mat sym = A + A.transpose();
  Eigen::SelfAdjointEigenSolver<Mat> es(sym, Eigen::EigenvaluesOnly);
  return Scalar(0.5) * es.eigenvalues().maxCoeff();
}

/// Scaled L2 matrix measure mu_{2,H}(A) = mu2(H A H^{-1}). H must be
/// invertible; reciprocal condition below 1e-12 is rejected.
template <typename Derived, typename DerivedH>
typename Derived::Scalar mu2_scaled(const Eigen::MatrixBase<Derived>& A,
                                    const Eigen::MatrixBase<DerivedH>& H) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (H.rows() != H.cols() || H.rows() != A.rows())
    throw std::invalid_argument("mu2_scaled: H must be square and match A");
  Mat Hm = H;
  Eigen::JacobiSVD<Mat> svd(Hm);
  const auto& sv = svd.singularValues();
  const double rc = sv.size() == 0 || sv(0) == 0 ? 0.0 : sv(sv.size() - 1) / sv(0);
  if (!(rc > 1e-12))
    throw std::invalid_argument("mu2_scaled: H is singular or near-singular (rcond=" +
                                std::to_string(rc) + ")");
  Mat scaled = Hm * A * Eigen::PartialPivLU<Mat>(Hm).inverse();
  return mu2(scaled);
}

/// Sum of the k largest eigenvalues of a symmetric matrix (Ky Fan k-sum).
/// The input is symmetrized; relative asymmetry above 1e-10 draws a warning.
template <typename Derived>
typename Derived::Scalar top_k_eig_sum(const Eigen::MatrixBase<Derived>& S,
                                       Eigen::Index k) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (S.rows() != S.cols())
    throw std::invalid_argument("top_k_eig_sum: matrix must be square");
  if (k < 1 || k > S.rows())
    throw std::invalid_argument("top_k_eig_sum: k=" + std::to_string(k) +
                                " out of range [1," + std::to_string(S.rows()) + "]");
  Mat M = S;
  const double asym = (M - M.transpose()).norm();
  if (asym > 1e-10 * std::max(1.0, M.norm()))
    std::cerr << "top_k_eig_sum: symmetrizing input with relative asymmetry "
              << asym / std::max(1.0, M.norm()) << "\n";
  Mat sym = Scalar(0.5) * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(sym, Eigen::EigenvaluesOnly);
  // Eigen returns eigenvalues in increasing order.
  return es.eigenvalues().tail(k).sum();
}

/// Singular values in descending order.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> singular_values(
    const Eigen::MatrixBase<Derived>& A) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Mat M = A;
  if (!M.allFinite())
    throw std::invalid_argument("singular_values: non-finite entries");
  Eigen::JacobiSVD<Mat> svd(M);
  return svd.singularValues();
}

}  // namespace kcontract
