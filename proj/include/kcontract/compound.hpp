#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <iterator>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace kcontract {

/// Default cap on binom(n,k): compound dimensions explode combinatorially,
/// so operations fail loudly instead of exhausting memory. Overridable per
/// call (the CLI wires KCONTRACT_MAX_COMPOUND_DIM through to this).
inline constexpr std::int64_t kDefaultMaxCompoundDim = 1'000'000;

/// Thrown when a requested compound would exceed the dimension cap.
class CompoundCapError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// binom(n,k) in exact 64-bit arithmetic. Throws std::overflow_error if the
/// value does not fit.
inline std::int64_t binomial(std::int64_t n, std::int64_t k) {
  if (n < 0 || k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::int64_t result = 1;
  for (std::int64_t i = 1; i <= k; ++i) {
    // result * (n - k + i) / i is always integral at this point.
    const std::int64_t numer = n - k + i;
    if (result > std::numeric_limits<std::int64_t>::max() / numer)
      throw std::overflow_error("binomial(" + std::to_string(n) + "," +
                                std::to_string(k) + ") overflows 64-bit");
    result = result * numer / i;
  }
  return result;
}

/// True iff binom(n,k) > limit, evaluated without overflowing.
inline bool binomial_exceeds(std::int64_t n, std::int64_t k, std::int64_t limit) {
  if (n < 0 || k < 0 || k > n) return false;
  k = std::min(k, n - k);
  std::int64_t result = 1;
  for (std::int64_t i = 1; i <= k; ++i) {
    const std::int64_t numer = n - k + i;
    if (result > std::numeric_limits<std::int64_t>::max() / numer) return true;
    result = result * numer / i;
    if (result > limit) return true;
  }
  return false;
}

/// A strictly increasing k-tuple from [1,n] (one element of Q_{k,n}),
/// together with its lexicographic rank.
struct MultiIndex {
  std::vector<Eigen::Index> entries;  // 1-based, strictly increasing
  Eigen::Index n = 0;                 // ambient dimension
  std::int64_t rank = 0;              // position in lexicographic Q_{k,n}

  Eigen::Index order() const { return static_cast<Eigen::Index>(entries.size()); }
};

/// Order and cap for a compound computation.
struct CompoundSpec {
  Eigen::Index k = 1;
  std::int64_t max_dim = kDefaultMaxCompoundDim;
};

namespace detail {

inline void check_compound_args(Eigen::Index rows, Eigen::Index cols,
                                Eigen::Index k, std::int64_t max_dim) {
  if (k < 1 || k > std::min(rows, cols))
    throw std::invalid_argument("compound order k=" + std::to_string(k) +
                                " out of range for " + std::to_string(rows) +
                                "x" + std::to_string(cols) + " matrix");
  if (binomial_exceeds(rows, k, max_dim) || binomial_exceeds(cols, k, max_dim))
    throw CompoundCapError("binom(" + std::to_string(std::max(rows, cols)) +
                           "," + std::to_string(k) + ") exceeds compound cap " +
                           std::to_string(max_dim));
}

// Lexicographic successor of a strictly increasing 0-based k-tuple; returns
// false after the last tuple (n-k, ..., n-1).
inline bool next_combination(std::vector<Eigen::Index>& c, Eigen::Index n) {
  const auto k = static_cast<Eigen::Index>(c.size());
  Eigen::Index i = k - 1;
  while (i >= 0 && c[i] == n - k + i) --i;
  if (i < 0) return false;
  ++c[i];
  for (Eigen::Index j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
  return true;
}

inline std::vector<std::vector<Eigen::Index>> combinations0(Eigen::Index n,
                                                            Eigen::Index k) {
  std::vector<std::vector<Eigen::Index>> out;
  std::vector<Eigen::Index> c(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) c[i] = i;
  do {
    out.push_back(c);
  } while (next_combination(c, n));
  return out;
}

// Minor of order k selected by 0-based row/column index tuples. Direct
// cofactor formulas for k <= 3, partial-pivoting LU above that.
template <typename Mat>
typename Mat::Scalar minor_of(const Mat& A, const std::vector<Eigen::Index>& r,
                              const std::vector<Eigen::Index>& c) {
  using Scalar = typename Mat::Scalar;
  const auto k = static_cast<Eigen::Index>(r.size());
  switch (k) {
    case 1:
      return A(r[0], c[0]);
    case 2:
      return A(r[0], c[0]) * A(r[1], c[1]) - A(r[0], c[1]) * A(r[1], c[0]);
    case 3:
      return A(r[0], c[0]) * (A(r[1], c[1]) * A(r[2], c[2]) - A(r[1], c[2]) * A(r[2], c[1])) -
             A(r[0], c[1]) * (A(r[1], c[0]) * A(r[2], c[2]) - A(r[1], c[2]) * A(r[2], c[0])) +
             A(r[0], c[2]) * (A(r[1], c[0]) * A(r[2], c[1]) - A(r[1], c[1]) * A(r[2], c[0]));
    default: {
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> sub(k, k);
      for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j) sub(i, j) = A(r[i], c[j]);
      return Eigen::PartialPivLU<decltype(sub)>(sub).determinant();
    }
  }
}

}  // namespace detail

/// All binom(n,k) multi-indices of Q_{k,n} in lexicographic order; the rank
/// field of each equals its list position.
inline std::vector<MultiIndex> multi_index_enumerate(
    Eigen::Index n, Eigen::Index k, std::int64_t max_dim = kDefaultMaxCompoundDim) {
  if (k < 1 || k > n)
    throw std::invalid_argument("multi_index_enumerate: k=" + std::to_string(k) +
                                " out of range [1," + std::to_string(n) + "]");
  if (binomial_exceeds(n, k, max_dim))
    throw CompoundCapError("binom(" + std::to_string(n) + "," + std::to_string(k) +
                           ") exceeds compound cap " + std::to_string(max_dim));
  std::vector<MultiIndex> out;
  out.reserve(static_cast<std::size_t>(binomial(n, k)));
  for (auto& c : detail::combinations0(n, k)) {
    MultiIndex mi;
    mi.entries.resize(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) mi.entries[i] = c[i] + 1;
    mi.n = n;
    mi.rank = static_cast<std::int64_t>(out.size());
    out.push_back(std::move(mi));
  }
  return out;
}

/// Lexicographic rank of a strictly increasing 1-based k-tuple in Q_{k,n}
/// via the combinatorial number system (O(k) binomials, no enumeration).
inline std::int64_t multi_index_rank(const std::vector<Eigen::Index>& entries,
                                     Eigen::Index n) {
  const auto k = static_cast<Eigen::Index>(entries.size());
  if (k < 1 || k > n) throw std::invalid_argument("multi_index_rank: bad k");
  std::int64_t rank = 0;
  Eigen::Index prev = 0;  // 1-based predecessor
  for (Eigen::Index i = 0; i < k; ++i) {
    const Eigen::Index e = entries[i];
    if (e <= prev || e > n)
      throw std::invalid_argument("multi_index_rank: entries not strictly increasing in [1,n]");
    for (Eigen::Index v = prev + 1; v < e; ++v) rank += binomial(n - v, k - 1 - i);
    prev = e;
  }
  return rank;
}

/// Inverse of multi_index_rank.
inline MultiIndex multi_index_unrank(std::int64_t rank, Eigen::Index n, Eigen::Index k) {
  if (k < 1 || k > n) throw std::invalid_argument("multi_index_unrank: bad k");
  if (rank < 0 || rank >= binomial(n, k))
    throw std::invalid_argument("multi_index_unrank: rank out of range");
  MultiIndex mi;
  mi.n = n;
  mi.rank = rank;
  mi.entries.resize(static_cast<std::size_t>(k));
  Eigen::Index v = 1;
  for (Eigen::Index i = 0; i < k; ++i) {
    for (;; ++v) {
      const std::int64_t block = binomial(n - v, k - 1 - i);
      if (rank < block) break;
      rank -= block;
    }
    mi.entries[static_cast<std::size_t>(i)] = v;
    ++v;
  }
  return mi;
}

/// k-multiplicative compound A^(k): the binom(rows,k) x binom(cols,k) matrix
/// of all order-k minors, rows/columns ordered lexicographically by Q_{k,n}.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
mult_compound(const Eigen::MatrixBase<Derived>& A, Eigen::Index k,
              std::int64_t max_dim = kDefaultMaxCompoundDim) {
  using Scalar = typename Derived::Scalar;
  detail::check_compound_args(A.rows(), A.cols(), k, max_dim);
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> M = A;
  if (!M.allFinite())
    throw std::invalid_argument("mult_compound: non-finite entries");
  const auto rows = detail::combinations0(M.rows(), k);
  const auto cols = detail::combinations0(M.cols(), k);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(
      static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          detail::minor_of(M, rows[i], cols[j]);
  return out;
}

template <typename Derived>
auto mult_compound(const Eigen::MatrixBase<Derived>& A, const CompoundSpec& spec) {
  return mult_compound(A, spec.k, spec.max_dim);
}

/// k-additive compound A^[k] = d/de (I + e A)^(k) at e = 0, built by the
/// closed combinatorial rule: diagonal (a,a) is the trace of A over a;
/// off-diagonal (a,b) is (-1)^{s+t} A(i_s, j_t) when a and b differ in
/// exactly one element (i_s at position s in a, j_t at position t in b),
/// and zero otherwise. Positions are 1-based, matching the minor expansion.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
add_compound(const Eigen::MatrixBase<Derived>& A, Eigen::Index k,
             std::int64_t max_dim = kDefaultMaxCompoundDim) {
  using Scalar = typename Derived::Scalar;
  if (A.rows() != A.cols())
    throw std::invalid_argument("add_compound: matrix must be square");
  detail::check_compound_args(A.rows(), A.cols(), k, max_dim);
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> M = A;
  if (!M.allFinite())
    throw std::invalid_argument("add_compound: non-finite entries");
  const auto idx = detail::combinations0(M.rows(), k);
  const auto r = static_cast<Eigen::Index>(idx.size());
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(r, r);

  // Scratch for the single-position difference test.
  std::vector<Eigen::Index> da, db;
  for (Eigen::Index a = 0; a < r; ++a) {
    const auto& alpha = idx[static_cast<std::size_t>(a)];
    Scalar diag{};
    for (auto i : alpha) diag += M(i, i);
    out(a, a) = diag;
    for (Eigen::Index b = 0; b < r; ++b) {
      if (a == b) continue;
      const auto& beta = idx[static_cast<std::size_t>(b)];
      da.clear();
      db.clear();
      // Entries in alpha but not beta (and vice versa); both sorted.
      std::set_difference(alpha.begin(), alpha.end(), beta.begin(), beta.end(),
                          std::back_inserter(da));
      if (da.size() != 1) continue;
      std::set_difference(beta.begin(), beta.end(), alpha.begin(), alpha.end(),
                          std::back_inserter(db));
      const auto s = std::find(alpha.begin(), alpha.end(), da[0]) - alpha.begin();
      const auto t = std::find(beta.begin(), beta.end(), db[0]) - beta.begin();
      const Scalar sign = ((s + t) % 2 == 0) ? Scalar(1) : Scalar(-1);
      out(a, b) = sign * M(da[0], db[0]);
    }
  }
  return out;
}

template <typename Derived>
auto add_compound(const Eigen::MatrixBase<Derived>& A, const CompoundSpec& spec) {
  return add_compound(A, spec.k, spec.max_dim);
}

/// Volume of the parallelotope spanned by the columns of X (n x k): the
/// Euclidean length of the binom(n,k)-vector X^(k).
template <typename Derived>
typename Derived::Scalar parallelotope_volume(
    const Eigen::MatrixBase<Derived>& X,
    std::int64_t max_dim = kDefaultMaxCompoundDim) {
  if (X.cols() > X.rows())
    throw std::invalid_argument("parallelotope_volume: more vectors than dimensions");
  return mult_compound(X, X.cols(), max_dim).norm();
}

}  // namespace kcontract
