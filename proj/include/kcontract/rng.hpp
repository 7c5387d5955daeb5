#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace kcontract {

/// Axis-aligned box in R^n. The only supported domain shape.
struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  Eigen::Index dim() const { return lo.size(); }
  bool valid() const { return lo.size() == hi.size() && (hi - lo).minCoeff() >= 0; }

  static Box centered(Eigen::Index n, double half_width) {
    Box b;
    b.lo = Eigen::VectorXd::Constant(n, -half_width);
    b.hi = Eigen::VectorXd::Constant(n, half_width);
    return b;
  }
};

/// Deterministic draws built directly on mt19937_64 output so that results
/// are identical across standard libraries (std distributions are not).
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  double gaussian() {
    // Box-Muller; cache the second deviate.
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01(), u2 = uniform01();
    while (u1 <= 1e-300) u1 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  Eigen::VectorXd uniform_in(const Box& box) {
    Eigen::VectorXd x(box.dim());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = uniform(box.lo[i], box.hi[i]);
    return x;
  }

  Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd M(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) M(i, j) = gaussian();
    return M;
  }

  /// n x k matrix with orthonormal columns (QR of a Gaussian draw).
  Eigen::MatrixXd orthonormal_columns(Eigen::Index n, Eigen::Index k) {
    if (k > n) throw std::invalid_argument("orthonormal_columns: k > n");
    Eigen::MatrixXd G = gaussian_matrix(n, k);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
    return Q;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(gen_() % i);
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t raw() { return gen_(); }

private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Latin-hypercube sample of n_points over the box: one point per stratum
/// in every coordinate, strata permuted independently per dimension.
inline std::vector<Eigen::VectorXd> latin_hypercube(const Box& box, int n_points,
                                                    Rng& rng) {
  const Eigen::Index d = box.dim();
  std::vector<std::vector<int>> strata(static_cast<std::size_t>(d));
  for (auto& s : strata) {
    s.resize(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i) s[static_cast<std::size_t>(i)] = i;
    rng.shuffle(s);
  }
  std::vector<Eigen::VectorXd> pts;
  pts.reserve(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i) {
    Eigen::VectorXd x(d);
    for (Eigen::Index j = 0; j < d; ++j) {
      const double u = (strata[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] +
                        rng.uniform01()) /
                       n_points;
      x[j] = box.lo[j] + (box.hi[j] - box.lo[j]) * u;
    }
    pts.push_back(std::move(x));
  }
  return pts;
}

}  // namespace kcontract
