#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Core>
#include <unsupported/Eigen/FFT>

namespace rapidkrig {

/// Complex array on a 2-D torus: rows index x, columns index y (x is contiguous).
template <typename Scalar>
using ComplexGrid = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

/// Smallest integer >= n whose only prime factors are 2 and 3.
inline Eigen::Index smooth23(Eigen::Index n) {
  if (n <= 1) return 1;
  for (Eigen::Index m = n;; ++m) {
    Eigen::Index r = m;
    while (r % 2 == 0) r /= 2;
    while (r % 3 == 0) r /= 3;
    if (r == 1) return m;
  }
}

/// Separable 2-D FFT built from Eigen's 1-D transform. Forward is unnormalized,
/// inverse divides by the number of points.
template <typename Scalar>
class Fft2 {
 public:
  void forward(ComplexGrid<Scalar>& a) { transform(a, true); }
  void inverse(ComplexGrid<Scalar>& a) { transform(a, false); }

 private:
  void transform(ComplexGrid<Scalar>& a, bool fwd) {
    const Eigen::Index nx = a.rows(), ny = a.cols();
    buf_in_.resize(static_cast<std::size_t>(std::max(nx, ny)));
    buf_out_.resize(buf_in_.size());
    for (Eigen::Index j = 0; j < ny; ++j) {
      std::complex<Scalar>* col = a.col(j).data();
      std::copy(col, col + nx, buf_in_.begin());
      if (fwd)
        fft_.fwd(buf_out_.data(), buf_in_.data(), nx);
      else
        fft_.inv(buf_out_.data(), buf_in_.data(), nx);
      std::copy(buf_out_.begin(), buf_out_.begin() + nx, col);
    }
    for (Eigen::Index i = 0; i < nx; ++i) {
      for (Eigen::Index j = 0; j < ny; ++j) buf_in_[static_cast<std::size_t>(j)] = a(i, j);
      if (fwd)
        fft_.fwd(buf_out_.data(), buf_in_.data(), ny);
      else
        fft_.inv(buf_out_.data(), buf_in_.data(), ny);
      for (Eigen::Index j = 0; j < ny; ++j) a(i, j) = buf_out_[static_cast<std::size_t>(j)];
    }
  }

  Eigen::FFT<Scalar> fft_;
  std::vector<std::complex<Scalar>> buf_in_, buf_out_;
};

/// Stationary kernel tabulated on a torus of size t1 x t2 at the minimal wrapped lag.
/// For lags |d| <= (t - 1) / 2 the wrapped lag equals |d|, so a torus of at least
/// 2m - 1 points reproduces every lag of an m-point grid.
template <typename Scalar, typename Kernel>
ComplexGrid<Scalar> torus_kernel(Eigen::Index t1, Eigen::Index t2, Scalar hx, Scalar hy,
                                 const Kernel& kernel) {
  ComplexGrid<Scalar> out(t1, t2);
  for (Eigen::Index j = 0; j < t2; ++j) {
    const Scalar ly = Scalar(std::min(j, t2 - j)) * hy;
    for (Eigen::Index i = 0; i < t1; ++i) {
      const Scalar lx = Scalar(std::min(i, t1 - i)) * hx;
      out(i, j) = std::complex<Scalar>(kernel(std::sqrt(lx * lx + ly * ly)), Scalar(0));
    }
  }
  return out;
}

}  // namespace rapidkrig
