#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>

#include "rapidkrig/errors.hpp"

namespace rapidkrig {

namespace detail {

// Taylor coefficients of 1/Gamma(z) about z = 0 (a_1 .. a_20).
inline constexpr double kRecipGammaTaylor[] = {
    1.0,
    0.5772156649015328606065,
    -0.655878071520253881077,
    -0.042002635034095235529,
    0.1665386113822914895017,
    -0.04219773455554433674821,
    -0.009621971527876973562115,
    0.007218943246663099542395,
    -0.001165167591859065112114,
    -0.0002152416741149509728157,
    0.0001280502823881161861532,
    -0.00002013485478078823865569,
    -0.000001250493482142670657345,
    0.000001133027231981695882374,
    -2.05633841697760710345e-7,
    6.116095104481415817862e-9,
    5.002007644469222930056e-9,
    -1.181274570487020144588e-9,
    1.043426711691100510492e-10,
    7.78226343990507125405e-12,
};

/// Temme's auxiliary gamma quantities for |mu| <= 1/2:
///   gam1 = (1/G(1-mu) - 1/G(1+mu)) / (2 mu),  gam2 = (1/G(1-mu) + 1/G(1+mu)) / 2,
///   gampl = 1/G(1+mu),  gammi = 1/G(1-mu).
template <typename Scalar>
void temme_gammas(Scalar mu, Scalar& gam1, Scalar& gam2, Scalar& gampl, Scalar& gammi) {
  using std::abs;
  if (abs(mu) < Scalar(0.1)) {
    // 1/G(1+x) = sum_k a_k x^(k-1); split into even and odd parts.
    const Scalar x2 = mu * mu;
    Scalar even = 0, odd = 0, p = 1;
    for (int k = 0; k + 1 < 20; k += 2) {
      even += Scalar(kRecipGammaTaylor[k]) * p;
      odd += Scalar(kRecipGammaTaylor[k + 1]) * p;
      p *= x2;
    }
    gam1 = -odd;
    gam2 = even;
    gampl = even + mu * odd;
    gammi = even - mu * odd;
  } else {
    gampl = Scalar(1) / std::tgamma(Scalar(1) + mu);
    gammi = Scalar(1) / std::tgamma(Scalar(1) - mu);
    gam1 = (gammi - gampl) / (Scalar(2) * mu);
    gam2 = (gammi + gampl) / Scalar(2);
  }
}


// Chebyshev coefficients in u = 2w - 1, w = 2/x, of exp(x) sqrt(x) K_n(x) on x >= 2
// (tools/gen_bessel_tables.py). The series is c0/2 + sum_k c_k T_k(u).
inline constexpr double kK0Cheb[] = {
    2.4403030820659554547,
    -3.1448101311964500543e-2,
    1.5698838857300533749e-3,
    -1.2849549581627802638e-4,
    1.3949813718876499364e-5,
    -1.8317555227191194848e-6,
    2.7668136394450150761e-7,
    -4.6604898976879476656e-8,
    8.5740340174142260858e-9,
    -1.6975345093890615156e-9,
    3.5773972814003284472e-10,
    -7.9574892444773970377e-11,
    1.855949114954926555e-11,
    -4.5145978833745191751e-12,
    1.1403405882073442347e-12,
    -2.9800969231481783548e-13,
    8.0328907750683743694e-14,
    -2.2275133267462963604e-14,
    6.3400764762766459661e-15,
    -1.8485933779209071694e-15,
    5.5120559994043333649e-16,
    -1.6782311257549006383e-16,
    5.2103917776435541125e-17,
    -1.6475805939842632815e-17,
    5.300433771177335771e-18};
inline constexpr double kK1Cheb[] = {
    2.7206261904844426694,
    1.0392373657681723844e-1,
    -2.8578168596227793868e-3,
    1.9521551847135163111e-4,
    -1.93619797416608296e-5,
    2.4064849478372171171e-6,
    -3.5019606030878125421e-7,
    5.7410841254500492923e-8,
    -1.0345762465678097027e-8,
    2.0150497551970346161e-9,
    -4.1903547593419255842e-10,
    9.2183151876053141258e-11,
    -2.1299678384277910216e-11,
    5.1396396734823435404e-12,
    -1.2891739609498229352e-12,
    3.3484196660522431201e-13,
    -8.9767051820101460692e-14,
    2.4771544242195986813e-14,
    -7.0198370892147688513e-15,
    2.0387031662398608799e-15,
    -6.0570472706430178228e-16,
    1.8380935752430454256e-16,
    -5.6894628491936483743e-17,
    1.7940510478863572914e-17,
    -5.7567444820733024503e-18};

template <typename Scalar, std::size_t N>
Scalar chebyshev_sum(const double (&c)[N], Scalar u) {
  Scalar b0 = 0, b1 = 0, b2 = 0;
  const Scalar u2 = Scalar(2) * u;
  for (std::size_t k = N; k-- > 1;) {
    b2 = b1;
    b1 = b0;
    b0 = u2 * b1 - b2 + Scalar(c[k]);
  }
  return u * b0 - b1 + Scalar(0.5) * Scalar(c[0]);
}

// Ascending-series coefficients for K_0 and K_1 in y = x^2/4 (x <= 2, so y <= 1).
struct K01SeriesTables {
  static constexpr int terms = 15;
  double i0[terms], k0[terms], i1[terms], k1[terms];
};

constexpr K01SeriesTables make_k01_tables() {
  constexpr double euler_gamma = 0.57721566490153286060651209;
  K01SeriesTables t{};
  double fact = 1, harmonic = 0;  // k! and H_k
  for (int k = 0; k < K01SeriesTables::terms; ++k) {
    if (k > 0) {
      fact *= k;
      harmonic += 1.0 / k;
    }
    const double fact1 = fact * (k + 1);
    t.i0[k] = 1 / (fact * fact);
    t.k0[k] = harmonic / (fact * fact);
    t.i1[k] = 1 / (fact * fact1);
    t.k1[k] = (2 * harmonic + 1.0 / (k + 1) - 2 * euler_gamma) / (fact * fact1);
  }
  return t;
}

inline constexpr K01SeriesTables kK01Series = make_k01_tables();

/// K_0(x) and K_1(x) for x > 0.
template <typename Scalar>
void bessel_k01(Scalar x, Scalar& k0, Scalar& k1) {
  if (x <= Scalar(2)) {
    constexpr Scalar euler_gamma = Scalar(0.57721566490153286060651209);
    const Scalar y = Scalar(0.25) * x * x;
    Scalar i0 = 0, s0 = 0, i1 = 0, s1 = 0;
    for (int k = K01SeriesTables::terms; k-- > 0;) {
      i0 = i0 * y + Scalar(kK01Series.i0[k]);
      s0 = s0 * y + Scalar(kK01Series.k0[k]);
      i1 = i1 * y + Scalar(kK01Series.i1[k]);
      s1 = s1 * y + Scalar(kK01Series.k1[k]);
    }
    const Scalar lx = std::log(Scalar(0.5) * x);
    k0 = -(lx + euler_gamma) * i0 + s0;
    k1 = Scalar(1) / x + lx * Scalar(0.5) * x * i1 - Scalar(0.25) * x * s1;
    return;
  }
  const Scalar u = Scalar(4) / x - Scalar(1);
  const Scalar scale = std::exp(-x) / std::sqrt(x);
  k0 = scale * chebyshev_sum(kK0Cheb, u);
  k1 = scale * chebyshev_sum(kK1Cheb, u);
}

}  // namespace detail

/// Modified Bessel function of the second kind K_nu(x), x > 0, nu >= 0.
///
/// Integer orders start from K_0 and K_1 (ascending series for x <= 2, Chebyshev
/// expansions in 2/x beyond). Other orders use Temme's method: K_mu and K_{mu+1} for
/// |mu| <= 1/2 from the power series when x < 2, or from Steed's continued fraction
/// otherwise. Both finish with forward recurrence in the order, which is stable for K.
template <typename Scalar>
Scalar bessel_k(Scalar nu, Scalar x) {
  using std::abs;
  constexpr Scalar eps = std::numeric_limits<Scalar>::epsilon();
  constexpr int max_iter = 100000;
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;

  if (!(x > 0)) throw DomainError("bessel_k: argument must be positive");
  if (nu < 0) nu = -nu;  // K_{-nu} = K_nu

  if (nu == std::floor(nu) && nu <= Scalar(64)) {
    Scalar km, kp;
    detail::bessel_k01(x, km, kp);
    if (nu == Scalar(0)) return km;
    const Scalar xi2 = Scalar(2) / x;
    for (int i = 1; i < static_cast<int>(nu); ++i) {
      const Scalar next = Scalar(i) * xi2 * kp + km;
      km = kp;
      kp = next;
    }
    return kp;
  }

  const int nl = static_cast<int>(nu + Scalar(0.5));
  const Scalar mu = nu - Scalar(nl);
  const Scalar xi = Scalar(1) / x;
  const Scalar xi2 = Scalar(2) * xi;

  Scalar k_mu, k_mu1;
  if (x < Scalar(2)) {
    const Scalar x2 = Scalar(0.5) * x;
    const Scalar pimu = pi * mu;
    const Scalar fact = abs(pimu) < eps ? Scalar(1) : pimu / std::sin(pimu);
    Scalar d = -std::log(x2);
    Scalar e = mu * d;
    const Scalar fact2 = abs(e) < eps ? Scalar(1) : std::sinh(e) / e;
    Scalar gam1, gam2, gampl, gammi;
    detail::temme_gammas(mu, gam1, gam2, gampl, gammi);
    Scalar ff = fact * (gam1 * std::cosh(e) + gam2 * fact2 * d);
    Scalar sum = ff;
    e = std::exp(e);
    Scalar p = Scalar(0.5) * e / gampl;
    Scalar q = Scalar(0.5) / (e * gammi);
    Scalar c = 1;
    d = x2 * x2;
    Scalar sum1 = p;
    int i = 1;
    for (; i <= max_iter; ++i) {
      const Scalar fi = Scalar(i);
      ff = (fi * ff + p + q) / (fi * fi - mu * mu);
      c *= d / fi;
      p /= fi - mu;
      q /= fi + mu;
      const Scalar del = c * ff;
      sum += del;
      sum1 += c * (p - fi * ff);
      if (abs(del) < abs(sum) * eps) break;
    }
    if (i > max_iter) throw NumericError("bessel_k: series failed to converge");
    k_mu = sum;
    k_mu1 = sum1 * xi2;
  } else {
    Scalar b = Scalar(2) * (Scalar(1) + x);
    Scalar d = Scalar(1) / b;
    Scalar h = d, delh = d;
    Scalar q1 = 0, q2 = 1;
    const Scalar a1 = Scalar(0.25) - mu * mu;
    Scalar q = a1, c = a1;
    Scalar a = -a1;
    Scalar s = Scalar(1) + q * delh;
    int i = 1;
    for (; i <= max_iter; ++i) {
      a -= Scalar(2 * i);
      c = -a * c / Scalar(i + 1);
      const Scalar qnew = (q1 - b * q2) / a;
      q1 = q2;
      q2 = qnew;
      q += c * qnew;
      b += Scalar(2);
      d = Scalar(1) / (b + a * d);
      delh = (b * d - Scalar(1)) * delh;
      h += delh;
      const Scalar dels = q * delh;
      s += dels;
      if (abs(dels / s) < eps) break;
    }
    if (i > max_iter) throw NumericError("bessel_k: continued fraction failed to converge");
    h = a1 * h;
    k_mu = std::sqrt(pi / (Scalar(2) * x)) * std::exp(-x) / s;
    k_mu1 = k_mu * (mu + x + Scalar(0.5) - h) * xi;
  }

  for (int i = 1; i <= nl; ++i) {
    const Scalar next = (mu + Scalar(i)) * xi2 * k_mu1 + k_mu;
    k_mu = k_mu1;
    k_mu1 = next;
  }
  return k_mu;
}

}  // namespace rapidkrig
