#include "glpin/bessel.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "glpin/error.hpp"

namespace glpin {

namespace {

constexpr double kEps = 1e-17;
constexpr int kMaxTerms = 500;

void require_positive(double x) {
  if (!(x > 0.0) || !std::isfinite(x))
    throw Error(ErrorCode::DomainError, "Bessel argument must be positive and finite, got " + std::to_string(x));
}

// Power series; all terms positive so no cancellation at any x.
void i01_series(double x, double& i0, double& i1) {
  const double q = 0.25 * x * x;
  double t0 = 1.0, t1 = 1.0;
  double s0 = 1.0, s1 = 1.0;
  for (int k = 1; k < kMaxTerms; ++k) {
    t0 *= q / (static_cast<double>(k) * k);
    t1 *= q / (static_cast<double>(k) * (k + 1));
    s0 += t0;
    s1 += t1;
    if (t0 < kEps * s0 && t1 < kEps * s1) break;
  }
  i0 = s0;
  i1 = 0.5 * x * s1;
}

// Hankel expansion e^x / sqrt(2 pi x) * sum (-1)^k a_k(nu) / x^k.
double i_asymptotic(double x, int order) {
  const double mu = 4.0 * order * order;
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 60; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = -term * (mu - odd * odd) / (k * 8.0 * x);
    if (std::abs(next) > std::abs(term)) break;
    term = next;
    sum += term;
    if (std::abs(term) < kEps * std::abs(sum)) break;
  }
  return std::exp(x) / std::sqrt(2.0 * std::numbers::pi * x) * sum;
}

}  // namespace

namespace detail {

void k01_series(double x, double& k0, double& k1) {
  constexpr double gamma = std::numbers::egamma;
  double i0 = 0.0, i1 = 0.0;
  i01_series(x, i0, i1);
  const double q = 0.25 * x * x;
  const double lx = std::log(0.5 * x);

  // K0 = -(ln(x/2) + gamma) I0 + sum_{k>=1} q^k / (k!)^2 H_k
  double t = 1.0, harmonic = 0.0, s0 = 0.0;
  // K1 = 1/x + ln(x/2) I1 - (x/4) sum_{k>=0} (psi(k+1) + psi(k+2)) q^k / (k! (k+1)!)
  double psi1 = -gamma;      // psi(k+1)
  double psi2 = 1.0 - gamma;  // psi(k+2)
  double u = 1.0;            // q^k / (k! (k+1)!)
  double s1 = psi1 + psi2;
  for (int k = 1; k < kMaxTerms; ++k) {
    t *= q / (static_cast<double>(k) * k);
    harmonic += 1.0 / k;
    s0 += t * harmonic;
    u *= q / (static_cast<double>(k) * (k + 1));
    psi1 += 1.0 / k;
    psi2 += 1.0 / (k + 1);
    s1 += u * (psi1 + psi2);
    if (std::abs(t * harmonic) < kEps * std::abs(s0) && std::abs(u * (psi1 + psi2)) < kEps * std::abs(s1)) break;
  }
  k0 = -(lx + gamma) * i0 + s0;
  k1 = 1.0 / x + lx * i1 - 0.25 * x * s1;
}

// Steed's continued fraction for K_nu at nu = 0 (Temme's normalisation).
void k01_continued_fraction(double x, double& k0, double& k1) {
  const double a1 = 0.25;
  double b = 2.0 * (1.0 + x);
  double d = 1.0 / b;
  double h = d, delh = d;
  double q1 = 0.0, q2 = 1.0;
  double q = a1, c = a1;
  double a = -a1;
  double s = 1.0 + q * delh;
  for (int i = 1; i < kMaxTerms; ++i) {
    a -= 2 * i;
    c = -a * c / (i + 1.0);
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::abs(dels / s) < 1e-17) break;
  }
  h *= a1;
  k0 = std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x) / s;
  k1 = k0 * (x + 0.5 - h) / x;
}

}  // namespace detail

double bessel_i0(double x) {
  if (x < 0.0 || !std::isfinite(x)) throw Error(ErrorCode::DomainError, "I0 requires x >= 0");
  if (x > detail::kIAsymptoticLimit) return i_asymptotic(x, 0);
  double i0 = 0.0, i1 = 0.0;
  i01_series(x, i0, i1);
  return i0;
}

double bessel_i1(double x) {
  if (x < 0.0 || !std::isfinite(x)) throw Error(ErrorCode::DomainError, "I1 requires x >= 0");
  if (x > detail::kIAsymptoticLimit) return i_asymptotic(x, 1);
  double i0 = 0.0, i1 = 0.0;
  i01_series(x, i0, i1);
  return i1;
}

double bessel_k0(double x) { return bessel(x).K0; }
double bessel_k1(double x) { return bessel(x).K1; }

BesselEval bessel(double x) {
  require_positive(x);
  BesselEval out;
  out.x = x;
  if (x > detail::kIAsymptoticLimit) {
    out.I0 = i_asymptotic(x, 0);
    out.I1 = i_asymptotic(x, 1);
  } else {
    i01_series(x, out.I0, out.I1);
  }
  if (x <= detail::kKSeriesLimit)
    detail::k01_series(x, out.K0, out.K1);
  else
    detail::k01_continued_fraction(x, out.K0, out.K1);
  return out;
}

double bessel_wronskian_residual(double x) {
  const BesselEval b = bessel(x);
  return std::abs(b.I0 * b.K1 + b.I1 * b.K0 - 1.0 / x) * x;
}

}  // namespace glpin
