#pragma once

namespace glpin {

/// Modified Bessel functions of order 0 and 1 at a single positive argument.
struct BesselEval {
  double x = 0.0;
  double I0 = 1.0;
  double I1 = 0.0;
  double K0 = 0.0;
  double K1 = 0.0;
};

/// All four values, relative accuracy ~1e-14 on [1e-8, 50]. Throws
/// DomainError for x <= 0.
BesselEval bessel(double x);

double bessel_i0(double x);  // x >= 0
double bessel_i1(double x);  // x >= 0
double bessel_k0(double x);  // x > 0
double bessel_k1(double x);  // x > 0

/// |I0 K1 + I1 K0 - 1/x| * x.
double bessel_wronskian_residual(double x);

namespace detail {
// K branch switch point: series below, continued fraction above.
inline constexpr double kKSeriesLimit = 2.0;
// I branch switch point: power series below, asymptotic expansion above.
inline constexpr double kIAsymptoticLimit = 30.0;

void k01_series(double x, double& k0, double& k1);
void k01_continued_fraction(double x, double& k0, double& k1);
}  // namespace detail

}  // namespace glpin
