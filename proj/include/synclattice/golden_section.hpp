#pragma once

#include <cmath>
#include <utility>

namespace synclattice {

template <typename Real>
struct MinimizeResult {
  Real argmin;
  Real value;
};

// Golden-section search for a minimum of f on [lo, hi], stopping once the
// bracket is narrower than tol. f is assumed unimodal on the bracket; if it
// is not, the result is still a point of [lo, hi] no worse than either
// interior probe seen last.
template <class F, typename Real>
MinimizeResult<Real> golden_section_minimize(F&& f, Real lo, Real hi, Real tol) {
  static const Real inv_phi = (std::sqrt(Real(5)) - Real(1)) / Real(2);
  Real a = lo, b = hi;
  Real c = b - inv_phi * (b - a);
  Real d = a + inv_phi * (b - a);
  Real fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return fc <= fd ? MinimizeResult<Real>{c, fc} : MinimizeResult<Real>{d, fd};
}

}  // namespace synclattice
