"""Independent reference values computed by adaptive quadrature (scipy)."""

from scipy.integrate import dblquad


def riesz_indicator_value(x, eps=0.0):
    """int_0^1 int_0^1 (x - y) / ((x - y) + (x - z))^3 dy dz for x > 1 (the truncation is inactive)."""
    val, _ = dblquad(lambda z, y: (x - y) / ((x - y) + (x - z)) ** 3, 0.0, 1.0, 0.0, 1.0,
                     epsabs=1e-13, epsrel=1e-12)
    return val


def riesz_indicator_truncated(x, eps):
    """Same integrand over the part of [0,1]^2 with max(|x - y|, |x - z|) > eps, for x >= 1."""
    lo = max(0.0, x - eps)  # cells with y > lo and z > lo are excluded
    full = riesz_indicator_value(x)
    if lo >= 1.0:
        return full
    cut, _ = dblquad(lambda z, y: (x - y) / ((x - y) + (x - z)) ** 3, lo, 1.0, lo, 1.0,
                     epsabs=1e-13, epsrel=1e-12)
    return full - cut


def riesz_commutator_value(b, x):
    """int_0^1 int_0^1 (b(x) - b(y)) (x - y) / ((x - y) + (x - z))^3 dy dz for x > 1."""
    val, _ = dblquad(lambda z, y: (b(x) - b(y)) * (x - y) / ((x - y) + (x - z)) ** 3, 0.0, 1.0, 0.0, 1.0,
                     epsabs=1e-13, epsrel=1e-12)
    return val
